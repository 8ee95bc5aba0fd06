#pragma once

// Block step sizes for the randomized block primal-dual iteration.
//
// Two regimes:
//   * constant steps, theta = t = 1 (paired with increasing batch sizes);
//   * diminishing steps with t^k = (k+1)^{-(1+eta)/2},
//     theta^k = ((k+1)/k)^{(1+eta)/2}, t^0 = theta^0 = 1 (paired with a
//     constant batch).
// Both are built from root-mean-square aggregates of the block Lipschitz
// constants and the free parameters gamma1, gamma2, lambda1, lambda2, alpha,
// beta, delta_bar.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core_types.hpp"

namespace rbpda {

struct AggregateConstants {
  Eigen::VectorXd L_y_x;     // per primal block: sqrt((1/N) sum_j L_{y_j x_i}^2)
  Eigen::VectorXd C_x;       // per primal block: sqrt((1/M) sum_l L_{x_l x_i}^2)
  Eigen::VectorXd L_x_y;     // per dual block:   sqrt((1/M) sum_i L_{x_i y_j}^2)
  Eigen::VectorXd C_y;       // per dual block:   sqrt((1/N) sum_l L_{y_l y_j}^2)
  Eigen::VectorXd Lxx_diag;  // L_{x_i x_i}
  Eigen::VectorXd Lyy_diag;  // L_{y_j y_j}
};

AggregateConstants aggregate_constants(const BlockLipschitz& lip, std::size_t M, std::size_t N);

enum class ScheduleMode { ConstantThm1, DiminishingThm2 };

struct FreeParams {
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::vector<double> alpha;  // per primal block
  std::vector<double> beta;   // per dual block; zero in the constant regime
  double delta_bar = 0.0;

  /// Throws std::invalid_argument on non-positive parameters, wrong lengths,
  /// or delta_bar == 0 when almost-sure mode is requested.
  void validate(std::size_t M, std::size_t N, bool almost_sure_mode = false) const;
};

/// gamma1 = M / sum C_x, lambda1 = N / sum C_y, gamma2 = N / sum L_x_y,
/// lambda2 = M / sum L_y_x (1 when a sum vanishes); alpha_i = M*N in the
/// constant regime and N in the diminishing one; beta_j = 1 + (gamma2/M) L_x_y_j^2
/// in the diminishing regime.
FreeParams default_free_params(const AggregateConstants& agg, std::size_t M, std::size_t N,
                               ScheduleMode mode);

struct StepPair {
  std::vector<double> tau;
  std::vector<double> sigma;
};

StepPair constant_stepsizes(const AggregateConstants& agg, const FreeParams& fp, std::size_t M,
                            std::size_t N);

struct StepValues {
  std::vector<double> tau;
  std::vector<double> sigma;
  double theta = 1.0;
  double t = 1.0;
};

double schedule_t(double eta, std::size_t k);
double schedule_theta(double eta, std::size_t k);

StepValues diminishing_stepsizes(const AggregateConstants& agg, const FreeParams& fp, std::size_t M,
                                 std::size_t N, double eta, std::size_t k);

/// Evaluable per-iteration schedule (tau_i^k, sigma_j^k, theta^k, t^k).
class StepSchedule {
 public:
  static StepSchedule constant(const AggregateConstants& agg, const FreeParams& fp, std::size_t M,
                               std::size_t N, double scale = 1.0);
  /// Constant regime with caller-chosen step sizes.
  static StepSchedule constant_explicit(std::vector<double> tau, std::vector<double> sigma);
  static StepSchedule diminishing(const AggregateConstants& agg, const FreeParams& fp,
                                  std::size_t M, std::size_t N, double eta, double scale = 1.0);

  ScheduleMode mode() const { return mode_; }
  double eta() const { return eta_; }
  std::size_t num_primal_blocks() const { return M_; }
  std::size_t num_dual_blocks() const { return N_; }

  double tau(std::size_t i, std::size_t k) const;
  double sigma(std::size_t j, std::size_t k) const;
  double theta(std::size_t k) const;
  double t(std::size_t k) const;
  /// T_K = sum_{k=0}^{K-1} t^k.
  double T(std::size_t K) const;

 private:
  StepSchedule() = default;

  ScheduleMode mode_ = ScheduleMode::ConstantThm1;
  double eta_ = 0.0;
  double scale_ = 1.0;
  std::size_t M_ = 0;
  std::size_t N_ = 0;
  std::vector<double> tau_;    // constant regime
  std::vector<double> sigma_;  // constant regime
  AggregateConstants agg_;     // diminishing regime
  FreeParams fp_;              // diminishing regime
};

struct StepConditionRow {
  std::size_t k = 0;
  double primal_lipschitz = 0.0;  // t^k(M3^k - A^k) - t^{k+1} M1^{k+1}
  double dual_lipschitz = 0.0;    // t^k(M4^k - B^k) - t^{k+1} M2^{k+1}
  double primal_metric = 0.0;     // t^k T^k - t^{k+1} T^{k+1}
  double dual_metric = 0.0;       // t^k S^k - t^{k+1} S^{k+1}
  double momentum = 0.0;          // -|t^k - t^{k+1} theta^{k+1}|
  double psd = 0.0;               // min diagonal entry over M1..M4
  double min_slack() const;
};

struct StepConditionReport {
  std::vector<StepConditionRow> rows;
  double min_slack = 0.0;
  bool pass = false;
  std::string worst;  // name of the binding inequality
};

inline constexpr double kStepConditionTolerance = 1e-9;

/// Checks the step-size condition for k in [0, k_max]. All matrices involved
/// are block diagonal, so every check is a per-block scalar inequality.
/// Violations are reported, never thrown.
StepConditionReport validate_stepsize_condition(const StepSchedule& schedule,
                                                const AggregateConstants& agg,
                                                const FreeParams& fp, std::size_t M, std::size_t N,
                                                std::size_t k_max);

}  // namespace rbpda
