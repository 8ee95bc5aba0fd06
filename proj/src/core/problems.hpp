#pragma once

// Built-in benchmark problems.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core_types.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace rbpda {

// ---------------------------------------------------------------------------
// robust ERM:  min_{|x|_inf <= R} max_{P in S} sum_l P_l log(1 + exp(-b_l a_l^T x))

struct RobustErmDataset {
  Eigen::MatrixXd A;       // n x m
  Eigen::VectorXd b;       // labels in {-1, +1}
  Eigen::VectorXd x_true;  // empty when read from disk
  double flip_prob = 0.1;
  std::uint64_t seed = 0;

  std::size_t n() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t m() const { return static_cast<std::size_t>(A.cols()); }
};

/// A and x_true standard normal, b = sign(A x_true) (sign(0) = +1), each
/// label flipped independently with probability flip_prob.
RobustErmDataset generate_robust_erm(Rng& rng, std::size_t n, std::size_t m, double flip_prob);
RobustErmDataset generate_robust_erm(std::uint64_t seed, std::size_t n, std::size_t m,
                                     double flip_prob);

/// CSV: first row "n,m,seed,flip_prob" values, then n rows of A, then b.
void write_dataset_csv(const RobustErmDataset& data, std::ostream& out);
RobustErmDataset read_dataset_csv(std::istream& in);

enum class ErmDualSet {
  Simplex,  // one dual block; the original uncertainty set
  Box,      // [0,1]^n, separable over any dual blocking
};

struct RobustErmOptions {
  double radius = 10.0;
  std::size_t primal_blocks = 1;
  std::size_t dual_blocks = 1;
  /// Default: Simplex for one dual block, Box otherwise.
  std::optional<ErmDualSet> dual_set;
  BregmanKind simplex_geometry = BregmanKind::NegativeEntropy;
};

class RobustErmProblem final : public SaddleProblem {
 public:
  /// Throws std::invalid_argument when the block counts do not divide m and
  /// n, or when a simplex dual set is split into several blocks.
  RobustErmProblem(std::shared_ptr<const RobustErmDataset> data, const RobustErmOptions& options);

  const BlockStructure& structure() const override { return structure_; }
  std::size_t num_components() const override { return data_->n(); }
  const ProxSpec& primal_prox(std::size_t i) const override { return primal_.at(i); }
  const ProxSpec& dual_prox(std::size_t j) const override { return dual_.at(j); }
  const BlockLipschitz& lipschitz() const override { return lipschitz_; }
  std::string name() const override { return "robust_erm"; }

  void component_grad_x(std::size_t l, std::size_t i, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override;
  void component_grad_y(std::size_t l, std::size_t j, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override;
  void grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
              std::span<double> out) const override;
  void grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
              std::span<double> out) const override;
  std::optional<double> phi(const BlockVector& x, const BlockVector& y) const override;
  std::optional<double> phi_component(std::size_t l, const BlockVector& x,
                                      const BlockVector& y) const override;
  SaddlePoint initial_point() const override;

  /// log(1 + exp(-b_l a_l^T x)), computed stably.
  double loss(std::size_t l, const BlockVector& x) const;
  const RobustErmDataset& data() const { return *data_; }
  std::shared_ptr<const RobustErmDataset> data_ptr() const { return data_; }
  const RobustErmOptions& options() const { return options_; }
  ErmDualSet dual_set() const { return dual_set_; }

 private:
  double margin(std::size_t l, const BlockVector& x) const;  // b_l a_l^T x

  std::shared_ptr<const RobustErmDataset> data_;
  RobustErmOptions options_;
  ErmDualSet dual_set_;
  BlockStructure structure_;
  std::vector<ProxSpec> primal_;
  std::vector<ProxSpec> dual_;
  std::vector<std::size_t> dual_block_of_;  // component -> dual block
  BlockLipschitz lipschitz_;
};

struct ReferenceRun {
  SaddlePoint point;  // in the layout of the problem it was requested for
  std::size_t iterations = 0;
  bool plateaued = false;
  double last_change = 0.0;  // sup-norm change over the last plateau window
};

/// Reference saddle point from a long full-gradient run on the same data with
/// a single primal and a single dual block. Stops after max_iters or once the
/// sup-norm change over `window` iterations falls below `tol`. The result is
/// re-blocked to the layout of `problem`.
ReferenceRun long_baseline_reference(const RobustErmProblem& problem, std::size_t max_iters = 1000000,
                                     double tol = 1e-10, std::size_t window = 1000);

// ---------------------------------------------------------------------------
// matrix game:  min_{x in simplex} max_{y in simplex} x^T A y

struct MatrixGameSpec {
  Eigen::MatrixXd A;
  BregmanKind geometry = BregmanKind::Euclidean;
};

struct MatrixGameSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double value = 0.0;
  bool exact = true;  // false when no support pair passed the checks
};

/// Equilibrium by enumeration of square supports (at most 6 x 6). The payoff
/// is shifted to be positive so that a nonsingular kernel exists.
MatrixGameSolution solve_matrix_game(const Eigen::MatrixXd& A, double tol = 1e-10);

class MatrixGameProblem final : public SaddleProblem {
 public:
  explicit MatrixGameProblem(MatrixGameSpec spec);

  const BlockStructure& structure() const override { return structure_; }
  std::size_t num_components() const override { return 1; }
  const ProxSpec& primal_prox(std::size_t) const override { return prox_; }
  const ProxSpec& dual_prox(std::size_t) const override { return prox_; }
  const BlockLipschitz& lipschitz() const override { return lipschitz_; }
  std::string name() const override { return "matrix_game"; }

  void component_grad_x(std::size_t l, std::size_t i, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override;
  void component_grad_y(std::size_t l, std::size_t j, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override;
  std::optional<double> phi(const BlockVector& x, const BlockVector& y) const override;
  std::optional<double> phi_component(std::size_t l, const BlockVector& x,
                                      const BlockVector& y) const override;

  const Eigen::MatrixXd& payoff() const { return spec_.A; }
  /// Oracle saddle point (only for payoffs of at most 6 x 6).
  std::optional<MatrixGameSolution> reference() const;
  SaddlePoint reference_point() const;

 private:
  MatrixGameSpec spec_;
  BlockStructure structure_;
  ProxSpec prox_;
  BlockLipschitz lipschitz_;
};

// ---------------------------------------------------------------------------
// box game:  min_{x in box} max_{y in box} (x - c)^T A (y - d), one component
// per row of A: Phi_l = p (x - c)_l (A (y - d))_l

class BoxGameProblem final : public SaddleProblem {
 public:
  BoxGameProblem(Eigen::MatrixXd A, Eigen::VectorXd c, Eigen::VectorXd d, double lower,
                 double upper, std::size_t primal_blocks, std::size_t dual_blocks);

  const BlockStructure& structure() const override { return structure_; }
  std::size_t num_components() const override { return static_cast<std::size_t>(A_.rows()); }
  const ProxSpec& primal_prox(std::size_t i) const override { return primal_.at(i); }
  const ProxSpec& dual_prox(std::size_t j) const override { return dual_.at(j); }
  const BlockLipschitz& lipschitz() const override { return lipschitz_; }
  std::string name() const override { return "box_game"; }

  void component_grad_x(std::size_t l, std::size_t i, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override;
  void component_grad_y(std::size_t l, std::size_t j, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override;
  void grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
              std::span<double> out) const override;
  void grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
              std::span<double> out) const override;
  std::optional<double> phi(const BlockVector& x, const BlockVector& y) const override;
  std::optional<double> phi_component(std::size_t l, const BlockVector& x,
                                      const BlockVector& y) const override;

  /// (c, d); a saddle point whenever A is nonsingular and (c, d) is interior.
  SaddlePoint reference_point() const;

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd c_, d_;
  BlockStructure structure_;
  std::vector<ProxSpec> primal_, dual_;
  BlockLipschitz lipschitz_;
};

/// The 4 x 4 test game A = kron([[1, 1/4], [1/4, 1]], diag(1, 2)) on
/// [0,1]^4 x [0,1]^4 centered at c = d = 1/2.
std::unique_ptr<BoxGameProblem> make_box_game(std::size_t primal_blocks, std::size_t dual_blocks);

// ---------------------------------------------------------------------------
// constrained QP:  min 1/2 x^T Q x + c^T x  s.t.  G x <= d, as
//   L(x, y) = 1/2 x^T Q x + c^T x + y^T (G x - d),  y >= 0

struct ConstrainedSpec {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd G;  // q x m, q may be 0
  Eigen::VectorXd d;
  std::optional<Eigen::VectorXd> slater;  // checked when given
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // length q
  double objective = 0.0;
  double kkt_residual = 0.0;
};

/// Enumerates active sets and solves the KKT systems; picks the feasible
/// candidate with the smallest objective. Throws std::invalid_argument when
/// no active set is feasible.
QpSolution solve_qp_active_set(const ConstrainedSpec& spec, double tol = 1e-9);

class ConstrainedQpProblem final : public SaddleProblem, public ConstrainedAdapter {
 public:
  /// Without constraints a single dummy dual coordinate in [0,1] with zero
  /// coupling is used.
  ConstrainedQpProblem(ConstrainedSpec spec, std::size_t primal_blocks = 1,
                       std::size_t dual_blocks = 1);

  const BlockStructure& structure() const override { return structure_; }
  std::size_t num_components() const override { return p_; }
  const ProxSpec& primal_prox(std::size_t i) const override { return primal_.at(i); }
  const ProxSpec& dual_prox(std::size_t j) const override { return dual_.at(j); }
  const BlockLipschitz& lipschitz() const override { return lipschitz_; }
  std::string name() const override { return "qp"; }

  void component_grad_x(std::size_t l, std::size_t i, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override;
  void component_grad_y(std::size_t l, std::size_t j, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override;
  void grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
              std::span<double> out) const override;
  void grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
              std::span<double> out) const override;
  std::optional<double> phi(const BlockVector& x, const BlockVector& y) const override;
  std::optional<double> phi_component(std::size_t l, const BlockVector& x,
                                      const BlockVector& y) const override;

  double objective(const BlockVector& x) const override;
  double max_violation(const BlockVector& x) const override;

  const QpSolution& solution() const { return solution_; }
  SaddlePoint reference_point() const;
  std::size_t num_constraints() const { return static_cast<std::size_t>(spec_.G.rows()); }

 private:
  ConstrainedSpec spec_;
  std::size_t p_;
  BlockStructure structure_;
  std::vector<ProxSpec> primal_, dual_;
  BlockLipschitz lipschitz_;
  QpSolution solution_;
};

/// Largest singular value.
double spectral_norm(const Eigen::MatrixXd& A);

}  // namespace rbpda
