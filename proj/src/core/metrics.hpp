#pragma once

// Convergence metrics: Lagrangian gap against a reference point, a
// best-response lower bound on the sup-gap, constrained-problem
// suboptimality/infeasibility, and log-log rate fits.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core_types.hpp"

namespace rbpda {

struct TraceRow {
  std::size_t k = 0;
  std::uint64_t grad_budget = 0;
  std::optional<double> gap_ref;
  std::optional<double> sup_gap;
  std::optional<double> dist_ref;
  std::optional<double> subopt;
  std::optional<double> infeas;
};

enum class TraceColumn { GapRef, SupGap, DistRef, Subopt, Infeas };

const char* to_string(TraceColumn column);
std::optional<TraceColumn> trace_column_from_string(const std::string& name);
std::optional<double> column_value(const TraceRow& row, TraceColumn column);

class ConvergenceTrace {
 public:
  /// Throws std::invalid_argument unless k strictly increases and the budget
  /// does not decrease.
  void append(TraceRow row);
  const std::vector<TraceRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  const TraceRow& back() const { return rows_.back(); }

  /// CSV with header k,grad_budget,gap_ref,sup_gap,dist_ref,subopt,infeas;
  /// missing values are empty fields, reals use 17 significant digits.
  void write_csv(std::ostream& out) const;
  static ConvergenceTrace read_csv(std::istream& in);

 private:
  std::vector<TraceRow> rows_;
};

std::string format_real(double value);

/// Implemented by problems that come from a constrained program.
class ConstrainedAdapter {
 public:
  virtual ~ConstrainedAdapter() = default;
  virtual double objective(const BlockVector& x) const = 0;
  /// max_j max(g_j(x), 0)
  virtual double max_violation(const BlockVector& x) const = 0;
};

/// L(x_bar, y_ref) - L(x_ref, y_bar); nullopt when Phi values are unavailable.
std::optional<double> lagrangian_gap(const SaddleProblem& problem, const SaddlePoint& z_bar,
                                     const SaddlePoint& z_ref);

/// Best responses to z_bar built from the partial gradients at z_bar: vertices
/// for simplex blocks, sign-chosen corners for box blocks, z_bar itself for
/// unbounded blocks. Exact for bilinear couplings.
SaddlePoint best_response(const SaddleProblem& problem, const SaddlePoint& z_bar);

/// max over candidate y of L(x_bar, y) minus min over candidate x of
/// L(x, y_bar). The best response to z_bar is always added. A lower bound on
/// the true sup-gap.
std::optional<double> sup_gap(const SaddleProblem& problem, const SaddlePoint& z_bar,
                              std::span<const SaddlePoint> candidates = {});

struct ConstrainedMetrics {
  double suboptimality = 0.0;
  double infeasibility = 0.0;
};

ConstrainedMetrics constrained_metrics(const ConstrainedAdapter& adapter, const BlockVector& x_bar,
                                       double f_star);

double distance(const SaddlePoint& a, const SaddlePoint& b);

struct RateFit {
  bool available = false;
  double slope = 0.0;
  double intercept = 0.0;
  double k_lo = 0.0;
  double k_hi = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Least-squares slope of log(gap) against log(k) over k in [k_lo, k_hi].
/// Nonpositive gaps are dropped; fewer than 5 points leaves the fit unavailable.
RateFit fit_rate(std::span<const std::pair<double, double>> k_gap, double k_lo, double k_hi);
RateFit fit_rate(const ConvergenceTrace& trace, TraceColumn column, double k_lo, double k_hi);

/// Empirical variance scale of the component gradients: the largest sample
/// standard deviation of grad_{x_i} Phi_l over blocks and random probe points.
double measure_component_spread(const SaddleProblem& problem, std::size_t probes = 4,
                                std::uint64_t seed = 11);

/// Metric configuration evaluated at each checkpoint of a run.
struct MetricOptions {
  std::optional<SaddlePoint> reference;
  bool compute_sup_gap = true;
  const ConstrainedAdapter* constrained = nullptr;
  double f_star = 0.0;
};

TraceRow evaluate_checkpoint(const SaddleProblem& problem, const SaddlePoint& z_bar, std::size_t k,
                             std::uint64_t grad_budget, const MetricOptions& options);

}  // namespace rbpda
