#pragma once

// The randomized block primal-dual iteration, its ergodic averages, the
// batch-saturation restart, and a full-gradient reference scheme.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "core_types.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "stepsize.hpp"

namespace rbpda {

enum class SolverMode {
  IncreasingBatch,  // constant steps, v grows with the block counter
  SingleSample,     // diminishing steps, constant v
  Baseline,         // full-gradient scheme, single primal and dual block
};

const char* to_string(SolverMode mode);
std::optional<SolverMode> solver_mode_from_string(const std::string& name);

struct SolverConfig {
  SolverMode mode = SolverMode::IncreasingBatch;
  double eta = 0.0;
  std::size_t max_iters = 10000;
  /// Stops early once the primal gradient budget reaches this value (0: off).
  std::uint64_t max_budget = 0;
  std::uint64_t seed = 1;
  std::optional<FreeParams> free_params;
  std::size_t batch_size = 1;  // SingleSample only
  bool restart_enabled = false;
  double restart_threshold = 0.9;
  std::optional<double> saturation_fraction;
  std::size_t checkpoint_every = 0;  // 0: log-spaced, 20 per decade
  bool as_mode = false;              // forces delta_bar > 0 (1e-6 when unset)
  double step_scale = 1.0;
  /// Overrides the computed step sizes (constant regime only).
  std::optional<StepPair> explicit_steps;
  std::optional<SaddlePoint> initial;
};

inline constexpr double kAlmostSureDeltaBar = 1e-6;

struct RunState {
  BlockVector x, y;
  BlockVector x_prev, y_prev;
  BlockCounters counters;
  std::size_t k = 0;
  std::uint64_t grad_budget = 0;      // primal component-gradient evaluations
  std::uint64_t dual_grad_evals = 0;  // component evaluations behind the dual full gradients
  std::size_t restarts = 0;

  /// (x^{-1}, y^{-1}) = (x^0, y^0), counters zeroed.
  static RunState start(const SaddlePoint& z0, std::size_t M);
};

struct StepInfo {
  std::size_t primal_block = 0;
  std::size_t dual_block = 0;
  std::size_t batch = 0;
};

/// Step failure carrying the iteration index.
class StepError : public std::runtime_error {
 public:
  StepError(std::size_t k, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(k) + ": " + what), k_(k) {}
  std::size_t iteration() const { return k_; }

 private:
  std::size_t k_;
};

/// One iteration. Draw order: dual block, primal block, component indices.
/// When the batch size reaches p every component is used once instead of
/// being sampled.
StepInfo rbpda_step(RunState& state, const SaddleProblem& problem, const StepSchedule& schedule,
                    const BatchSchedule& batch, Rng& rng);

/// Resets counters and sets the previous iterate to the current one when
/// every block's next batch size is at least ceil(threshold * p).
bool restart_if_saturated(RunState& state, const BatchSchedule& batch, std::size_t p,
                          double threshold);

/// Extrapolated full-gradient dual ascent followed by primal descent on a
/// problem with one primal and one dual block.
void deterministic_baseline_step(RunState& state, const SaddleProblem& problem, double tau,
                                 double sigma);

enum class AveragingMode { Uniform, Weighted };

class ErgodicAccumulator {
 public:
  /// Uniform needs no schedule; Weighted reads t^k and theta^k from it.
  ErgodicAccumulator(AveragingMode mode, const SaddlePoint& z0, std::size_t M, std::size_t N,
                     std::optional<StepSchedule> schedule = std::nullopt);

  /// Adds the iterate produced by iteration K (i.e. z^{K+1}).
  void add(const BlockVector& x_new, const BlockVector& y_new);
  /// Average at the current K with the boundary terms applied.
  SaddlePoint average() const;

  std::size_t count() const { return K_; }
  double total_weight_x() const;
  double total_weight_y() const;
  AveragingMode mode() const { return mode_; }

 private:
  double interior_weight(std::size_t k, std::size_t blocks) const;
  double boundary_weight(std::size_t blocks) const;

  AveragingMode mode_;
  std::optional<StepSchedule> schedule_;
  std::size_t M_, N_;
  std::size_t K_ = 0;
  Eigen::VectorXd sum_x_, sum_y_;  // interior terms
  double weight_x_ = 0.0, weight_y_ = 0.0;
  SaddlePoint first_, last_;
};

enum class RunStatus { Ok, Failed };

struct RunResult {
  RunStatus status = RunStatus::Ok;
  std::string error;
  SaddlePoint final_point;
  SaddlePoint average;
  ConvergenceTrace trace;
  std::size_t iterations = 0;
  std::uint64_t grad_budget = 0;
  std::uint64_t dual_grad_evals = 0;
  std::size_t restarts = 0;
};

/// Checkpoint iterations in [0, K]; always contains 0 and K.
std::vector<std::size_t> checkpoint_iterations(std::size_t K, std::size_t every);

/// Step schedule that `run` would use for `config` on `problem`.
StepSchedule make_schedule(const SaddleProblem& problem, const SolverConfig& config);

/// Runs K iterations from the initial point. Configuration errors throw
/// std::invalid_argument; failures during the iteration are reported in the
/// result with the trace gathered so far.
RunResult run(const SaddleProblem& problem, const SolverConfig& config,
              const MetricOptions& metrics = {});

}  // namespace rbpda
