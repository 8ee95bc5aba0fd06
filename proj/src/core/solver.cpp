#include "solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bregman.hpp"

namespace rbpda {

const char* to_string(SolverMode mode) {
  switch (mode) {
    case SolverMode::IncreasingBatch: return "increasing";
    case SolverMode::SingleSample: return "single";
    case SolverMode::Baseline: return "baseline";
  }
  return "?";
}

std::optional<SolverMode> solver_mode_from_string(const std::string& name) {
  for (auto m : {SolverMode::IncreasingBatch, SolverMode::SingleSample, SolverMode::Baseline})
    if (name == to_string(m)) return m;
  return std::nullopt;
}

RunState RunState::start(const SaddlePoint& z0, std::size_t M) {
  RunState s;
  s.x = z0.x;
  s.y = z0.y;
  s.x_prev = z0.x;
  s.y_prev = z0.y;
  s.counters = BlockCounters(M);
  return s;
}

namespace {

void mean_component_grad_x(const SaddleProblem& problem, std::span<const std::size_t> ids,
                           std::size_t i, const BlockVector& x, const BlockVector& y,
                           std::vector<double>& out, std::vector<double>& tmp) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t l : ids) {
    problem.component_grad_x(l, i, x, y, tmp);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += tmp[c];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (double& v : out) v *= inv;
}

}  // namespace

StepInfo rbpda_step(RunState& state, const SaddleProblem& problem, const StepSchedule& schedule,
                    const BatchSchedule& batch, Rng& rng) {
  const auto& st = problem.structure();
  const std::size_t M = st.num_primal_blocks();
  const std::size_t N = st.num_dual_blocks();
  const std::size_t p = problem.num_components();
  const double m = static_cast<double>(M);
  const double n = static_cast<double>(N);
  const std::size_t k = state.k;
  StepInfo info;
  try {
    const double theta = schedule.theta(k);

    // dual block: extrapolated full partial gradient, then h-prox with -s
    const std::size_t j = draw_block(rng, N);
    const std::size_t nj = st.dual_blocks[j];
    std::vector<double> g(nj), g_prev(nj), lin_y(nj);
    problem.grad_y(j, state.x, state.y, g);
    problem.grad_y(j, state.x_prev, state.y_prev, g_prev);
    for (std::size_t c = 0; c < nj; ++c)
      lin_y[c] = -(n * g[c] + n * m * theta * (g[c] - g_prev[c]));
    BlockVector y_next = state.y;
    const ProxSpec& hy = problem.dual_prox(j);
    prox_step(geometry_of(hy), hy, lin_y, schedule.sigma(j, k), state.y.block(j), y_next.block(j));

    // primal block: sampled estimate at three points sharing one index draw
    const std::size_t i = draw_block(rng, M);
    const std::size_t v = next_batch_size(batch, state.counters, i, k, p);
    std::vector<std::size_t> ids;
    if (v >= p) {
      ids.resize(p);
      std::iota(ids.begin(), ids.end(), std::size_t{0});
    } else {
      ids = sample_indices(rng, v, p);
    }
    const std::size_t mi = st.primal_blocks[i];
    std::vector<double> e1(mi), e2(mi), e3(mi), tmp(mi), r(mi);
    mean_component_grad_x(problem, ids, i, state.x, y_next, e1, tmp);
    mean_component_grad_x(problem, ids, i, state.x, state.y, e2, tmp);
    mean_component_grad_x(problem, ids, i, state.x_prev, state.y_prev, e3, tmp);
    for (std::size_t c = 0; c < mi; ++c) r[c] = m * (e1[c] + (n - 1.0) * theta * (e2[c] - e3[c]));
    BlockVector x_next = state.x;
    const ProxSpec& fx = problem.primal_prox(i);
    prox_step(geometry_of(fx), fx, r, schedule.tau(i, k), state.x.block(i), x_next.block(i));

    state.x_prev = std::move(state.x);
    state.y_prev = std::move(state.y);
    state.x = std::move(x_next);
    state.y = std::move(y_next);
    state.k += 1;
    state.grad_budget += 3 * ids.size();
    state.dual_grad_evals += 2 * p;
    info = {i, j, ids.size()};
  } catch (const StepError&) {
    throw;
  } catch (const std::exception& e) {
    throw StepError(k, e.what());
  }
  return info;
}

bool restart_if_saturated(RunState& state, const BatchSchedule& batch, std::size_t p,
                          double threshold) {
  const auto need = static_cast<std::size_t>(std::ceil(threshold * static_cast<double>(p)));
  for (std::size_t i = 0; i < state.counters.selections.size(); ++i)
    if (batch.peek(state.counters, i, state.k, p) < need) return false;
  state.counters.reset();
  state.x_prev = state.x;
  state.y_prev = state.y;
  state.restarts += 1;
  return true;
}

void deterministic_baseline_step(RunState& state, const SaddleProblem& problem, double tau,
                                 double sigma) {
  const auto& st = problem.structure();
  if (st.num_primal_blocks() != 1 || st.num_dual_blocks() != 1)
    throw std::invalid_argument("baseline step needs one primal and one dual block");
  const std::size_t k = state.k;
  try {
    const std::size_t dx = st.primal_blocks[0];
    const std::size_t dy = st.dual_blocks[0];
    Eigen::VectorXd gy(dy), gy_old(dy), gx(dx);
    problem.grad_y(0, state.x, state.y, {gy.data(), dy});
    problem.grad_y(0, state.x_prev, state.y_prev, {gy_old.data(), dy});
    const Eigen::VectorXd ascent = -(2.0 * gy - gy_old);
    const ProxSpec& hy = problem.dual_prox(0);
    BlockVector y_new(st.dual_blocks,
                      prox_step(geometry_of(hy), hy, {ascent.data(), dy}, sigma, state.y.values()));

    problem.grad_x(0, state.x, y_new, {gx.data(), dx});
    const ProxSpec& fx = problem.primal_prox(0);
    BlockVector x_new(st.primal_blocks,
                      prox_step(geometry_of(fx), fx, {gx.data(), dx}, tau, state.x.values()));

    state.x_prev = state.x;
    state.y_prev = state.y;
    state.x = std::move(x_new);
    state.y = std::move(y_new);
    state.k += 1;
    state.grad_budget += problem.num_components();
    state.dual_grad_evals += 2 * problem.num_components();
  } catch (const std::exception& e) {
    throw StepError(k, e.what());
  }
}

// ---------------------------------------------------------------------------
// ergodic averages

ErgodicAccumulator::ErgodicAccumulator(AveragingMode mode, const SaddlePoint& z0, std::size_t M,
                                       std::size_t N, std::optional<StepSchedule> schedule)
    : mode_(mode), schedule_(std::move(schedule)), M_(M), N_(N), first_(z0), last_(z0) {
  if (M == 0 || N == 0) throw std::invalid_argument("ergodic accumulator needs M, N >= 1");
  if (mode == AveragingMode::Weighted && !schedule_)
    throw std::invalid_argument("weighted averaging needs a step schedule");
  sum_x_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(z0.x.size()));
  sum_y_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(z0.y.size()));
}

double ErgodicAccumulator::interior_weight(std::size_t k, std::size_t blocks) const {
  if (mode_ == AveragingMode::Uniform) return 1.0;
  const double b = static_cast<double>(blocks);
  return schedule_->t(k) * (1.0 + (b - 1.0) * (1.0 - 1.0 / schedule_->theta(k + 1)));
}

double ErgodicAccumulator::boundary_weight(std::size_t blocks) const {
  const double b = static_cast<double>(blocks);
  if (mode_ == AveragingMode::Uniform) return K_ == 0 ? b - 1.0 : b;
  return (b - 1.0) * schedule_->t(K_);
}

void ErgodicAccumulator::add(const BlockVector& x_new, const BlockVector& y_new) {
  if (!x_new.same_layout(first_.x) || !y_new.same_layout(first_.y))
    throw std::invalid_argument("ergodic accumulator: layout mismatch");
  if (mode_ == AveragingMode::Uniform) {
    // z^K moves from the boundary slot into the interior sum
    if (K_ >= 1) {
      sum_x_ += last_.x.as_eigen();
      sum_y_ += last_.y.as_eigen();
      weight_x_ += 1.0;
      weight_y_ += 1.0;
    }
  } else {
    const double wx = interior_weight(K_, M_);
    const double wy = interior_weight(K_, N_);
    sum_x_ += wx * x_new.as_eigen();
    sum_y_ += wy * y_new.as_eigen();
    weight_x_ += wx;
    weight_y_ += wy;
  }
  last_.x = x_new;
  last_.y = y_new;
  ++K_;
}

double ErgodicAccumulator::total_weight_x() const { return weight_x_ + boundary_weight(M_); }
double ErgodicAccumulator::total_weight_y() const { return weight_y_ + boundary_weight(N_); }

SaddlePoint ErgodicAccumulator::average() const {
  if (K_ == 0) return first_;
  SaddlePoint out = first_;
  const double bx = boundary_weight(M_);
  const double by = boundary_weight(N_);
  out.x.as_eigen() = (sum_x_ + bx * last_.x.as_eigen()) / (weight_x_ + bx);
  out.y.as_eigen() = (sum_y_ + by * last_.y.as_eigen()) / (weight_y_ + by);
  return out;
}

// ---------------------------------------------------------------------------
// driver

std::vector<std::size_t> checkpoint_iterations(std::size_t K, std::size_t every) {
  std::vector<std::size_t> ks{0};
  if (every > 0) {
    for (std::size_t k = every; k < K; k += every) ks.push_back(k);
  } else {
    for (int q = 0;; ++q) {
      const double v = std::round(std::pow(10.0, q / 20.0));
      if (v >= static_cast<double>(K)) break;
      ks.push_back(static_cast<std::size_t>(v));
    }
  }
  ks.push_back(K);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

StepSchedule make_schedule(const SaddleProblem& problem, const SolverConfig& config) {
  const auto& st = problem.structure();
  const std::size_t M = st.num_primal_blocks();
  const std::size_t N = st.num_dual_blocks();
  if (config.explicit_steps) {
    if (config.mode == SolverMode::SingleSample)
      throw std::invalid_argument("explicit step sizes apply to the constant regime only");
    if (config.explicit_steps->tau.size() != M || config.explicit_steps->sigma.size() != N)
      throw std::invalid_argument("explicit step sizes must match the block counts");
    return StepSchedule::constant_explicit(config.explicit_steps->tau, config.explicit_steps->sigma);
  }
  const AggregateConstants agg = aggregate_constants(problem.lipschitz(), M, N);
  const ScheduleMode regime = config.mode == SolverMode::SingleSample
                                  ? ScheduleMode::DiminishingThm2
                                  : ScheduleMode::ConstantThm1;
  FreeParams fp = config.free_params.value_or(default_free_params(agg, M, N, regime));
  if (config.as_mode && !(fp.delta_bar > 0.0)) fp.delta_bar = kAlmostSureDeltaBar;
  fp.validate(M, N, config.as_mode);
  if (regime == ScheduleMode::DiminishingThm2)
    return StepSchedule::diminishing(agg, fp, M, N, config.eta, config.step_scale);
  return StepSchedule::constant(agg, fp, M, N, config.step_scale);
}

namespace {

void check_config(const SaddleProblem& problem, const SolverConfig& config) {
  const auto& st = problem.structure();
  st.validate();
  const std::size_t p = problem.num_components();
  if (p == 0) throw std::invalid_argument("problem has no components");
  if (!(config.eta >= 0.0 && config.eta < 1.0)) throw std::invalid_argument("eta must lie in [0, 1)");
  if (!(config.restart_threshold > 0.0 && config.restart_threshold <= 1.0))
    throw std::invalid_argument("restart threshold must lie in (0, 1]");
  if (config.mode == SolverMode::SingleSample &&
      (config.batch_size < 1 || config.batch_size > problem.num_components()))
    throw std::invalid_argument("batch size must satisfy 1 <= v <= p");
  if (config.mode == SolverMode::Baseline &&
      (st.num_primal_blocks() != 1 || st.num_dual_blocks() != 1))
    throw std::invalid_argument("baseline mode needs one primal and one dual block");
  if (config.restart_enabled && config.mode != SolverMode::IncreasingBatch)
    throw std::invalid_argument("restart applies to the increasing-batch mode only");
}

}  // namespace

RunResult run(const SaddleProblem& problem, const SolverConfig& config,
              const MetricOptions& metrics) {
  check_config(problem, config);
  const auto& st = problem.structure();
  const std::size_t M = st.num_primal_blocks();
  const std::size_t N = st.num_dual_blocks();
  const std::size_t p = problem.num_components();
  const StepSchedule schedule = make_schedule(problem, config);
  const BatchSchedule batch = config.mode == SolverMode::IncreasingBatch
                                  ? BatchSchedule::increasing(config.eta, config.saturation_fraction)
                                  : BatchSchedule::constant(
                                        config.mode == SolverMode::Baseline ? p : config.batch_size, p);

  const SaddlePoint z0 = config.initial ? *config.initial : problem.initial_point();
  if (z0.x.size() != st.primal_dim() || z0.y.size() != st.dual_dim())
    throw std::invalid_argument("initial point has the wrong dimensions");
  if (!problem.primal_feasible(z0.x) || !problem.dual_feasible(z0.y))
    throw std::invalid_argument("initial point lies outside dom f x dom h");
  const SaddlePoint start{BlockVector(st.primal_blocks, z0.x.data()),
                          BlockVector(st.dual_blocks, z0.y.data())};

  RunState state = RunState::start(start, M);
  ErgodicAccumulator acc(config.mode == SolverMode::SingleSample ? AveragingMode::Weighted
                                                                 : AveragingMode::Uniform,
                         start, M, N, schedule);
  Rng rng(config.seed, 0);
  const auto checkpoints = checkpoint_iterations(config.max_iters, config.checkpoint_every);

  RunResult result;
  auto checkpoint = [&] {
    if (!problem.primal_feasible(state.x) || !problem.dual_feasible(state.y))
      throw DomainError("iteration " + std::to_string(state.k) + ": iterate left the domain");
    result.trace.append(
        evaluate_checkpoint(problem, acc.average(), state.k, state.grad_budget, metrics));
  };

  try {
    std::size_t next = 0;
    if (checkpoints[next] == 0) {
      checkpoint();
      ++next;
    }
    auto budget_left = [&] { return config.max_budget == 0 || state.grad_budget < config.max_budget; };
    while (state.k < config.max_iters && budget_left()) {
      if (config.mode == SolverMode::Baseline) {
        deterministic_baseline_step(state, problem, schedule.tau(0, state.k),
                                    schedule.sigma(0, state.k));
      } else {
        if (config.restart_enabled) restart_if_saturated(state, batch, p, config.restart_threshold);
        rbpda_step(state, problem, schedule, batch, rng);
      }
      acc.add(state.x, state.y);
      if (next < checkpoints.size() && state.k == checkpoints[next]) {
        checkpoint();
        ++next;
      }
    }
    if (result.trace.empty() || result.trace.back().k != state.k) checkpoint();
  } catch (const std::exception& e) {
    result.status = RunStatus::Failed;
    result.error = e.what();
  }
  result.final_point = {state.x, state.y};
  result.average = acc.average();
  result.iterations = state.k;
  result.grad_budget = state.grad_budget;
  result.dual_grad_evals = state.dual_grad_evals;
  result.restarts = state.restarts;
  return result;
}

}  // namespace rbpda
