// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
// Exit status is 0 once every criterion has been evaluated; pass --strict to
// exit 1 when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "bregman.hpp"
#include "metrics.hpp"
#include "problems.hpp"
#include "sampling.hpp"
#include "solver.hpp"
#include "stepsize.hpp"

using namespace rbpda;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double linf(const BlockVector& a, const BlockVector& b) {
  return (a.as_eigen() - b.as_eigen()).lpNorm<Eigen::Infinity>();
}

// ---------------------------------------------------------------------------
// 1. M = N = 1, v = p, theta = 1 against a separately written full-gradient loop

// Extrapolated dual ascent, then primal descent at the new dual point.
struct PlainScheme {
  BlockVector x, y, gy_prev;
  double tau, sigma;

  PlainScheme(const SaddleProblem& p, double tau_, double sigma_) : tau(tau_), sigma(sigma_) {
    const auto z = p.initial_point();
    x = z.x;
    y = z.y;
    gy_prev = p.zero_dual();
    p.grad_y(0, x, y, gy_prev.block(0));
  }

  void step(const SaddleProblem& p) {
    auto gy = p.zero_dual();
    p.grad_y(0, x, y, gy.block(0));
    std::vector<double> s(gy.size());
    for (std::size_t c = 0; c < s.size(); ++c) s[c] = -(2.0 * gy[c] - gy_prev[c]);
    const BregmanGeometry gd{p.dual_prox(0).geometry};
    const auto y_new = prox_step(gd, p.dual_prox(0), s, sigma, y.values());
    BlockVector yn(p.structure().dual_blocks, y_new);
    auto gx = p.zero_primal();
    p.grad_x(0, x, yn, gx.block(0));
    const BregmanGeometry gp{p.primal_prox(0).geometry};
    const auto x_new = prox_step(gp, p.primal_prox(0), gx.values(), tau, x.values());
    gy_prev = gy;
    y = yn;
    x = BlockVector(p.structure().primal_blocks, x_new);
  }
};

double reduction_error(const SaddleProblem& p, std::size_t iters) {
  SolverConfig cfg;
  const auto schedule = make_schedule(p, cfg);
  const std::size_t comps = p.num_components();
  const auto batch = BatchSchedule::constant(comps, comps);
  RunState state = RunState::start(p.initial_point(), 1);
  Rng rng(17);
  PlainScheme plain(p, schedule.tau(0, 0), schedule.sigma(0, 0));
  double worst = 0.0;
  for (std::size_t k = 0; k < iters; ++k) {
    rbpda_step(state, p, schedule, batch, rng);
    plain.step(p);
    worst = std::max({worst, linf(state.x, plain.x), linf(state.y, plain.y)});
  }
  return worst;
}

Verdict criterion_reduction() {
  MatrixGameProblem game({(Eigen::MatrixXd(2, 2) << 1, 0, 0, 2).finished(), BregmanKind::Euclidean});
  auto data = std::make_shared<RobustErmDataset>(generate_robust_erm(5, 50, 100, 0.1));
  RobustErmProblem erm(data, {});
  const double e1 = reduction_error(game, 100);
  const double e2 = reduction_error(erm, 100);
  const double worst = std::max(e1, e2);
  return {worst <= 1e-12, "max linf deviation game " + fmt("%.3g", e1) + ", erm " + fmt("%.3g", e2)};
}

// ---------------------------------------------------------------------------
// 2 and 3. rates on the box game

struct RateOutcome {
  RateFit fit;
  double final_gap = 0.0;
};

RateOutcome mean_rate(const SaddleProblem& p, const SaddlePoint& ref, SolverConfig cfg,
                      std::size_t seeds) {
  MetricOptions m;
  m.reference = ref;
  std::vector<std::pair<double, double>> sum;
  for (std::size_t s = 0; s < seeds; ++s) {
    cfg.seed = 100 + s;
    const auto res = run(p, cfg, m);
    if (res.status != RunStatus::Ok) throw std::runtime_error(res.error);
    const auto& rows = res.trace.rows();
    if (sum.empty())
      for (const auto& r : rows) sum.emplace_back(static_cast<double>(r.k), 0.0);
    for (std::size_t q = 0; q < rows.size(); ++q) sum[q].second += *rows[q].sup_gap / seeds;
  }
  return {fit_rate(sum, 1e2, 1e4), sum.back().second};
}

RateOutcome g_increasing, g_single;

Verdict criterion_rate_increasing() {
  auto box = make_box_game(2, 2);
  SolverConfig cfg;
  cfg.max_iters = 10000;
  g_increasing = mean_rate(*box, box->reference_point(), cfg, 10);
  const double s = g_increasing.fit.slope;
  return {g_increasing.fit.available && s >= -1.4 && s <= -0.7,
          "slope " + fmt("%.3f", s) + " (r2 " + fmt("%.3f", g_increasing.fit.r_squared) +
              "), mean sup-gap at 1e4 " + fmt("%.3g", g_increasing.final_gap)};
}

Verdict criterion_rate_single() {
  auto box = make_box_game(2, 2);
  SolverConfig cfg;
  cfg.mode = SolverMode::SingleSample;
  cfg.eta = 0.0;
  cfg.batch_size = 1;
  cfg.max_iters = 10000;
  g_single = mean_rate(*box, box->reference_point(), cfg, 10);
  const double s = g_single.fit.slope;
  const bool shallower = g_increasing.fit.available && s > g_increasing.fit.slope;
  return {g_single.fit.available && s >= -0.85 && s <= -0.30 && shallower,
          "slope " + fmt("%.3f", s) + " vs increasing " + fmt("%.3f", g_increasing.fit.slope) +
              ", mean sup-gap at 1e4 " + fmt("%.3g", g_single.final_gap)};
}

// ---------------------------------------------------------------------------
// 4. step-size condition

BlockLipschitz random_lipschitz(Rng& rng, std::size_t M, std::size_t N) {
  auto draw = [&](std::size_t r, std::size_t c) {
    Eigen::MatrixXd A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index a = 0; a < A.rows(); ++a)
      for (Eigen::Index b = 0; b < A.cols(); ++b) A(a, b) = 5.0 * rng.uniform();
    return A;
  };
  BlockLipschitz lip;
  lip.xx = draw(M, M);
  lip.xy = draw(M, N);
  lip.yy = draw(N, N);
  lip.yx = draw(N, M);
  return lip;
}

Verdict criterion_step_condition() {
  Rng rng(404);
  const std::size_t sizes[] = {1, 2, 4};
  double worst = std::numeric_limits<double>::infinity();
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t M = sizes[rng.below(3)], N = sizes[rng.below(3)];
    const auto agg = aggregate_constants(random_lipschitz(rng, M, N), M, N);
    const auto fc = default_free_params(agg, M, N, ScheduleMode::ConstantThm1);
    const auto rc = validate_stepsize_condition(StepSchedule::constant(agg, fc, M, N), agg, fc, M, N, 200);
    worst = std::min(worst, rc.min_slack);
    failures += !rc.pass;
    const auto fd = default_free_params(agg, M, N, ScheduleMode::DiminishingThm2);
    for (double eta : {0.0, 0.25, 0.5}) {
      const auto rd = validate_stepsize_condition(StepSchedule::diminishing(agg, fd, M, N, eta), agg,
                                                  fd, M, N, 200);
      worst = std::min(worst, rd.min_slack);
      failures += !rd.pass;
    }
  }
  return {failures == 0 && worst >= -1e-9,
          std::to_string(failures) + " failing schedules, min slack " + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------------------
// 5. estimator unbiasedness

Verdict criterion_unbiased() {
  auto data = std::make_shared<RobustErmDataset>(generate_robust_erm(1, 200, 500, 0.1));
  RobustErmProblem erm(data, {10.0, 10, 200, {}, {}});
  Rng rng(55);
  SaddlePoint z{erm.zero_primal(), erm.zero_dual()};
  for (std::size_t i = 0; i < 10; ++i) sample_in_domain(erm.primal_prox(i), rng, z.x.block(i));
  for (std::size_t j = 0; j < 200; ++j) sample_in_domain(erm.dual_prox(j), rng, z.y.block(j));
  // scale x down so that margins stay moderate
  for (double& v : z.x.values()) v *= 0.05;
  const std::size_t block = 3, dim = z.x.block_dim(block);
  std::vector<double> full(dim);
  erm.grad_x(block, z.x, z.y, full);
  const int draws = 10000;
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  for (int q = 0; q < draws; ++q) {
    const auto ids = sample_indices(rng, 1, erm.num_components());
    const auto est = estimate_partial_grad_x(erm, ids, block, z.x, z.y);
    for (std::size_t c = 0; c < dim; ++c) {
      sum[c] += est.value[c];
      sq[c] += est.value[c] * est.value[c];
    }
  }
  double worst = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    const double mean = sum[c] / draws;
    const double se = std::sqrt(std::max(0.0, sq[c] / draws - mean * mean) / draws);
    worst = std::max(worst, std::abs(mean - full[c]) / se);
  }
  return {worst <= 4.0, "worst deviation " + fmt("%.2f", worst) + " standard errors over " +
                            std::to_string(dim) + " coordinates"};
}

// ---------------------------------------------------------------------------
// 6. E[1/v]

Verdict criterion_inverse_batch() {
  Rng rng(66);
  const auto inc = BatchSchedule::increasing(0.0);
  const std::size_t p = 1000000;
  bool ok = true;
  std::ostringstream detail;
  for (std::size_t M : {2u, 4u})
    for (std::size_t k : {9u, 99u}) {
      const int runs = 10000;
      double sum = 0.0, sq = 0.0;
      for (int r = 0; r < runs; ++r) {
        BlockCounters c(M);
        for (std::size_t it = 0; it < k; ++it) next_batch_size(inc, c, draw_block(rng, M), it, p);
        const double inv = 1.0 / static_cast<double>(inc.peek(c, 0, k, p));
        sum += inv;
        sq += inv * inv;
      }
      const double mean = sum / runs;
      const double se = std::sqrt((sq / runs - mean * mean) / runs);
      const double bound = static_cast<double>(M) / static_cast<double>(k + 1);
      ok = ok && mean <= bound + 3 * se;
      detail << "M" << M << "k" << k << " " << fmt("%.4f", mean) << "<=" << fmt("%.4f", bound) << "+3se("
             << fmt("%.1e", 3 * se) << "); ";
    }
  const double exact = expected_inverse_batch(2, 9, 0.0).exact;
  ok = ok && std::abs(exact - 0.1998047) <= 1e-6;
  detail << "exact M2k9 " << fmt("%.7f", exact);
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 7. weighted averaging

Verdict criterion_weights() {
  double worst = 0.0;
  for (std::size_t M : {1u, 3u})
    for (double eta : {0.0, 0.5})
      for (std::size_t K : {1u, 10u, 100u}) {
        const auto agg = aggregate_constants(BlockLipschitz::broadcast(M, 1, 1, 1, 0, 1), M, 1);
        const auto fp = default_free_params(agg, M, 1, ScheduleMode::DiminishingThm2);
        const auto sched = StepSchedule::diminishing(agg, fp, M, 1, eta);
        const std::vector<std::size_t> xb(M, 1), yb{1};
        SaddlePoint z0{BlockVector(xb, 0.0), BlockVector(yb, 0.0)};
        ErgodicAccumulator acc(AveragingMode::Weighted, z0, M, 1, sched);
        for (std::size_t k = 0; k < K; ++k) acc.add(z0.x, z0.y);
        double TK = 0.0;
        for (std::size_t k = 0; k < K; ++k) TK += schedule_t(eta, k);
        worst = std::max(worst, std::abs(acc.total_weight_x() - (TK + static_cast<double>(M) - 1.0)));
      }
  return {worst <= 1e-10, "max |weight - (T_K + M - 1)| " + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------------------
// 8. prox correctness

Verdict criterion_prox() {
  Rng rng(88);
  const BregmanGeometry eu{BregmanKind::Euclidean, 1e-30};
  const BregmanGeometry en{BregmanKind::NegativeEntropy, 1e-30};
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  };
  double grid_err = 0.0;
  const auto simplex = ProxSpec::simplex(BregmanKind::Euclidean);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> r(3), xb(3), g(3), arg(3);
    for (double& v : r) v = rng.normal();
    sample_in_domain(simplex, rng, xb);
    const double t = 0.3 + rng.uniform();
    const auto xp = prox_step(eu, simplex, r, t, xb);
    double best = std::numeric_limits<double>::infinity();
    const int steps = 1000;
    for (int a = 0; a <= steps; ++a)
      for (int b = 0; a + b <= steps; ++b) {
        g = {a / double(steps), b / double(steps), 1.0 - (a + b) / double(steps)};
        const double val = dot(r, g) + bregman_distance(eu, g, xb) / t;
        if (val < best) {
          best = val;
          arg = g;
        }
      }
    for (int c = 0; c < 3; ++c) grid_err = std::max(grid_err, std::abs(arg[c] - xp[c]));
  }

  struct Case {
    BregmanGeometry geom;
    ProxSpec spec;
  };
  const std::vector<Case> cases{{eu, ProxSpec::zero()},
                                {eu, ProxSpec::box({-1, -2, -3}, {0.5, 1, 2})},
                                {eu, ProxSpec::simplex(BregmanKind::Euclidean)},
                                {en, ProxSpec::simplex(BregmanKind::NegativeEntropy)},
                                {eu, ProxSpec::nonnegative()},
                                {eu, ProxSpec::scaled_l1(0.7)}};
  double slack = std::numeric_limits<double>::infinity();
  for (const auto& c : cases)
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> r(3), xb(3), x(3);
      for (double& v : r) v = 3 * rng.normal();
      sample_in_domain(c.spec, rng, xb);
      sample_in_domain(c.spec, rng, x);
      const double t = 0.05 + 2 * rng.uniform();
      const auto xp = prox_step(c.geom, c.spec, r, t, xb);
      if (c.geom.kind == BregmanKind::NegativeEntropy &&
          *std::min_element(xp.begin(), xp.end()) < c.geom.epsilon_floor)
        continue;
      const double lhs = c.spec.value(x) + dot(r, x) + bregman_distance(c.geom, x, xb) / t;
      const double rhs = c.spec.value(xp) + dot(r, xp) + bregman_distance(c.geom, xp, xb) / t +
                         bregman_distance(c.geom, x, xp) / t;
      slack = std::min(slack, lhs - rhs);
    }
  return {grid_err <= 2e-3 && slack >= -1e-9,
          "grid deviation " + fmt("%.2g", grid_err) + ", min three-point slack " + fmt("%.3g", slack)};
}

// ---------------------------------------------------------------------------
// 9. desk-scale robust ERM

Verdict criterion_erm() {
  const std::size_t n = 200, m = 500, seeds = 10;
  const std::uint64_t budget = 200000;
  auto data = std::make_shared<RobustErmDataset>(generate_robust_erm(1, n, m, 0.1));
  RobustErmProblem erm(data, {10.0, 10, n, {}, {}});
  const auto ref = long_baseline_reference(erm, 200000, 1e-9, 1000);
  const auto z0 = erm.initial_point();
  const double initial = *lagrangian_gap(erm, z0, ref.point);

  MetricOptions metrics;
  metrics.reference = ref.point;
  metrics.compute_sup_gap = false;
  auto mean_gap = [&](SolverConfig cfg, std::size_t& iters) {
    double sum = 0.0;
    iters = 0;
    cfg.max_budget = budget;
    cfg.max_iters = budget;  // every iteration costs at least 3
    cfg.checkpoint_every = 5000;
    for (std::size_t s = 0; s < seeds; ++s) {
      cfg.seed = 900 + s;
      const auto res = run(erm, cfg, metrics);
      if (res.status != RunStatus::Ok) throw std::runtime_error(res.error);
      sum += *res.trace.back().gap_ref;
      iters += res.iterations / seeds;
    }
    return sum / static_cast<double>(seeds);
  };
  SolverConfig inc;
  inc.restart_enabled = true;
  std::size_t it_inc = 0, it_one = 0;
  const double g_inc = mean_gap(inc, it_inc);
  SolverConfig single;
  single.mode = SolverMode::SingleSample;
  single.batch_size = 1;
  const double g_one = mean_gap(single, it_one);
  const auto steps = make_schedule(erm, inc);
  const double ratio = g_inc / initial;
  return {ratio <= 5e-2 && g_inc < g_one,
          "reference after " + std::to_string(ref.iterations) + " iters" +
              (ref.plateaued ? "" : " (no plateau)") + "; initial gap " + fmt("%.4g", initial) +
              ", increasing " + fmt("%.4g", g_inc) + " (ratio " + fmt("%.3g", ratio) + ", " +
              std::to_string(it_inc) + " iters, tau " + fmt("%.2g", steps.tau(0, 0)) + ", sigma " +
              fmt("%.2g", steps.sigma(0, 0)) + "), v=1 " + fmt("%.4g", g_one) + " (" +
              std::to_string(it_one) + " iters)"};
}

// ---------------------------------------------------------------------------
// 10. restart heuristic

Verdict criterion_restart() {
  const std::size_t p = 10, M = 2;
  const auto inc = BatchSchedule::increasing(0.0);
  RunState state = RunState::start(
      {BlockVector(std::vector<std::size_t>{1, 1}, 0.0), BlockVector(std::vector<std::size_t>{1}, 0.0)}, M);
  Rng rng(10);
  bool ok = true;
  std::size_t resets = 0;
  for (std::size_t k = 0; k < 200; ++k) {
    next_batch_size(inc, state.counters, draw_block(rng, M), k, p);
    state.x[0] = static_cast<double>(k);  // so that a reset is visible in x_prev
    bool all_saturated = true;
    for (std::size_t i = 0; i < M; ++i) all_saturated = all_saturated && inc.peek(state.counters, i, k, p) >= 9;
    const bool reset = restart_if_saturated(state, inc, p, 0.9);
    ok = ok && reset == all_saturated;
    if (reset) {
      ++resets;
      ok = ok && state.counters.total() == 0 && state.x_prev[0] == state.x[0];
      for (std::size_t i = 0; i < M; ++i) ok = ok && inc.peek(state.counters, i, k + 1, p) == 1;
    }
  }
  return {ok && resets > 0, std::to_string(resets) + " resets in 200 iterations"};
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, criterion_reduction},       {2, criterion_rate_increasing}, {3, criterion_rate_single},
      {4, criterion_step_condition},  {5, criterion_unbiased},        {6, criterion_inverse_batch},
      {7, criterion_weights},         {8, criterion_prox},            {9, criterion_erm},
      {10, criterion_restart}};
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::printf("%s criterion %d: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", id, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return strict && failed > 0 ? 1 : 0;
}
