#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "metrics.hpp"
#include "problems.hpp"
#include "test_util.hpp"

using namespace rbpda;

namespace {

SaddlePoint simplex_point(std::vector<double> x, std::vector<double> y) {
  const std::vector<std::size_t> bx{x.size()}, by{y.size()};
  return {BlockVector(bx, std::move(x)), BlockVector(by, std::move(y))};
}

MatrixGameProblem diag12() {
  return MatrixGameProblem({(Eigen::MatrixXd(2, 2) << 1, 0, 0, 2).finished(), BregmanKind::Euclidean});
}

// Exact sup over the simplices of a bilinear gap, by enumerating vertices.
double vertex_sup_gap(const Eigen::MatrixXd& A, const Eigen::VectorXd& xb, const Eigen::VectorXd& yb) {
  return (A.transpose() * xb).maxCoeff() - (A * yb).minCoeff();
}

}  // namespace

TEST(LagrangianGap, ZeroAtIdenticalPoints) {
  auto game = diag12();
  const auto z = game.reference_point();
  EXPECT_NEAR(*lagrangian_gap(game, z, z), 0.0, 1e-15);
}

TEST(LagrangianGap, HandEvaluatedBilinearForm) {
  MatrixGameProblem eye({Eigen::Matrix2d::Identity(), BregmanKind::Euclidean});
  const auto zr = simplex_point({0.5, 0.5}, {0.5, 0.5});
  EXPECT_NEAR(*lagrangian_gap(eye, simplex_point({1, 0}, {1, 0}), zr), 0.0, 1e-15);
  // A = diag(1, 2): x_bar^T A y_ref - x_ref^T A y_bar
  auto game = diag12();
  const auto saddle = game.reference_point();  // (2/3, 1/3) both sides
  const auto zb = simplex_point({1, 0}, {0.9, 0.1});
  const double expected = 1.0 * (2.0 / 3.0) - ((2.0 / 3.0) * 0.9 + (1.0 / 3.0) * 2.0 * 0.1);
  EXPECT_NEAR(*lagrangian_gap(game, zb, saddle), expected, 1e-14);
}

TEST(LagrangianGap, MissingWithoutPhi) {
  class NoPhi final : public rbpda::testing::Forwarding {
   public:
    using Forwarding::Forwarding;
    std::optional<double> phi(const BlockVector&, const BlockVector&) const override { return {}; }
  };
  NoPhi p(std::make_shared<MatrixGameProblem>(diag12()));
  const auto z = p.initial_point();
  EXPECT_FALSE(lagrangian_gap(p, z, z).has_value());
  EXPECT_FALSE(sup_gap(p, z).has_value());
}

TEST(LagrangianGap, NonnegativeAgainstSaddle) {
  Rng rng(1);
  auto game = diag12();
  const auto saddle = game.reference_point();
  for (int q = 0; q < 1000; ++q) {
    const auto z = rbpda::testing::random_point(game, rng);
    EXPECT_GE(*lagrangian_gap(game, z, saddle), -1e-9);
  }
}

TEST(SupGap, ZeroAtSaddle) {
  auto game = diag12();
  const auto s = game.reference_point();
  EXPECT_NEAR(*sup_gap(game, s, std::vector<SaddlePoint>{s}), 0.0, 1e-12);
}

TEST(SupGap, VertexBestResponseIsExactForBilinear) {
  Rng rng(2);
  Eigen::MatrixXd A(3, 4);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < 4; ++c) A(r, c) = rng.normal();
  MatrixGameProblem game({A, BregmanKind::Euclidean});
  for (int q = 0; q < 50; ++q) {
    const auto z = rbpda::testing::random_point(game, rng);
    const double exact = vertex_sup_gap(A, z.x.as_eigen(), z.y.as_eigen());
    EXPECT_NEAR(*sup_gap(game, z), exact, 1e-12);
  }
}

TEST(SupGap, BoxCornersAreExactForBilinear) {
  auto box = make_box_game(2, 2);
  Rng rng(3);
  for (int q = 0; q < 50; ++q) {
    const auto z = rbpda::testing::random_point(*box, rng);
    // brute force over all 16 x 16 corner pairs
    double best_hi = -1e300, best_lo = 1e300;
    for (int mask = 0; mask < 16; ++mask) {
      auto x = z.x, y = z.y;
      for (int c = 0; c < 4; ++c) {
        x[c] = (mask >> c) & 1;
        y[c] = (mask >> c) & 1;
      }
      best_hi = std::max(best_hi, *box->lagrangian(z.x, y));
      best_lo = std::min(best_lo, *box->lagrangian(x, z.y));
    }
    EXPECT_NEAR(*sup_gap(*box, z), best_hi - best_lo, 1e-12);
  }
}

TEST(SupGap, DominatesSingleCandidateAndIsMonotone) {
  auto game = diag12();
  Rng rng(4);
  for (int q = 0; q < 100; ++q) {
    const auto z = rbpda::testing::random_point(game, rng);
    const auto c1 = rbpda::testing::random_point(game, rng);
    const auto c2 = rbpda::testing::random_point(game, rng);
    const double one = *sup_gap(game, z, std::vector<SaddlePoint>{c1});
    const double two = *sup_gap(game, z, std::vector<SaddlePoint>{c1, c2});
    EXPECT_GE(one, *lagrangian_gap(game, z, c1) - 1e-12);
    EXPECT_GE(two, one - 1e-15);
  }
}

TEST(ConstrainedMetrics, OneDimensionalQp) {
  // min x^2 s.t. x >= 1, as Q = 2, c = 0, G = -1, d = -1
  ConstrainedSpec spec;
  spec.Q = Eigen::MatrixXd::Constant(1, 1, 2.0);
  spec.c = Eigen::VectorXd::Zero(1);
  spec.G = Eigen::MatrixXd::Constant(1, 1, -1.0);
  spec.d = Eigen::VectorXd::Constant(1, -1.0);
  ConstrainedQpProblem qp(spec);
  const std::vector<std::size_t> one{1};
  auto at = [&](double v) { return constrained_metrics(qp, BlockVector(one, v), 1.0); };
  EXPECT_NEAR(at(1.0).suboptimality, 0.0, 1e-15);
  EXPECT_EQ(at(1.0).infeasibility, 0.0);
  EXPECT_NEAR(at(2.0).suboptimality, 3.0, 1e-15);
  EXPECT_EQ(at(2.0).infeasibility, 0.0);
  EXPECT_NEAR(at(0.0).suboptimality, 1.0, 1e-15);
  EXPECT_NEAR(at(0.0).infeasibility, 1.0, 1e-15);
}

TEST(FitRate, ExactPowerLaw) {
  std::vector<std::pair<double, double>> pts;
  for (int q = 0; q <= 40; ++q) {
    const double k = std::pow(10.0, 2.0 + q / 20.0);
    pts.emplace_back(k, 1.0 / k);
  }
  const auto fit = fit_rate(pts, 100, 10000);
  ASSERT_TRUE(fit.available);
  EXPECT_NEAR(fit.slope, -1.0, 1e-6);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-9);
}

TEST(FitRate, LogOverK) {
  std::vector<std::pair<double, double>> pts;
  for (int q = 0; q <= 40; ++q) {
    const double k = std::pow(10.0, 2.0 + q / 20.0);
    pts.emplace_back(k, std::log(k) / k);
  }
  const auto fit = fit_rate(pts, 100, 10000);
  EXPECT_GE(fit.slope, -1.0);
  EXPECT_LE(fit.slope, -0.85);
}

TEST(FitRate, ConstantAndScaleInvariance) {
  std::vector<std::pair<double, double>> flat, a, b;
  Rng rng(5);
  for (int q = 1; q <= 30; ++q) {
    flat.emplace_back(q, 0.7);
    const double g = std::exp(rng.normal()) / q;
    a.emplace_back(q, g);
    b.emplace_back(q, 13.5 * g);
  }
  EXPECT_NEAR(fit_rate(flat, 1, 30).slope, 0.0, 1e-12);
  EXPECT_NEAR(fit_rate(a, 1, 30).slope, fit_rate(b, 1, 30).slope, 1e-12);
}

TEST(FitRate, DropsNonpositiveAndNeedsFivePoints) {
  std::vector<std::pair<double, double>> pts{{1, 1}, {2, 0.5}, {3, 0.0}, {4, -1}, {5, 0.2}, {6, 0.1}};
  EXPECT_FALSE(fit_rate(pts, 1, 6).available);
  pts.emplace_back(7, 0.05);
  const auto fit = fit_rate(pts, 1, 7);
  EXPECT_TRUE(fit.available);
  EXPECT_EQ(fit.points, 5u);
}

TEST(Trace, RejectsNonMonotoneRows) {
  ConvergenceTrace t;
  t.append({0, 0, 1.0, {}, {}, {}, {}});
  EXPECT_THROW(t.append({0, 5, 1.0, {}, {}, {}, {}}), std::invalid_argument);
  t.append({3, 0, 1.0, {}, {}, {}, {}});  // equal budget is fine
  t.append({4, 10, 1.0, {}, {}, {}, {}});
  EXPECT_THROW(t.append({5, 9, 1.0, {}, {}, {}, {}}), std::invalid_argument);
  EXPECT_EQ(t.rows().size(), 3u);
}

TEST(Trace, CsvRoundTripIsExact) {
  ConvergenceTrace t;
  Rng rng(6);
  std::uint64_t budget = 0;
  for (std::size_t k = 0; k < 30; k += 3) {
    budget += rng.below(100);
    TraceRow row{k, budget, rng.normal() / 3.0, {}, std::exp(rng.normal()), {}, {}};
    if (k % 2) row.sup_gap = 1.0 / 3.0 + k;
    t.append(row);
  }
  std::stringstream ss;
  t.write_csv(ss);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "k,grad_budget,gap_ref,sup_gap,dist_ref,subopt,infeas");
  const auto back = ConvergenceTrace::read_csv(ss);
  ASSERT_EQ(back.rows().size(), t.rows().size());
  for (std::size_t r = 0; r < t.rows().size(); ++r) {
    EXPECT_EQ(back.rows()[r].k, t.rows()[r].k);
    EXPECT_EQ(back.rows()[r].grad_budget, t.rows()[r].grad_budget);
    EXPECT_EQ(back.rows()[r].gap_ref, t.rows()[r].gap_ref);
    EXPECT_EQ(back.rows()[r].sup_gap, t.rows()[r].sup_gap);
    EXPECT_EQ(back.rows()[r].subopt, t.rows()[r].subopt);
  }
}

TEST(Distance, EuclideanOverBothSides) {
  const auto a = simplex_point({1, 0}, {0, 1});
  const auto b = simplex_point({0, 1}, {0, 1});
  EXPECT_DOUBLE_EQ(distance(a, b), std::sqrt(2.0));
}

TEST(ComponentSpread, ZeroForSingleComponent) {
  auto game = diag12();
  EXPECT_EQ(measure_component_spread(game), 0.0);
  auto data = rbpda::testing::small_erm_data(1, 20, 4);
  RobustErmProblem erm(data, {});
  EXPECT_GT(measure_component_spread(erm), 0.0);
}

TEST(EvaluateCheckpoint, FillsConfiguredColumns) {
  auto game = diag12();
  MetricOptions opts;
  opts.reference = game.reference_point();
  const auto z = game.initial_point();
  const auto row = evaluate_checkpoint(game, z, 4, 12, opts);
  EXPECT_EQ(row.k, 4u);
  EXPECT_EQ(row.grad_budget, 12u);
  ASSERT_TRUE(row.gap_ref && row.sup_gap && row.dist_ref);
  EXPECT_GE(*row.sup_gap, *row.gap_ref - 1e-15);
  EXPECT_FALSE(row.subopt.has_value());
}
