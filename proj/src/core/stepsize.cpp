#include "stepsize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rbpda {

AggregateConstants aggregate_constants(const BlockLipschitz& lip, std::size_t M, std::size_t N) {
  const auto msg = lip.check(M, N);
  if (!msg.empty()) throw std::invalid_argument("aggregate_constants: " + msg);
  const double m = static_cast<double>(M);
  const double n = static_cast<double>(N);
  AggregateConstants agg;
  agg.L_y_x = (lip.yx.array().square().colwise().sum() / n).sqrt().transpose();
  agg.C_x = (lip.xx.array().square().colwise().sum() / m).sqrt().transpose();
  agg.L_x_y = (lip.xy.array().square().colwise().sum() / m).sqrt().transpose();
  agg.C_y = (lip.yy.array().square().colwise().sum() / n).sqrt().transpose();
  agg.Lxx_diag = lip.xx.diagonal();
  agg.Lyy_diag = lip.yy.diagonal();
  return agg;
}

void FreeParams::validate(std::size_t M, std::size_t N, bool almost_sure_mode) const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(gamma1) || !positive(gamma2) || !positive(lambda1) || !positive(lambda2))
    throw std::invalid_argument("free parameters gamma/lambda must be positive and finite");
  if (alpha.size() != M) throw std::invalid_argument("alpha must have one entry per primal block");
  if (!beta.empty() && beta.size() != N)
    throw std::invalid_argument("beta must have one entry per dual block");
  for (double a : alpha)
    if (!positive(a)) throw std::invalid_argument("alpha entries must be positive");
  for (double b : beta)
    if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("beta entries must be >= 0");
  if (!(delta_bar >= 0.0) || !std::isfinite(delta_bar))
    throw std::invalid_argument("delta_bar must be >= 0");
  if (almost_sure_mode && !(delta_bar > 0.0))
    throw std::invalid_argument("almost-sure mode requires delta_bar > 0");
}

FreeParams default_free_params(const AggregateConstants& agg, std::size_t M, std::size_t N,
                               ScheduleMode mode) {
  const double m = static_cast<double>(M);
  const double n = static_cast<double>(N);
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 1.0; };
  FreeParams fp;
  fp.gamma1 = ratio(m, agg.C_x.sum());
  fp.lambda1 = ratio(n, agg.C_y.sum());
  fp.gamma2 = ratio(n, agg.L_x_y.sum());
  fp.lambda2 = ratio(m, agg.L_y_x.sum());
  if (mode == ScheduleMode::ConstantThm1) {
    fp.alpha.assign(M, m * n);
    fp.beta.assign(N, 0.0);
  } else {
    fp.alpha.assign(M, n);
    fp.beta.resize(N);
    for (std::size_t j = 0; j < N; ++j) {
      const double lxy = agg.L_x_y(static_cast<Eigen::Index>(j));
      fp.beta[j] = 1.0 + (fp.gamma2 / m) * lxy * lxy;
    }
  }
  return fp;
}

StepPair constant_stepsizes(const AggregateConstants& agg, const FreeParams& fp, std::size_t M,
                            std::size_t N) {
  fp.validate(M, N);
  const double m = static_cast<double>(M);
  const double n = static_cast<double>(N);
  StepPair steps;
  steps.tau.resize(M);
  steps.sigma.resize(N);
  for (std::size_t i = 0; i < M; ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    const double cx = agg.C_x(e);
    const double lyx = agg.L_y_x(e);
    const double denom = agg.Lxx_diag(e) + (n - 1.0) * (1.0 / fp.gamma1 + fp.gamma1 * cx * cx) +
                         ((m + 1.0) / m) * (n - 1.0) / fp.gamma2 + n * fp.lambda2 * lyx * lyx +
                         (fp.alpha[i] + fp.delta_bar) / m;
    if (!(denom > 0.0) || !std::isfinite(denom))
      throw std::invalid_argument("constant_stepsizes: non-finite primal denominator");
    steps.tau[i] = 1.0 / (m * denom);
  }
  for (std::size_t j = 0; j < N; ++j) {
    const auto e = static_cast<Eigen::Index>(j);
    const double cy = agg.C_y(e);
    const double lxy = agg.L_x_y(e);
    const double denom = agg.Lyy_diag(e) + m * (1.0 / fp.lambda1 + 1.0 / fp.lambda2) +
                         m * fp.lambda1 * cy * cy + ((n - 1.0) / n) * (m + 1.0) * fp.gamma2 * lxy * lxy +
                         fp.delta_bar / n;
    if (!(denom > 0.0) || !std::isfinite(denom))
      throw std::invalid_argument("constant_stepsizes: non-finite dual denominator");
    steps.sigma[j] = 1.0 / (n * denom);
  }
  return steps;
}

double schedule_t(double eta, std::size_t k) {
  if (k == 0) return 1.0;
  return std::pow(1.0 / static_cast<double>(k + 1), 0.5 * (1.0 + eta));
}

double schedule_theta(double eta, std::size_t k) {
  if (k == 0) return 1.0;
  const double kk = static_cast<double>(k);
  return std::pow((kk + 1.0) / kk, 0.5 * (1.0 + eta));
}

namespace {

// Denominators of the diminishing-regime formulas (before the 1/M, 1/N factor).
double diminishing_tau_denom(const AggregateConstants& agg, const FreeParams& fp, double m,
                             double n, std::size_t i, double theta, double t) {
  const auto e = static_cast<Eigen::Index>(i);
  const double cx = agg.C_x(e);
  const double lyx = agg.L_y_x(e);
  return agg.Lxx_diag(e) + (n - 1.0) * theta * (1.0 / fp.gamma1 + 1.0 / fp.gamma2) +
         n * fp.lambda2 * lyx * lyx + fp.gamma1 * (n - 1.0) * cx * cx + ((n - 1.0) / m) / fp.gamma2 +
         ((fp.alpha.at(i) + fp.delta_bar) / m) / t;
}

double diminishing_sigma_denom(const AggregateConstants& agg, const FreeParams& fp, double m,
                               double n, std::size_t j, double theta, double t) {
  const auto e = static_cast<Eigen::Index>(j);
  const double cy = agg.C_y(e);
  const double lxy = agg.L_x_y(e);
  return agg.Lyy_diag(e) + m * theta * (1.0 / fp.lambda1 + 1.0 / fp.lambda2) +
         m * fp.lambda1 * cy * cy + (m + 1.0) * ((n - 1.0) / n) * fp.gamma2 * lxy * lxy +
         ((fp.beta.at(j) + fp.delta_bar) / n) / t;
}

}  // namespace

StepValues diminishing_stepsizes(const AggregateConstants& agg, const FreeParams& fp, std::size_t M,
                                 std::size_t N, double eta, std::size_t k) {
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0, 1)");
  fp.validate(M, N);
  if (fp.beta.size() != N) throw std::invalid_argument("diminishing steps need beta per dual block");
  const double m = static_cast<double>(M);
  const double n = static_cast<double>(N);
  StepValues v;
  v.t = schedule_t(eta, k);
  v.theta = schedule_theta(eta, k);
  v.tau.resize(M);
  v.sigma.resize(N);
  for (std::size_t i = 0; i < M; ++i)
    v.tau[i] = 1.0 / (m * diminishing_tau_denom(agg, fp, m, n, i, v.theta, v.t));
  for (std::size_t j = 0; j < N; ++j)
    v.sigma[j] = 1.0 / (n * diminishing_sigma_denom(agg, fp, m, n, j, v.theta, v.t));
  return v;
}

// ---------------------------------------------------------------------------
// StepSchedule

StepSchedule StepSchedule::constant(const AggregateConstants& agg, const FreeParams& fp,
                                    std::size_t M, std::size_t N, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("step scale must lie in (0, 1]");
  auto steps = constant_stepsizes(agg, fp, M, N);
  for (double& v : steps.tau) v *= scale;
  for (double& v : steps.sigma) v *= scale;
  auto s = constant_explicit(std::move(steps.tau), std::move(steps.sigma));
  s.scale_ = scale;
  return s;
}

StepSchedule StepSchedule::constant_explicit(std::vector<double> tau, std::vector<double> sigma) {
  if (tau.empty() || sigma.empty()) throw std::invalid_argument("empty step-size vector");
  for (double v : tau)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("tau must be positive");
  for (double v : sigma)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("sigma must be positive");
  StepSchedule s;
  s.mode_ = ScheduleMode::ConstantThm1;
  s.M_ = tau.size();
  s.N_ = sigma.size();
  s.tau_ = std::move(tau);
  s.sigma_ = std::move(sigma);
  return s;
}

StepSchedule StepSchedule::diminishing(const AggregateConstants& agg, const FreeParams& fp,
                                       std::size_t M, std::size_t N, double eta, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("step scale must lie in (0, 1]");
  // evaluating k = 0 runs every argument check once
  (void)diminishing_stepsizes(agg, fp, M, N, eta, 0);
  StepSchedule s;
  s.mode_ = ScheduleMode::DiminishingThm2;
  s.eta_ = eta;
  s.scale_ = scale;
  s.M_ = M;
  s.N_ = N;
  s.agg_ = agg;
  s.fp_ = fp;
  return s;
}

double StepSchedule::tau(std::size_t i, std::size_t k) const {
  if (mode_ == ScheduleMode::ConstantThm1) return tau_.at(i);
  const double m = static_cast<double>(M_);
  return scale_ / (m * diminishing_tau_denom(agg_, fp_, m, static_cast<double>(N_), i, theta(k), t(k)));
}

double StepSchedule::sigma(std::size_t j, std::size_t k) const {
  if (mode_ == ScheduleMode::ConstantThm1) return sigma_.at(j);
  const double n = static_cast<double>(N_);
  return scale_ / (n * diminishing_sigma_denom(agg_, fp_, static_cast<double>(M_), n, j, theta(k), t(k)));
}

double StepSchedule::theta(std::size_t k) const {
  return mode_ == ScheduleMode::ConstantThm1 ? 1.0 : schedule_theta(eta_, k);
}

double StepSchedule::t(std::size_t k) const {
  return mode_ == ScheduleMode::ConstantThm1 ? 1.0 : schedule_t(eta_, k);
}

double StepSchedule::T(std::size_t K) const {
  if (mode_ == ScheduleMode::ConstantThm1) return static_cast<double>(K);
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) sum += t(k);
  return sum;
}

// ---------------------------------------------------------------------------
// step-size condition

double StepConditionRow::min_slack() const {
  return std::min({primal_lipschitz, dual_lipschitz, primal_metric, dual_metric, momentum, psd});
}

StepConditionReport validate_stepsize_condition(const StepSchedule& schedule,
                                                const AggregateConstants& agg,
                                                const FreeParams& fp, std::size_t M, std::size_t N,
                                                std::size_t k_max) {
  const double m = static_cast<double>(M);
  const double n = static_cast<double>(N);
  const double inf = std::numeric_limits<double>::infinity();
  auto beta = [&](std::size_t j) { return fp.beta.empty() ? 0.0 : fp.beta[j]; };

  auto M1 = [&](std::size_t i, std::size_t k) {
    const auto e = static_cast<Eigen::Index>(i);
    return m * schedule.theta(k) *
           (fp.lambda2 * n * agg.L_y_x(e) * agg.L_y_x(e) + (n - 1.0) * fp.gamma1 * agg.C_x(e) * agg.C_x(e));
  };
  auto M2 = [&](std::size_t j, std::size_t k) {
    const auto e = static_cast<Eigen::Index>(j);
    return m * schedule.theta(k) *
           (fp.gamma2 * (n - 1.0) * agg.L_x_y(e) * agg.L_x_y(e) + fp.lambda1 * n * agg.C_y(e) * agg.C_y(e));
  };
  auto M3 = [&](std::size_t i, std::size_t k) {
    const auto e = static_cast<Eigen::Index>(i);
    return 1.0 / schedule.tau(i, k) - m * agg.Lxx_diag(e) -
           m * (n - 1.0) * schedule.theta(k) * (1.0 / fp.gamma1 + 1.0 / fp.gamma2) -
           (n - 1.0) / fp.gamma2;
  };
  auto M4 = [&](std::size_t j, std::size_t k) {
    const auto e = static_cast<Eigen::Index>(j);
    return 1.0 / schedule.sigma(j, k) - n * agg.Lyy_diag(e) -
           m * n * schedule.theta(k) * (1.0 / fp.lambda1 + 1.0 / fp.lambda2) -
           fp.gamma2 * (n - 1.0) * agg.L_x_y(e) * agg.L_x_y(e);
  };

  StepConditionReport report;
  report.min_slack = inf;
  const char* names[] = {"primal_lipschitz", "dual_lipschitz", "primal_metric", "dual_metric",
                         "momentum", "psd"};
  for (std::size_t k = 0; k <= k_max; ++k) {
    const double tk = schedule.t(k);
    const double tk1 = schedule.t(k + 1);
    StepConditionRow row;
    row.k = k;
    row.primal_lipschitz = row.dual_lipschitz = row.primal_metric = row.dual_metric = inf;
    row.psd = inf;
    for (std::size_t i = 0; i < M; ++i) {
      const double a = fp.alpha[i] / tk;
      row.primal_lipschitz = std::min(row.primal_lipschitz, tk * (M3(i, k) - a) - tk1 * M1(i, k + 1));
      row.primal_metric =
          std::min(row.primal_metric, tk / schedule.tau(i, k) - tk1 / schedule.tau(i, k + 1));
      row.psd = std::min({row.psd, M1(i, k), M3(i, k)});
    }
    for (std::size_t j = 0; j < N; ++j) {
      const double b = beta(j) / tk;
      row.dual_lipschitz = std::min(row.dual_lipschitz, tk * (M4(j, k) - b) - tk1 * M2(j, k + 1));
      row.dual_metric =
          std::min(row.dual_metric, tk / schedule.sigma(j, k) - tk1 / schedule.sigma(j, k + 1));
      row.psd = std::min({row.psd, M2(j, k), M4(j, k)});
    }
    row.momentum = -std::abs(tk - tk1 * schedule.theta(k + 1));

    const double values[] = {row.primal_lipschitz, row.dual_lipschitz, row.primal_metric,
                             row.dual_metric, row.momentum, row.psd};
    for (int q = 0; q < 6; ++q) {
      if (values[q] < report.min_slack) {
        report.min_slack = values[q];
        std::ostringstream what;
        what << names[q] << " at k=" << k;
        report.worst = what.str();
      }
    }
    report.rows.push_back(row);
  }
  report.pass = report.min_slack >= -kStepConditionTolerance;
  return report;
}

}  // namespace rbpda
