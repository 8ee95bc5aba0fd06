#include "bregman.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace rbpda {

double bregman_distance(const BregmanGeometry& geom, std::span<const double> x,
                        std::span<const double> x_bar) {
  if (x.size() != x_bar.size()) throw std::invalid_argument("bregman_distance: dimension mismatch");
  double d = 0.0;
  if (geom.kind == BregmanKind::Euclidean) {
    for (std::size_t c = 0; c < x.size(); ++c) d += (x[c] - x_bar[c]) * (x[c] - x_bar[c]);
    return 0.5 * d;
  }
  for (std::size_t c = 0; c < x.size(); ++c) {
    if (!(x_bar[c] >= geom.epsilon_floor))
      throw DomainError("bregman_distance: reference point on the entropy boundary");
    if (x[c] < 0.0) throw DomainError("bregman_distance: negative coordinate under entropy");
    if (x[c] > 0.0) d += x[c] * std::log(x[c] / x_bar[c]);
    d += x_bar[c] - x[c];
  }
  return std::max(d, 0.0);
}

double block_norm(BregmanKind kind, std::span<const double> v) {
  double s = 0.0;
  if (kind == BregmanKind::NegativeEntropy) {
    for (double a : v) s += std::abs(a);
    return s;
  }
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

void project_simplex(std::span<double> v) {
  const std::size_t n = v.size();
  if (n == 0) return;
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) threshold = candidate;
  }
  for (double& a : v) a = std::max(a - threshold, 0.0);
}

void prox_step(const BregmanGeometry& geom, const ProxSpec& spec, std::span<const double> linear,
               double step, std::span<const double> x_bar, std::span<double> out) {
  const std::size_t n = x_bar.size();
  if (linear.size() != n || out.size() != n)
    throw std::invalid_argument("prox_step: dimension mismatch");
  if (!(step > 0.0) || !std::isfinite(step))
    throw std::invalid_argument("prox_step: step must be positive and finite");
  for (double r : linear)
    if (!std::isfinite(r)) throw std::invalid_argument("prox_step: non-finite linear term");

  if (geom.kind == BregmanKind::NegativeEntropy) {
    if (spec.kind != ProxKind::Simplex)
      throw std::invalid_argument("prox_step: entropy geometry is only defined on simplex blocks");
    // log-domain multiplicative update; shifting by the max keeps exp() finite
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      out[c] = std::log(std::max(x_bar[c], geom.epsilon_floor)) - step * linear[c];
      shift = std::max(shift, out[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      out[c] = std::max(std::exp(out[c] - shift), geom.epsilon_floor);
      sum += out[c];
    }
    for (std::size_t c = 0; c < n; ++c) out[c] /= sum;
    return;
  }

  for (std::size_t c = 0; c < n; ++c) out[c] = x_bar[c] - step * linear[c];
  switch (spec.kind) {
    case ProxKind::Zero:
      break;
    case ProxKind::Box:
      for (std::size_t c = 0; c < n; ++c) out[c] = std::clamp(out[c], spec.lower[c], spec.upper[c]);
      break;
    case ProxKind::NonnegativeOrthant:
      for (std::size_t c = 0; c < n; ++c) out[c] = std::max(out[c], 0.0);
      break;
    case ProxKind::ScaledL1: {
      const double shrink = step * spec.weight;
      for (std::size_t c = 0; c < n; ++c)
        out[c] = std::copysign(std::max(std::abs(out[c]) - shrink, 0.0), out[c]);
      break;
    }
    case ProxKind::Simplex:
      project_simplex(out);
      break;
  }
}

std::vector<double> prox_step(const BregmanGeometry& geom, const ProxSpec& spec,
                              std::span<const double> linear, double step,
                              std::span<const double> x_bar) {
  std::vector<double> out(x_bar.size());
  prox_step(geom, spec, linear, step, x_bar, out);
  return out;
}

}  // namespace rbpda
