#include "sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rbpda {

std::uint64_t BlockCounters::total() const {
  return std::accumulate(selections.begin(), selections.end(), std::uint64_t{0});
}

BatchSchedule BatchSchedule::increasing(double eta, std::optional<double> saturation_fraction) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("batch eta must be >= 0");
  if (saturation_fraction && !(*saturation_fraction > 0.0 && *saturation_fraction <= 1.0))
    throw std::invalid_argument("saturation fraction must lie in (0, 1]");
  BatchSchedule s;
  s.kind_ = Kind::Increasing;
  s.eta_ = eta;
  s.saturation_ = saturation_fraction;
  return s;
}

BatchSchedule BatchSchedule::constant(std::size_t v, std::size_t p) {
  if (v < 1 || v > p) throw std::invalid_argument("constant batch size must satisfy 1 <= v <= p");
  BatchSchedule s;
  s.kind_ = Kind::Constant;
  s.v_ = v;
  return s;
}

std::size_t BatchSchedule::peek(const BlockCounters& counters, std::size_t block, std::size_t k,
                                std::size_t p) const {
  if (kind_ == Kind::Constant) return v_;
  const double count = static_cast<double>(counters.selections.at(block)) + 1.0;
  const double raw = std::ceil(count * std::pow(static_cast<double>(k) + 1.0, eta_));
  std::size_t v = raw >= static_cast<double>(p) ? p : static_cast<std::size_t>(raw);
  if (saturation_) {
    const auto cap = static_cast<std::size_t>(std::ceil(*saturation_ * static_cast<double>(p)));
    v = std::min(v, std::max<std::size_t>(cap, 1));
  }
  return std::max<std::size_t>(v, 1);
}

std::size_t draw_block(Rng& rng, std::size_t count) {
  return static_cast<std::size_t>(rng.below(count));
}

std::size_t next_batch_size(const BatchSchedule& schedule, BlockCounters& counters,
                            std::size_t i_k, std::size_t k, std::size_t p) {
  const std::size_t v = schedule.peek(counters, i_k, k, p);
  counters.selections.at(i_k) += 1;
  return v;
}

std::vector<std::size_t> sample_indices(Rng& rng, std::size_t v, std::size_t p) {
  std::vector<std::size_t> ids(v);
  for (auto& id : ids) id = static_cast<std::size_t>(rng.below(p));
  return ids;
}

GradientEstimate estimate_partial_grad_x(const SaddleProblem& problem,
                                         std::span<const std::size_t> indices, std::size_t i,
                                         const BlockVector& x, const BlockVector& y) {
  if (indices.empty()) throw std::invalid_argument("estimate_partial_grad_x: no indices");
  const std::size_t dim = x.block_dim(i);
  GradientEstimate est;
  est.value.assign(dim, 0.0);
  std::vector<double> tmp(dim);
  for (std::size_t l : indices) {
    problem.component_grad_x(l, i, x, y, tmp);
    for (std::size_t c = 0; c < dim; ++c) est.value[c] += tmp[c];
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (double& v : est.value) v *= inv;
  est.sample_count = indices.size();
  est.components_evaluated = indices.size();
  return est;
}

InverseBatchExpectation expected_inverse_batch(std::size_t M, std::size_t k, double eta) {
  if (M < 1) throw std::invalid_argument("expected_inverse_batch: M must be >= 1");
  if (!(eta >= 0.0)) throw std::invalid_argument("expected_inverse_batch: eta must be >= 0");
  const double m = static_cast<double>(M);
  const double kp1 = static_cast<double>(k) + 1.0;
  const double decay = std::pow(kp1, -eta);
  // E[(1+X)^{-1}] = (1 - (1-q)^{n+1}) / ((n+1) q) for X ~ Binomial(n, q), q = 1/M
  const double miss = M == 1 ? 0.0 : std::pow(1.0 - 1.0 / m, kp1);
  InverseBatchExpectation out;
  out.exact = (1.0 - miss) * m / kp1 * decay;
  out.bound = m / kp1 * decay;
  return out;
}

}  // namespace rbpda
