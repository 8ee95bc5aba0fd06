#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "core_types.hpp"
#include "rng.hpp"

namespace rbpda {

/// Per-primal-block selection counts I_i^k. Sum over blocks equals the number
/// of iterations since the last reset.
struct BlockCounters {
  std::vector<std::uint64_t> selections;

  explicit BlockCounters(std::size_t M = 0) : selections(M, 0) {}
  std::uint64_t total() const;
  void reset() { std::fill(selections.begin(), selections.end(), 0); }
};

class BatchSchedule {
 public:
  enum class Kind { Increasing, Constant };

  /// v = min(p, ceil((I+1)(k+1)^eta)), optionally capped at ceil(fraction * p).
  static BatchSchedule increasing(double eta, std::optional<double> saturation_fraction = {});
  /// Fixed batch v; throws std::invalid_argument unless 1 <= v <= p.
  static BatchSchedule constant(std::size_t v, std::size_t p);

  Kind kind() const { return kind_; }
  double eta() const { return eta_; }
  std::optional<double> saturation_fraction() const { return saturation_; }
  std::size_t constant_size() const { return v_; }

  /// Batch size block `block` would get at iteration k, without side effects.
  std::size_t peek(const BlockCounters& counters, std::size_t block, std::size_t k,
                   std::size_t p) const;

 private:
  Kind kind_ = Kind::Increasing;
  double eta_ = 0.0;
  std::optional<double> saturation_;
  std::size_t v_ = 1;
};

std::size_t draw_block(Rng& rng, std::size_t count);

/// Batch size for block i_k at iteration k; increments I[i_k] afterwards.
std::size_t next_batch_size(const BatchSchedule& schedule, BlockCounters& counters,
                            std::size_t i_k, std::size_t k, std::size_t p);

/// v i.i.d. uniform component ids in {0..p-1} (with replacement).
std::vector<std::size_t> sample_indices(Rng& rng, std::size_t v, std::size_t p);

struct GradientEstimate {
  std::vector<double> value;
  std::size_t sample_count = 0;
  std::size_t components_evaluated = 0;
};

/// Mean over `indices` of component_grad_x(l, i, x, y). The M and momentum
/// scalings of the primal update are applied by the caller.
GradientEstimate estimate_partial_grad_x(const SaddleProblem& problem,
                                         std::span<const std::size_t> indices, std::size_t i,
                                         const BlockVector& x, const BlockVector& y);

struct InverseBatchExpectation {
  double exact = 0.0;  // E[(I+1)^{-1}] (k+1)^{-eta}, I ~ Binomial(k, 1/M)
  double bound = 0.0;  // M / (k+1)^{1+eta}
};

InverseBatchExpectation expected_inverse_batch(std::size_t M, std::size_t k, double eta);

}  // namespace rbpda
