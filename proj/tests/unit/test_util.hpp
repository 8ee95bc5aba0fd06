#pragma once

#include <atomic>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "core_types.hpp"
#include "problems.hpp"
#include "rng.hpp"

namespace rbpda::testing {

// Phi(x, y) = x * y on R x R with zero prox terms; p = 1.
class ScalarBilinear final : public SaddleProblem {
 public:
  ScalarBilinear() {
    structure_.primal_blocks = {1};
    structure_.dual_blocks = {1};
    lip_ = BlockLipschitz::broadcast(1, 1, 0.0, 1.0, 0.0, 1.0);
  }
  const BlockStructure& structure() const override { return structure_; }
  std::size_t num_components() const override { return 1; }
  const ProxSpec& primal_prox(std::size_t) const override { return zero_; }
  const ProxSpec& dual_prox(std::size_t) const override { return zero_; }
  const BlockLipschitz& lipschitz() const override { return lip_; }
  std::string name() const override { return "scalar_bilinear"; }
  void component_grad_x(std::size_t, std::size_t, const BlockVector&, const BlockVector& y,
                        std::span<double> out) const override {
    out[0] = y[0];
  }
  void component_grad_y(std::size_t, std::size_t, const BlockVector& x, const BlockVector&,
                        std::span<double> out) const override {
    out[0] = x[0];
  }
  std::optional<double> phi(const BlockVector& x, const BlockVector& y) const override {
    return x[0] * y[0];
  }
  SaddlePoint initial_point() const override {
    return {BlockVector(structure_.primal_blocks, 1.0), BlockVector(structure_.dual_blocks, 1.0)};
  }

 private:
  BlockStructure structure_;
  ProxSpec zero_ = ProxSpec::zero();
  BlockLipschitz lip_;
};

// Phi == 0 with configurable blocks, components and prox terms.
class NullProblem final : public SaddleProblem {
 public:
  NullProblem(std::vector<std::size_t> primal, std::vector<std::size_t> dual, std::size_t p,
              ProxSpec primal_spec = ProxSpec::zero(), ProxSpec dual_spec = ProxSpec::zero())
      : p_(p) {
    structure_.primal_blocks = std::move(primal);
    structure_.dual_blocks = std::move(dual);
    primal_.assign(structure_.num_primal_blocks(), primal_spec);
    dual_.assign(structure_.num_dual_blocks(), dual_spec);
    lip_ = BlockLipschitz::broadcast(structure_.num_primal_blocks(), structure_.num_dual_blocks(),
                                     0.0, 1.0, 0.0, 1.0);
  }
  const BlockStructure& structure() const override { return structure_; }
  std::size_t num_components() const override { return p_; }
  const ProxSpec& primal_prox(std::size_t i) const override { return primal_.at(i); }
  const ProxSpec& dual_prox(std::size_t j) const override { return dual_.at(j); }
  const BlockLipschitz& lipschitz() const override { return lip_; }
  std::string name() const override { return "null"; }
  void component_grad_x(std::size_t, std::size_t, const BlockVector&, const BlockVector&,
                        std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
  }
  void component_grad_y(std::size_t, std::size_t, const BlockVector&, const BlockVector&,
                        std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
  }
  std::optional<double> phi(const BlockVector&, const BlockVector&) const override { return 0.0; }
  std::optional<double> phi_component(std::size_t, const BlockVector&,
                                      const BlockVector&) const override {
    return 0.0;
  }

 private:
  std::size_t p_;
  BlockStructure structure_;
  std::vector<ProxSpec> primal_, dual_;
  BlockLipschitz lip_;
};

// Forwards everything to an inner problem. Subclasses tamper with pieces.
class Forwarding : public SaddleProblem {
 public:
  explicit Forwarding(std::shared_ptr<const SaddleProblem> inner) : inner_(std::move(inner)) {}
  const BlockStructure& structure() const override { return inner_->structure(); }
  std::size_t num_components() const override { return inner_->num_components(); }
  const ProxSpec& primal_prox(std::size_t i) const override { return inner_->primal_prox(i); }
  const ProxSpec& dual_prox(std::size_t j) const override { return inner_->dual_prox(j); }
  const BlockLipschitz& lipschitz() const override { return inner_->lipschitz(); }
  std::string name() const override { return inner_->name(); }
  void component_grad_x(std::size_t l, std::size_t i, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override {
    inner_->component_grad_x(l, i, x, y, out);
  }
  void component_grad_y(std::size_t l, std::size_t j, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override {
    inner_->component_grad_y(l, j, x, y, out);
  }
  void grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
              std::span<double> out) const override {
    inner_->grad_x(i, x, y, out);
  }
  void grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
              std::span<double> out) const override {
    inner_->grad_y(j, x, y, out);
  }
  std::optional<double> phi(const BlockVector& x, const BlockVector& y) const override {
    return inner_->phi(x, y);
  }
  std::optional<double> phi_component(std::size_t l, const BlockVector& x,
                                      const BlockVector& y) const override {
    return inner_->phi_component(l, x, y);
  }
  SaddlePoint initial_point() const override { return inner_->initial_point(); }

 protected:
  std::shared_ptr<const SaddleProblem> inner_;
};

// Counts component primal-gradient calls.
class CountingProblem final : public Forwarding {
 public:
  using Forwarding::Forwarding;
  void component_grad_x(std::size_t l, std::size_t i, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override {
    ++calls_;
    Forwarding::component_grad_x(l, i, x, y, out);
  }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  mutable std::atomic<std::uint64_t> calls_{0};
};

// Component 0 returns its primal gradient scaled by p at block `block`.
class ScaledComponentProblem final : public Forwarding {
 public:
  ScaledComponentProblem(std::shared_ptr<const SaddleProblem> inner, std::size_t block)
      : Forwarding(std::move(inner)), block_(block) {}
  void component_grad_x(std::size_t l, std::size_t i, const BlockVector& x, const BlockVector& y,
                        std::span<double> out) const override {
    Forwarding::component_grad_x(l, i, x, y, out);
    if (l == 0 && i == block_)
      for (double& v : out) v *= static_cast<double>(num_components());
  }

 private:
  std::size_t block_;
};

inline std::shared_ptr<RobustErmDataset> small_erm_data(std::uint64_t seed, std::size_t n,
                                                        std::size_t m, double flip = 0.1) {
  return std::make_shared<RobustErmDataset>(generate_robust_erm(seed, n, m, flip));
}

/// Random point in the domain of every block, entropy blocks kept interior.
inline SaddlePoint random_point(const SaddleProblem& problem, Rng& rng) {
  SaddlePoint z{problem.zero_primal(), problem.zero_dual()};
  for (std::size_t i = 0; i < problem.structure().num_primal_blocks(); ++i)
    sample_in_domain(problem.primal_prox(i), rng, z.x.block(i));
  for (std::size_t j = 0; j < problem.structure().num_dual_blocks(); ++j)
    sample_in_domain(problem.dual_prox(j), rng, z.y.block(j));
  return z;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) d = std::max(d, std::abs(a[c] - b[c]));
  return d;
}

}  // namespace rbpda::testing
