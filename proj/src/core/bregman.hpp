#pragma once

// Bregman distances and the block proximal step
//
//   x+ = argmin_x  g(x) + <r, x> + (1/t) D(x, x_bar)
//
// for the supported (geometry, ProxSpec) pairs. Closed forms:
//   Euclidean + Zero        x_bar - t r
//   Euclidean + Box         clip(x_bar - t r)
//   Euclidean + Nonnegative max(x_bar - t r, 0)
//   Euclidean + ScaledL1    soft-threshold(x_bar - t r, t w)
//   Euclidean + Simplex     sort-based projection of x_bar - t r
//   Entropy   + Simplex     x_bar * exp(-t r), normalized

#include <span>
#include <vector>

#include "core_types.hpp"

namespace rbpda {

struct BregmanGeometry {
  BregmanKind kind = BregmanKind::Euclidean;
  double epsilon_floor = 1e-30;
};

/// D(x, x_bar). NegativeEntropy uses the generalized KL divergence, which is
/// the usual KL on the simplex. Throws DomainError when x_bar has a coordinate
/// below epsilon_floor under entropy geometry.
double bregman_distance(const BregmanGeometry& geom, std::span<const double> x,
                        std::span<const double> x_bar);

/// Block norm matched to the geometry: l1 under entropy, l2 otherwise.
double block_norm(BregmanKind kind, std::span<const double> v);

/// Exact minimizer written into `out` (may alias nothing). Throws
/// std::invalid_argument on non-finite `linear`, a non-positive step, or an
/// unsupported geometry/spec pair.
void prox_step(const BregmanGeometry& geom, const ProxSpec& spec, std::span<const double> linear,
               double step, std::span<const double> x_bar, std::span<double> out);

std::vector<double> prox_step(const BregmanGeometry& geom, const ProxSpec& spec,
                              std::span<const double> linear, double step,
                              std::span<const double> x_bar);

/// Euclidean projection onto the unit simplex (in place).
void project_simplex(std::span<double> v);

inline BregmanGeometry geometry_of(const ProxSpec& spec) { return {spec.geometry, 1e-30}; }

}  // namespace rbpda
