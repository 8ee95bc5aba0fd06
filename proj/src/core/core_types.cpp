#include "core_types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rng.hpp"

namespace rbpda {

const char* to_string(BregmanKind kind) {
  switch (kind) {
    case BregmanKind::Euclidean: return "euclidean";
    case BregmanKind::NegativeEntropy: return "entropy";
  }
  return "?";
}

const char* to_string(ProxKind kind) {
  switch (kind) {
    case ProxKind::Zero: return "zero";
    case ProxKind::Box: return "box";
    case ProxKind::Simplex: return "simplex";
    case ProxKind::NonnegativeOrthant: return "nonnegative";
    case ProxKind::ScaledL1: return "scaled_l1";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ProxSpec

ProxSpec ProxSpec::zero() { return {}; }

ProxSpec ProxSpec::box(std::vector<double> lower, std::vector<double> upper) {
  ProxSpec spec;
  spec.kind = ProxKind::Box;
  spec.lower = std::move(lower);
  spec.upper = std::move(upper);
  return spec;
}

ProxSpec ProxSpec::uniform_box(std::size_t dim, double lower, double upper) {
  return box(std::vector<double>(dim, lower), std::vector<double>(dim, upper));
}

ProxSpec ProxSpec::simplex(BregmanKind geometry) {
  ProxSpec spec;
  spec.kind = ProxKind::Simplex;
  spec.geometry = geometry;
  return spec;
}

ProxSpec ProxSpec::nonnegative() {
  ProxSpec spec;
  spec.kind = ProxKind::NonnegativeOrthant;
  return spec;
}

ProxSpec ProxSpec::scaled_l1(double weight) {
  ProxSpec spec;
  spec.kind = ProxKind::ScaledL1;
  spec.weight = weight;
  return spec;
}

bool ProxSpec::contains(std::span<const double> x, double slack) const {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  switch (kind) {
    case ProxKind::Zero:
    case ProxKind::ScaledL1:
      return true;
    case ProxKind::NonnegativeOrthant:
      return std::all_of(x.begin(), x.end(), [slack](double v) { return v >= -slack; });
    case ProxKind::Box:
      if (lower.size() != x.size() || upper.size() != x.size()) return false;
      for (std::size_t c = 0; c < x.size(); ++c)
        if (x[c] < lower[c] - slack || x[c] > upper[c] + slack) return false;
      return true;
    case ProxKind::Simplex: {
      double sum = 0.0;
      for (double v : x) {
        if (v < -slack) return false;
        sum += v;
      }
      return std::abs(sum - 1.0) <= slack * std::max<double>(1.0, static_cast<double>(x.size()));
    }
  }
  return false;
}

double ProxSpec::value(std::span<const double> x) const {
  if (kind == ProxKind::ScaledL1) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return weight * s;
  }
  return contains(x) ? 0.0 : std::numeric_limits<double>::infinity();
}

std::string ProxSpec::check(std::size_t dim) const {
  std::ostringstream msg;
  if (geometry == BregmanKind::NegativeEntropy && kind != ProxKind::Simplex)
    msg << "entropy geometry requires a simplex block; ";
  switch (kind) {
    case ProxKind::Box:
      if (lower.size() != dim || upper.size() != dim) {
        msg << "box bounds have length " << lower.size() << "/" << upper.size() << ", block has "
            << dim << "; ";
        break;
      }
      for (std::size_t c = 0; c < dim; ++c) {
        if (!std::isfinite(lower[c]) || !std::isfinite(upper[c])) {
          msg << "box bound " << c << " is not finite; ";
        } else if (!(lower[c] < upper[c])) {
          msg << "box coordinate " << c << " has empty interior [" << lower[c] << ", " << upper[c]
              << "]; ";
        }
      }
      break;
    case ProxKind::Simplex:
      if (dim < 1) msg << "simplex block must be nonempty; ";
      break;
    case ProxKind::ScaledL1:
      if (!(weight >= 0.0) || !std::isfinite(weight)) msg << "l1 weight must be finite and >= 0; ";
      break;
    default:
      break;
  }
  return msg.str();
}

// ---------------------------------------------------------------------------
// BlockStructure / BlockVector

std::size_t BlockStructure::primal_dim() const {
  return std::accumulate(primal_blocks.begin(), primal_blocks.end(), std::size_t{0});
}

std::size_t BlockStructure::dual_dim() const {
  return std::accumulate(dual_blocks.begin(), dual_blocks.end(), std::size_t{0});
}

void BlockStructure::validate() const {
  if (primal_blocks.empty()) throw std::invalid_argument("at least one primal block is required");
  if (dual_blocks.empty()) throw std::invalid_argument("at least one dual block is required");
  for (auto d : primal_blocks)
    if (d == 0) throw std::invalid_argument("primal block of dimension 0");
  for (auto d : dual_blocks)
    if (d == 0) throw std::invalid_argument("dual block of dimension 0");
}

std::vector<std::size_t> BlockStructure::even_split(std::size_t dim, std::size_t blocks) {
  if (blocks == 0 || dim % blocks != 0) {
    std::ostringstream msg;
    msg << blocks << " blocks do not divide dimension " << dim;
    throw std::invalid_argument(msg.str());
  }
  return std::vector<std::size_t>(blocks, dim / blocks);
}

BlockVector::BlockVector(std::span<const std::size_t> block_sizes, double fill) {
  offsets_.resize(block_sizes.size() + 1, 0);
  for (std::size_t b = 0; b < block_sizes.size(); ++b) offsets_[b + 1] = offsets_[b] + block_sizes[b];
  data_.assign(offsets_.back(), fill);
}

BlockVector::BlockVector(std::span<const std::size_t> block_sizes, std::vector<double> data)
    : BlockVector(block_sizes) {
  if (data.size() != data_.size())
    throw std::invalid_argument("block vector data length does not match its block sizes");
  data_ = std::move(data);
}

std::size_t BlockVector::block_dim(std::size_t index) const {
  if (index >= num_blocks()) throw std::out_of_range("block index out of range");
  return offsets_[index + 1] - offsets_[index];
}

std::size_t BlockVector::block_offset(std::size_t index) const {
  if (index >= num_blocks()) throw std::out_of_range("block index out of range");
  return offsets_[index];
}

std::span<double> BlockVector::block(std::size_t index) {
  if (index >= num_blocks()) throw std::out_of_range("block index out of range");
  return std::span<double>(data_).subspan(offsets_[index], offsets_[index + 1] - offsets_[index]);
}

std::span<const double> BlockVector::block(std::size_t index) const {
  if (index >= num_blocks()) throw std::out_of_range("block index out of range");
  return std::span<const double>(data_).subspan(offsets_[index],
                                                offsets_[index + 1] - offsets_[index]);
}

// ---------------------------------------------------------------------------
// BlockLipschitz

BlockLipschitz BlockLipschitz::broadcast(std::size_t M, std::size_t N, double lxx, double lxy,
                                         double lyy, double lyx) {
  const auto m = static_cast<Eigen::Index>(M);
  const auto n = static_cast<Eigen::Index>(N);
  return {Eigen::MatrixXd::Constant(m, m, lxx), Eigen::MatrixXd::Constant(m, n, lxy),
          Eigen::MatrixXd::Constant(n, n, lyy), Eigen::MatrixXd::Constant(n, m, lyx)};
}

std::string BlockLipschitz::check(std::size_t M, std::size_t N) const {
  const auto m = static_cast<Eigen::Index>(M);
  const auto n = static_cast<Eigen::Index>(N);
  std::ostringstream msg;
  auto shape = [&](const Eigen::MatrixXd& a, Eigen::Index r, Eigen::Index c, const char* what) {
    if (a.rows() != r || a.cols() != c) {
      msg << what << " is " << a.rows() << "x" << a.cols() << ", expected " << r << "x" << c << "; ";
      return;
    }
    if (!a.allFinite()) msg << what << " has non-finite entries; ";
    else if ((a.array() < 0.0).any()) msg << what << " has negative entries; ";
  };
  shape(xx, m, m, "Lxx");
  shape(xy, m, n, "Lxy");
  shape(yy, n, n, "Lyy");
  shape(yx, n, m, "Lyx");
  return msg.str();
}

// ---------------------------------------------------------------------------
// SaddleProblem defaults

void SaddleProblem::grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
                           std::span<double> out) const {
  const std::size_t p = num_components();
  std::vector<double> tmp(out.size());
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t l = 0; l < p; ++l) {
    component_grad_x(l, i, x, y, tmp);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += tmp[c];
  }
  for (double& v : out) v /= static_cast<double>(p);
}

void SaddleProblem::grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
                           std::span<double> out) const {
  const std::size_t p = num_components();
  std::vector<double> tmp(out.size());
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t l = 0; l < p; ++l) {
    component_grad_y(l, j, x, y, tmp);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += tmp[c];
  }
  for (double& v : out) v /= static_cast<double>(p);
}

namespace {

void canonical_point(const ProxSpec& spec, std::span<double> out) {
  switch (spec.kind) {
    case ProxKind::Box:
      for (std::size_t c = 0; c < out.size(); ++c)
        out[c] = std::clamp(0.0, spec.lower[c], spec.upper[c]);
      break;
    case ProxKind::Simplex:
      std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
      break;
    default:
      std::fill(out.begin(), out.end(), 0.0);
  }
}

}  // namespace

SaddlePoint SaddleProblem::initial_point() const {
  SaddlePoint z{zero_primal(), zero_dual()};
  for (std::size_t i = 0; i < z.x.num_blocks(); ++i) canonical_point(primal_prox(i), z.x.block(i));
  for (std::size_t j = 0; j < z.y.num_blocks(); ++j) canonical_point(dual_prox(j), z.y.block(j));
  return z;
}

double SaddleProblem::f(const BlockVector& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < x.num_blocks(); ++i) total += primal_prox(i).value(x.block(i));
  return total / static_cast<double>(x.num_blocks());
}

double SaddleProblem::h(const BlockVector& y) const {
  double total = 0.0;
  for (std::size_t j = 0; j < y.num_blocks(); ++j) total += dual_prox(j).value(y.block(j));
  return total / static_cast<double>(y.num_blocks());
}

std::optional<double> SaddleProblem::lagrangian(const BlockVector& x, const BlockVector& y) const {
  auto coupling = phi(x, y);
  if (!coupling) return std::nullopt;
  return f(x) + *coupling - h(y);
}

bool SaddleProblem::primal_feasible(const BlockVector& x) const {
  for (std::size_t i = 0; i < x.num_blocks(); ++i)
    if (!primal_prox(i).contains(x.block(i))) return false;
  return true;
}

bool SaddleProblem::dual_feasible(const BlockVector& y) const {
  for (std::size_t j = 0; j < y.num_blocks(); ++j)
    if (!dual_prox(j).contains(y.block(j))) return false;
  return true;
}

// ---------------------------------------------------------------------------
// validation

void sample_in_domain(const ProxSpec& spec, Rng& rng, std::span<double> out) {
  switch (spec.kind) {
    case ProxKind::Box:
      for (std::size_t c = 0; c < out.size(); ++c)
        out[c] = spec.lower[c] + rng.uniform() * (spec.upper[c] - spec.lower[c]);
      break;
    case ProxKind::Simplex: {
      double sum = 0.0;
      for (double& v : out) {
        v = -std::log(1.0 - rng.uniform());  // exponential spacing -> uniform on the simplex
        sum += v;
      }
      for (double& v : out) v /= sum;
      break;
    }
    case ProxKind::NonnegativeOrthant:
      for (double& v : out) v = std::abs(rng.normal());
      break;
    default:
      for (double& v : out) v = rng.normal();
  }
}

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

}  // namespace

ValidationReport validate_problem(const SaddleProblem& problem, double tolerance,
                                  std::uint64_t seed, std::size_t probes) {
  ValidationReport report;
  auto flag = [&](std::string check, std::string detail) {
    report.issues.push_back({std::move(check), std::move(detail)});
  };
  try {
    const auto& st = problem.structure();
    try {
      st.validate();
    } catch (const std::exception& e) {
      flag("dimensions", e.what());
      return report;
    }
    const std::size_t M = st.num_primal_blocks();
    const std::size_t N = st.num_dual_blocks();
    const std::size_t p = problem.num_components();
    if (p == 0) {
      flag("dimensions", "problem has no coupling components");
      return report;
    }

    bool domains_ok = true;
    for (std::size_t i = 0; i < M; ++i) {
      auto msg = problem.primal_prox(i).check(st.primal_blocks[i]);
      if (!msg.empty()) {
        flag("domain", "primal block " + std::to_string(i) + ": " + msg);
        domains_ok = false;
      }
    }
    for (std::size_t j = 0; j < N; ++j) {
      auto msg = problem.dual_prox(j).check(st.dual_blocks[j]);
      if (!msg.empty()) {
        flag("domain", "dual block " + std::to_string(j) + ": " + msg);
        domains_ok = false;
      }
    }
    auto lip = problem.lipschitz().check(M, N);
    if (!lip.empty()) flag("lipschitz", lip);

    const SaddlePoint start = problem.initial_point();
    if (start.x.size() != st.primal_dim() || start.y.size() != st.dual_dim())
      flag("dimensions", "initial point does not match the block structure");

    if (!domains_ok || p > 10000) return report;

    Rng rng(seed, 0x7a11da7e);
    BlockVector x = problem.zero_primal();
    BlockVector y = problem.zero_dual();
    for (std::size_t probe = 0; probe < probes; ++probe) {
      for (std::size_t i = 0; i < M; ++i) sample_in_domain(problem.primal_prox(i), rng, x.block(i));
      for (std::size_t j = 0; j < N; ++j) sample_in_domain(problem.dual_prox(j), rng, y.block(j));

      for (std::size_t i = 0; i < M; ++i) {
        const std::size_t d = st.primal_blocks[i];
        std::vector<double> full(d), mean(d, 0.0), tmp(d);
        problem.grad_x(i, x, y, full);
        for (std::size_t l = 0; l < p; ++l) {
          problem.component_grad_x(l, i, x, y, tmp);
          for (std::size_t c = 0; c < d; ++c) mean[c] += tmp[c];
        }
        double err = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          mean[c] /= static_cast<double>(p);
          err += (mean[c] - full[c]) * (mean[c] - full[c]);
        }
        if (std::sqrt(err) > tolerance * (1.0 + norm2(full))) {
          flag("finite_sum_grad_x", "block " + std::to_string(i) + " mismatch " +
                                        std::to_string(std::sqrt(err)) + " at probe " +
                                        std::to_string(probe));
        }
      }
      for (std::size_t j = 0; j < N; ++j) {
        const std::size_t d = st.dual_blocks[j];
        std::vector<double> full(d), mean(d, 0.0), tmp(d);
        problem.grad_y(j, x, y, full);
        for (std::size_t l = 0; l < p; ++l) {
          problem.component_grad_y(l, j, x, y, tmp);
          for (std::size_t c = 0; c < d; ++c) mean[c] += tmp[c];
        }
        double err = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          mean[c] /= static_cast<double>(p);
          err += (mean[c] - full[c]) * (mean[c] - full[c]);
        }
        if (std::sqrt(err) > tolerance * (1.0 + norm2(full))) {
          flag("finite_sum_grad_y", "block " + std::to_string(j) + " mismatch " +
                                        std::to_string(std::sqrt(err)) + " at probe " +
                                        std::to_string(probe));
        }
      }
      auto total = problem.phi(x, y);
      if (total) {
        double sum = 0.0;
        bool have_all = true;
        for (std::size_t l = 0; l < p && have_all; ++l) {
          auto part = problem.phi_component(l, x, y);
          if (!part) have_all = false;
          else sum += *part;
        }
        if (have_all && std::abs(sum / static_cast<double>(p) - *total) >
                            tolerance * (1.0 + std::abs(*total)))
          flag("finite_sum_phi", "mean of component values differs from Phi at probe " +
                                     std::to_string(probe));
      }
    }
  } catch (const std::exception& e) {
    flag("exception", e.what());
  }
  return report;
}

}  // namespace rbpda
