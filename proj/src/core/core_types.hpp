#pragma once

// Block-structured vectors and the saddle-point problem interface
//
//   min_x max_y  f(x) + Phi(x, y) - h(y)
//   f = (1/M) sum_i f_i(x_i),  h = (1/N) sum_j h_j(y_j),  Phi = (1/p) sum_l Phi_l
//
// Gradients are supplied per component and per block; every solver in this
// library talks to problems exclusively through SaddleProblem.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rbpda {

/// Absolute slack used for every domain-membership test.
inline constexpr double kDomainSlack = 1e-12;

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BregmanKind { Euclidean, NegativeEntropy };

enum class ProxKind { Zero, Box, Simplex, NonnegativeOrthant, ScaledL1 };

const char* to_string(BregmanKind kind);
const char* to_string(ProxKind kind);

/// Nonsmooth block term f_i / h_j together with the Bregman geometry used by
/// its proximal step.
struct ProxSpec {
  ProxKind kind = ProxKind::Zero;
  std::vector<double> lower;  // Box only
  std::vector<double> upper;  // Box only
  double weight = 0.0;        // ScaledL1 only
  BregmanKind geometry = BregmanKind::Euclidean;

  static ProxSpec zero();
  static ProxSpec box(std::vector<double> lower, std::vector<double> upper);
  static ProxSpec uniform_box(std::size_t dim, double lower, double upper);
  static ProxSpec simplex(BregmanKind geometry = BregmanKind::Euclidean);
  static ProxSpec nonnegative();
  static ProxSpec scaled_l1(double weight);

  /// Value of the block term: 0/+inf for indicators, w*||x||_1 for ScaledL1.
  double value(std::span<const double> x) const;
  bool contains(std::span<const double> x, double slack = kDomainSlack) const;
  /// Empty string when the spec is internally consistent for `dim`.
  std::string check(std::size_t dim) const;
  bool bounded() const { return kind == ProxKind::Box || kind == ProxKind::Simplex; }
};

struct BlockStructure {
  std::vector<std::size_t> primal_blocks;
  std::vector<std::size_t> dual_blocks;

  std::size_t num_primal_blocks() const { return primal_blocks.size(); }
  std::size_t num_dual_blocks() const { return dual_blocks.size(); }
  std::size_t primal_dim() const;
  std::size_t dual_dim() const;
  /// Throws std::invalid_argument when a side is empty or a block has size 0.
  void validate() const;

  /// Splits `dim` coordinates into `blocks` equal contiguous blocks.
  static std::vector<std::size_t> even_split(std::size_t dim, std::size_t blocks);
};

/// Dense vector partitioned into contiguous, non-overlapping blocks.
class BlockVector {
 public:
  BlockVector() = default;
  explicit BlockVector(std::span<const std::size_t> block_sizes, double fill = 0.0);
  BlockVector(std::span<const std::size_t> block_sizes, std::vector<double> data);

  std::size_t size() const { return data_.size(); }
  std::size_t num_blocks() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t block_dim(std::size_t index) const;
  std::size_t block_offset(std::size_t index) const;

  /// View of block `index`; writes go through to this vector. Out-of-range
  /// indices throw std::out_of_range.
  std::span<double> block(std::size_t index);
  std::span<const double> block(std::size_t index) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  Eigen::Map<Eigen::VectorXd> as_eigen() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }
  Eigen::Map<const Eigen::VectorXd> as_eigen() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  bool same_layout(const BlockVector& other) const { return offsets_ == other.offsets_; }
  double& operator[](std::size_t c) { return data_[c]; }
  double operator[](std::size_t c) const { return data_[c]; }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<double> data_;
};

/// Free-function form of BlockVector::block.
inline std::span<double> block_slice(BlockVector& v, std::size_t index) { return v.block(index); }
inline std::span<const double> block_slice(const BlockVector& v, std::size_t index) {
  return v.block(index);
}

/// Block Lipschitz constants of the partial gradients of Phi.
///   xx(i, l) = L_{x_i x_l},  xy(i, j) = L_{x_i y_j},
///   yy(j, l) = L_{y_j y_l},  yx(j, i) = L_{y_j x_i}.
struct BlockLipschitz {
  Eigen::MatrixXd xx;  // M x M
  Eigen::MatrixXd xy;  // M x N
  Eigen::MatrixXd yy;  // N x N
  Eigen::MatrixXd yx;  // N x M

  static BlockLipschitz broadcast(std::size_t M, std::size_t N, double lxx, double lxy, double lyy,
                                  double lyx);
  std::size_t num_primal_blocks() const { return static_cast<std::size_t>(xx.rows()); }
  std::size_t num_dual_blocks() const { return static_cast<std::size_t>(yy.rows()); }
  /// Empty when finite, nonnegative and shaped M x M / M x N / N x N / N x M.
  std::string check(std::size_t M, std::size_t N) const;
};

struct SaddlePoint {
  BlockVector x;
  BlockVector y;
};

class SaddleProblem {
 public:
  virtual ~SaddleProblem() = default;

  virtual const BlockStructure& structure() const = 0;
  virtual std::size_t num_components() const = 0;
  virtual const ProxSpec& primal_prox(std::size_t i) const = 0;
  virtual const ProxSpec& dual_prox(std::size_t j) const = 0;
  virtual const BlockLipschitz& lipschitz() const = 0;
  virtual std::string name() const = 0;

  /// grad_{x_i} Phi_l(x, y), written into `out` (length m_i).
  virtual void component_grad_x(std::size_t l, std::size_t i, const BlockVector& x,
                                const BlockVector& y, std::span<double> out) const = 0;
  /// grad_{y_j} Phi_l(x, y), written into `out` (length n_j).
  virtual void component_grad_y(std::size_t l, std::size_t j, const BlockVector& x,
                                const BlockVector& y, std::span<double> out) const = 0;

  /// Full partial gradients. Defaults average the components; problems with a
  /// cheaper closed form override these.
  virtual void grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
                      std::span<double> out) const;
  virtual void grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
                      std::span<double> out) const;

  /// Function values are optional; metrics degrade to "missing" without them.
  virtual std::optional<double> phi(const BlockVector& /*x*/, const BlockVector& /*y*/) const {
    return std::nullopt;
  }
  virtual std::optional<double> phi_component(std::size_t /*l*/, const BlockVector& /*x*/,
                                              const BlockVector& /*y*/) const {
    return std::nullopt;
  }

  virtual SaddlePoint initial_point() const;

  BlockVector zero_primal() const { return BlockVector(structure().primal_blocks); }
  BlockVector zero_dual() const { return BlockVector(structure().dual_blocks); }

  double f(const BlockVector& x) const;
  double h(const BlockVector& y) const;
  std::optional<double> lagrangian(const BlockVector& x, const BlockVector& y) const;
  bool primal_feasible(const BlockVector& x) const;
  bool dual_feasible(const BlockVector& y) const;
};

struct ValidationIssue {
  std::string check;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

/// Consistency checks of a problem: dimensions, prox domains, and the
/// finite-sum identity at random probe points (skipped when p > 10^4).
/// Never throws on a bad problem; failures are listed in the report.
ValidationReport validate_problem(const SaddleProblem& problem, double tolerance = 1e-10,
                                  std::uint64_t seed = 7, std::size_t probes = 3);

/// Uniformly spread point inside the domain of `spec` (for probing).
class Rng;
void sample_in_domain(const ProxSpec& spec, Rng& rng, std::span<double> out);

}  // namespace rbpda
