#include "problems.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "bregman.hpp"
#include "solver.hpp"

namespace rbpda {

double spectral_norm(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  if (A.rows() == 1 || A.cols() == 1) return A.norm();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

std::vector<std::size_t> offsets_of(const std::vector<std::size_t>& sizes) {
  std::vector<std::size_t> off(sizes.size() + 1, 0);
  for (std::size_t b = 0; b < sizes.size(); ++b) off[b + 1] = off[b] + sizes[b];
  return off;
}

// log(1 + exp(-z))
double softplus_neg(double z) { return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

// 1 / (1 + exp(z))
double sigmoid_neg(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

}  // namespace

// ---------------------------------------------------------------------------
// robust ERM data

RobustErmDataset generate_robust_erm(Rng& rng, std::size_t n, std::size_t m, double flip_prob) {
  if (n < 1 || m < 1) throw std::invalid_argument("robust ERM needs n, m >= 1");
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
    throw std::invalid_argument("flip_prob must lie in [0, 1]");
  RobustErmDataset data;
  data.flip_prob = flip_prob;
  data.A.resize(idx(n), idx(m));
  for (Eigen::Index r = 0; r < data.A.rows(); ++r)
    for (Eigen::Index c = 0; c < data.A.cols(); ++c) data.A(r, c) = rng.normal();
  data.x_true.resize(idx(m));
  for (Eigen::Index c = 0; c < data.x_true.size(); ++c) data.x_true(c) = rng.normal();
  const Eigen::VectorXd scores = data.A * data.x_true;
  data.b.resize(idx(n));
  for (Eigen::Index r = 0; r < data.b.size(); ++r) {
    double label = scores(r) >= 0.0 ? 1.0 : -1.0;
    if (rng.uniform() < flip_prob) label = -label;
    data.b(r) = label;
  }
  return data;
}

RobustErmDataset generate_robust_erm(std::uint64_t seed, std::size_t n, std::size_t m,
                                     double flip_prob) {
  Rng rng(seed, 0xda7a);
  RobustErmDataset data = generate_robust_erm(rng, n, m, flip_prob);
  data.seed = seed;
  return data;
}

void write_dataset_csv(const RobustErmDataset& data, std::ostream& out) {
  out << data.n() << ',' << data.m() << ',' << data.seed << ',' << format_real(data.flip_prob)
      << '\n';
  for (Eigen::Index r = 0; r < data.A.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.A.cols(); ++c)
      out << (c ? "," : "") << format_real(data.A(r, c));
    out << '\n';
  }
  for (Eigen::Index r = 0; r < data.b.size(); ++r) out << (r ? "," : "") << format_real(data.b(r));
  out << '\n';
}

namespace {

std::vector<double> parse_row(const std::string& line, std::size_t expected, std::size_t row) {
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      vals.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw std::invalid_argument("dataset row " + std::to_string(row) + ": bad number '" + field +
                                  "'");
    }
  }
  if (vals.size() != expected)
    throw std::invalid_argument("dataset row " + std::to_string(row) + ": expected " +
                                std::to_string(expected) + " fields");
  return vals;
}

}  // namespace

RobustErmDataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset: empty input");
  const auto head = parse_row(line, 4, 1);
  if (head[0] < 1 || head[1] < 1) throw std::invalid_argument("dataset: n and m must be >= 1");
  const auto n = static_cast<std::size_t>(head[0]);
  const auto m = static_cast<std::size_t>(head[1]);
  RobustErmDataset data;
  data.seed = static_cast<std::uint64_t>(head[2]);
  data.flip_prob = head[3];
  data.A.resize(idx(n), idx(m));
  for (std::size_t r = 0; r < n; ++r) {
    if (!std::getline(in, line)) throw std::invalid_argument("dataset: truncated matrix");
    const auto row = parse_row(line, m, r + 2);
    for (std::size_t c = 0; c < m; ++c) data.A(idx(r), idx(c)) = row[c];
  }
  if (!std::getline(in, line)) throw std::invalid_argument("dataset: missing label row");
  const auto labels = parse_row(line, n, n + 2);
  data.b.resize(idx(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] != 1.0 && labels[r] != -1.0)
      throw std::invalid_argument("dataset: labels must be +1 or -1");
    data.b(idx(r)) = labels[r];
  }
  return data;
}

// ---------------------------------------------------------------------------
// robust ERM problem

RobustErmProblem::RobustErmProblem(std::shared_ptr<const RobustErmDataset> data,
                                   const RobustErmOptions& options)
    : data_(std::move(data)), options_(options) {
  if (!data_) throw std::invalid_argument("robust ERM: no dataset");
  const std::size_t n = data_->n();
  const std::size_t m = data_->m();
  const std::size_t M = options.primal_blocks;
  const std::size_t N = options.dual_blocks;
  if (M < 1 || m % M != 0) throw std::invalid_argument("robust ERM: primal blocks must divide m");
  if (N < 1 || n % N != 0) throw std::invalid_argument("robust ERM: dual blocks must divide n");
  if (!(options.radius > 0.0)) throw std::invalid_argument("robust ERM: radius must be positive");
  dual_set_ = options.dual_set.value_or(N == 1 ? ErmDualSet::Simplex : ErmDualSet::Box);
  if (dual_set_ == ErmDualSet::Simplex && N != 1)
    throw std::invalid_argument("robust ERM: the simplex uncertainty set needs a single dual block");

  structure_.primal_blocks = BlockStructure::even_split(m, M);
  structure_.dual_blocks = BlockStructure::even_split(n, N);
  for (std::size_t i = 0; i < M; ++i)
    primal_.push_back(ProxSpec::uniform_box(structure_.primal_blocks[i], -options.radius,
                                            options.radius));
  for (std::size_t j = 0; j < N; ++j)
    dual_.push_back(dual_set_ == ErmDualSet::Simplex
                        ? ProxSpec::simplex(options.simplex_geometry)
                        : ProxSpec::uniform_box(structure_.dual_blocks[j], 0.0, 1.0));
  const std::size_t per = n / N;
  dual_block_of_.resize(n);
  for (std::size_t l = 0; l < n; ++l) dual_block_of_[l] = l / per;

  // Lipschitz constants (logistic curvature <= 1/4, |loss'| <= 1)
  const Eigen::MatrixXd& A = data_->A;
  const auto xo = offsets_of(structure_.primal_blocks);
  Eigen::MatrixXd rn(idx(n), idx(M));  // row norms restricted to primal blocks
  for (std::size_t i = 0; i < M; ++i)
    rn.col(idx(i)) = A.middleCols(idx(xo[i]), idx(structure_.primal_blocks[i])).rowwise().norm();
  const bool entropy_dual =
      dual_set_ == ErmDualSet::Simplex && options.simplex_geometry == BregmanKind::NegativeEntropy;

  lipschitz_.xx.resize(idx(M), idx(M));
  if (dual_set_ == ErmDualSet::Simplex) {
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t l = 0; l < M; ++l)
        lipschitz_.xx(idx(i), idx(l)) = 0.25 * (rn.col(idx(i)).cwiseProduct(rn.col(idx(l)))).maxCoeff();
  } else {
    Eigen::VectorXd col_norm(idx(M));
    for (std::size_t i = 0; i < M; ++i)
      col_norm(idx(i)) = spectral_norm(A.middleCols(idx(xo[i]), idx(structure_.primal_blocks[i])));
    lipschitz_.xx = 0.25 * col_norm * col_norm.transpose();
  }
  lipschitz_.xy.resize(idx(M), idx(N));
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      const auto rows = idx(j * per);
      lipschitz_.xy(idx(i), idx(j)) =
          entropy_dual ? rn.col(idx(i)).segment(rows, idx(per)).maxCoeff()
                       : spectral_norm(A.block(rows, idx(xo[i]), idx(per),
                                               idx(structure_.primal_blocks[i])));
    }
  lipschitz_.yx = lipschitz_.xy.transpose();
  lipschitz_.yy = Eigen::MatrixXd::Zero(idx(N), idx(N));
}

double RobustErmProblem::margin(std::size_t l, const BlockVector& x) const {
  return data_->b(idx(l)) * data_->A.row(idx(l)).dot(x.as_eigen());
}

double RobustErmProblem::loss(std::size_t l, const BlockVector& x) const {
  return softplus_neg(margin(l, x));
}

void RobustErmProblem::component_grad_x(std::size_t l, std::size_t i, const BlockVector& x,
                                        const BlockVector& y, std::span<double> out) const {
  const double p = static_cast<double>(num_components());
  const double coeff = p * y[l] * (-data_->b(idx(l)) * sigmoid_neg(margin(l, x)));
  const auto off = idx(x.block_offset(i));
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = coeff * data_->A(idx(l), off + idx(c));
}

void RobustErmProblem::component_grad_y(std::size_t l, std::size_t j, const BlockVector& x,
                                        const BlockVector& y, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (dual_block_of_.at(l) != j) return;
  out[l - y.block_offset(j)] = static_cast<double>(num_components()) * loss(l, x);
}

void RobustErmProblem::grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
                              std::span<double> out) const {
  const Eigen::MatrixXd& A = data_->A;
  const Eigen::VectorXd z = data_->b.cwiseProduct(A * x.as_eigen());
  Eigen::VectorXd w(z.size());
  for (Eigen::Index l = 0; l < z.size(); ++l) w(l) = y[static_cast<std::size_t>(l)] * -data_->b(l) * sigmoid_neg(z(l));
  Eigen::Map<Eigen::VectorXd>(out.data(), idx(out.size())) =
      A.middleCols(idx(x.block_offset(i)), idx(out.size())).transpose() * w;
}

void RobustErmProblem::grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
                              std::span<double> out) const {
  const std::size_t off = y.block_offset(j);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = loss(off + c, x);
}

std::optional<double> RobustErmProblem::phi(const BlockVector& x, const BlockVector& y) const {
  const Eigen::VectorXd z = data_->b.cwiseProduct(data_->A * x.as_eigen());
  double total = 0.0;
  for (Eigen::Index l = 0; l < z.size(); ++l) total += y[static_cast<std::size_t>(l)] * softplus_neg(z(l));
  return total;
}

std::optional<double> RobustErmProblem::phi_component(std::size_t l, const BlockVector& x,
                                                      const BlockVector& y) const {
  return static_cast<double>(num_components()) * y[l] * loss(l, x);
}

SaddlePoint RobustErmProblem::initial_point() const {
  SaddlePoint z{zero_primal(), zero_dual()};
  const double u = 1.0 / static_cast<double>(data_->n());
  for (double& v : z.y.values()) v = u;
  return z;
}

ReferenceRun long_baseline_reference(const RobustErmProblem& problem, std::size_t max_iters,
                                     double tol, std::size_t window) {
  if (window == 0) throw std::invalid_argument("reference window must be positive");
  RobustErmOptions single = problem.options();
  single.primal_blocks = 1;
  single.dual_blocks = 1;
  single.dual_set = problem.dual_set();
  const RobustErmProblem flat(problem.data_ptr(), single);

  SolverConfig cfg;
  cfg.mode = SolverMode::Baseline;
  const StepSchedule schedule = make_schedule(flat, cfg);
  const double tau = schedule.tau(0, 0);
  const double sigma = schedule.sigma(0, 0);

  RunState state = RunState::start(flat.initial_point(), 1);
  Eigen::VectorXd snap_x = state.x.as_eigen(), snap_y = state.y.as_eigen();
  ReferenceRun out;
  while (state.k < max_iters) {
    deterministic_baseline_step(state, flat, tau, sigma);
    if (state.k % window == 0) {
      out.last_change = std::max((state.x.as_eigen() - snap_x).lpNorm<Eigen::Infinity>(),
                                 (state.y.as_eigen() - snap_y).lpNorm<Eigen::Infinity>());
      snap_x = state.x.as_eigen();
      snap_y = state.y.as_eigen();
      if (out.last_change < tol) {
        out.plateaued = true;
        break;
      }
    }
  }
  out.iterations = state.k;
  const auto& st = problem.structure();
  out.point = {BlockVector(st.primal_blocks, state.x.data()),
               BlockVector(st.dual_blocks, state.y.data())};
  return out;
}

// ---------------------------------------------------------------------------
// matrix game

MatrixGameSolution solve_matrix_game(const Eigen::MatrixXd& A, double tol) {
  const auto rows = A.rows();
  const auto cols = A.cols();
  if (rows < 1 || cols < 1 || rows > 6 || cols > 6)
    throw std::invalid_argument("matrix game oracle supports sizes up to 6 x 6");
  if (!A.allFinite()) throw std::invalid_argument("matrix game payoff must be finite");
  const double shift = 1.0 - A.minCoeff();
  const Eigen::MatrixXd B = A.array() + shift;  // positive value, same strategies

  for (int s = 1; s <= std::min(rows, cols); ++s) {
    for (unsigned rmask = 1; rmask < (1u << rows); ++rmask) {
      if (std::popcount(rmask) != s) continue;
      for (unsigned cmask = 1; cmask < (1u << cols); ++cmask) {
        if (std::popcount(cmask) != s) continue;
        std::vector<Eigen::Index> I, J;
        for (Eigen::Index r = 0; r < rows; ++r)
          if (rmask & (1u << r)) I.push_back(r);
        for (Eigen::Index c = 0; c < cols; ++c)
          if (cmask & (1u << c)) J.push_back(c);
        Eigen::MatrixXd S(s, s);
        for (int a = 0; a < s; ++a)
          for (int b = 0; b < s; ++b) S(a, b) = B(I[a], J[b]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
        if (!lu.isInvertible()) continue;
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s);
        const Eigen::VectorXd u = lu.solve(ones);
        const Eigen::VectorXd w = S.transpose().fullPivLu().solve(ones);
        const double total = u.sum();
        if (!(std::abs(total) > 1e-14)) continue;
        const double v = 1.0 / total;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(rows), y = Eigen::VectorXd::Zero(cols);
        for (int a = 0; a < s; ++a) {
          x(I[a]) = w(a) / w.sum();
          y(J[a]) = u(a) * v;
        }
        if (x.minCoeff() < -tol || y.minCoeff() < -tol) continue;
        // x minimizes against y, y maximizes against x
        if ((B * y).minCoeff() < v - tol || (B.transpose() * x).maxCoeff() > v + tol) continue;
        x = x.cwiseMax(0.0);
        y = y.cwiseMax(0.0);
        x /= x.sum();
        y /= y.sum();
        return {x, y, x.dot(A * y), true};
      }
    }
  }
  MatrixGameSolution fallback;
  fallback.x = Eigen::VectorXd::Constant(rows, 1.0 / static_cast<double>(rows));
  fallback.y = Eigen::VectorXd::Constant(cols, 1.0 / static_cast<double>(cols));
  fallback.value = fallback.x.dot(A * fallback.y);
  fallback.exact = false;
  return fallback;
}

MatrixGameProblem::MatrixGameProblem(MatrixGameSpec spec) : spec_(std::move(spec)) {
  if (spec_.A.size() == 0) throw std::invalid_argument("matrix game payoff is empty");
  if (!spec_.A.allFinite()) throw std::invalid_argument("matrix game payoff must be finite");
  structure_.primal_blocks = {static_cast<std::size_t>(spec_.A.rows())};
  structure_.dual_blocks = {static_cast<std::size_t>(spec_.A.cols())};
  prox_ = ProxSpec::simplex(spec_.geometry);
  // operator norm between the block norms: l2 -> l2, or l1 -> l_inf under entropy
  const double L = spec_.geometry == BregmanKind::NegativeEntropy ? spec_.A.cwiseAbs().maxCoeff()
                                                                  : spectral_norm(spec_.A);
  lipschitz_ = BlockLipschitz::broadcast(1, 1, 0.0, L, 0.0, L);
}

void MatrixGameProblem::component_grad_x(std::size_t, std::size_t, const BlockVector&,
                                         const BlockVector& y, std::span<double> out) const {
  Eigen::Map<Eigen::VectorXd>(out.data(), idx(out.size())) = spec_.A * y.as_eigen();
}

void MatrixGameProblem::component_grad_y(std::size_t, std::size_t, const BlockVector& x,
                                         const BlockVector&, std::span<double> out) const {
  Eigen::Map<Eigen::VectorXd>(out.data(), idx(out.size())) = spec_.A.transpose() * x.as_eigen();
}

std::optional<double> MatrixGameProblem::phi(const BlockVector& x, const BlockVector& y) const {
  return x.as_eigen().dot(spec_.A * y.as_eigen());
}

std::optional<double> MatrixGameProblem::phi_component(std::size_t, const BlockVector& x,
                                                       const BlockVector& y) const {
  return phi(x, y);
}

std::optional<MatrixGameSolution> MatrixGameProblem::reference() const {
  if (spec_.A.rows() > 6 || spec_.A.cols() > 6) return std::nullopt;
  return solve_matrix_game(spec_.A);
}

SaddlePoint MatrixGameProblem::reference_point() const {
  auto sol = reference();
  if (!sol) throw std::invalid_argument("matrix game oracle supports sizes up to 6 x 6");
  return {BlockVector(structure_.primal_blocks,
                      std::vector<double>(sol->x.data(), sol->x.data() + sol->x.size())),
          BlockVector(structure_.dual_blocks,
                      std::vector<double>(sol->y.data(), sol->y.data() + sol->y.size()))};
}

// ---------------------------------------------------------------------------
// box game

BoxGameProblem::BoxGameProblem(Eigen::MatrixXd A, Eigen::VectorXd c, Eigen::VectorXd d,
                               double lower, double upper, std::size_t primal_blocks,
                               std::size_t dual_blocks)
    : A_(std::move(A)), c_(std::move(c)), d_(std::move(d)) {
  if (A_.size() == 0 || !A_.allFinite()) throw std::invalid_argument("box game: bad payoff");
  if (c_.size() != A_.rows() || d_.size() != A_.cols())
    throw std::invalid_argument("box game: center dimensions do not match the payoff");
  if (!(lower < upper)) throw std::invalid_argument("box game: lower must be below upper");
  const auto m = static_cast<std::size_t>(A_.rows());
  const auto n = static_cast<std::size_t>(A_.cols());
  if (primal_blocks < 1 || m % primal_blocks != 0 || dual_blocks < 1 || n % dual_blocks != 0)
    throw std::invalid_argument("box game: block counts must divide the dimensions");
  structure_.primal_blocks = BlockStructure::even_split(m, primal_blocks);
  structure_.dual_blocks = BlockStructure::even_split(n, dual_blocks);
  for (auto s : structure_.primal_blocks) primal_.push_back(ProxSpec::uniform_box(s, lower, upper));
  for (auto s : structure_.dual_blocks) dual_.push_back(ProxSpec::uniform_box(s, lower, upper));
  const auto xo = offsets_of(structure_.primal_blocks);
  const auto yo = offsets_of(structure_.dual_blocks);
  lipschitz_.xx = Eigen::MatrixXd::Zero(idx(primal_blocks), idx(primal_blocks));
  lipschitz_.yy = Eigen::MatrixXd::Zero(idx(dual_blocks), idx(dual_blocks));
  lipschitz_.xy.resize(idx(primal_blocks), idx(dual_blocks));
  for (std::size_t i = 0; i < primal_blocks; ++i)
    for (std::size_t j = 0; j < dual_blocks; ++j)
      lipschitz_.xy(idx(i), idx(j)) = spectral_norm(A_.block(
          idx(xo[i]), idx(yo[j]), idx(structure_.primal_blocks[i]), idx(structure_.dual_blocks[j])));
  lipschitz_.yx = lipschitz_.xy.transpose();
}

void BoxGameProblem::component_grad_x(std::size_t l, std::size_t i, const BlockVector& x,
                                      const BlockVector& y, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t off = x.block_offset(i);
  if (l < off || l >= off + out.size()) return;
  const double p = static_cast<double>(num_components());
  out[l - off] = p * A_.row(idx(l)).dot(y.as_eigen() - d_);
}

void BoxGameProblem::component_grad_y(std::size_t l, std::size_t j, const BlockVector& x,
                                      const BlockVector& y, std::span<double> out) const {
  const double p = static_cast<double>(num_components());
  const double coeff = p * (x[l] - c_(idx(l)));
  const auto off = idx(y.block_offset(j));
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = coeff * A_(idx(l), off + idx(c));
}

void BoxGameProblem::grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
                            std::span<double> out) const {
  const Eigen::VectorXd g = A_ * (y.as_eigen() - d_);
  Eigen::Map<Eigen::VectorXd>(out.data(), idx(out.size())) =
      g.segment(idx(x.block_offset(i)), idx(out.size()));
}

void BoxGameProblem::grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
                            std::span<double> out) const {
  const Eigen::VectorXd g = A_.transpose() * (x.as_eigen() - c_);
  Eigen::Map<Eigen::VectorXd>(out.data(), idx(out.size())) =
      g.segment(idx(y.block_offset(j)), idx(out.size()));
}

std::optional<double> BoxGameProblem::phi(const BlockVector& x, const BlockVector& y) const {
  return (x.as_eigen() - c_).dot(A_ * (y.as_eigen() - d_));
}

std::optional<double> BoxGameProblem::phi_component(std::size_t l, const BlockVector& x,
                                                    const BlockVector& y) const {
  return static_cast<double>(num_components()) * (x[l] - c_(idx(l))) *
         A_.row(idx(l)).dot(y.as_eigen() - d_);
}

SaddlePoint BoxGameProblem::reference_point() const {
  return {BlockVector(structure_.primal_blocks, std::vector<double>(c_.data(), c_.data() + c_.size())),
          BlockVector(structure_.dual_blocks, std::vector<double>(d_.data(), d_.data() + d_.size()))};
}

std::unique_ptr<BoxGameProblem> make_box_game(std::size_t primal_blocks, std::size_t dual_blocks) {
  Eigen::Matrix2d coupling;
  coupling << 1.0, 0.25, 0.25, 1.0;
  const Eigen::Vector2d scale(1.0, 2.0);
  Eigen::MatrixXd A(4, 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int r = 0; r < 2; ++r)
        for (int s = 0; s < 2; ++s) A(2 * a + r, 2 * b + s) = r == s ? coupling(a, b) * scale(r) : 0.0;
  return std::make_unique<BoxGameProblem>(A, Eigen::VectorXd::Constant(4, 0.5),
                                          Eigen::VectorXd::Constant(4, 0.5), 0.0, 1.0,
                                          primal_blocks, dual_blocks);
}

// ---------------------------------------------------------------------------
// constrained QP

QpSolution solve_qp_active_set(const ConstrainedSpec& spec, double tol) {
  const auto m = spec.Q.rows();
  const auto q = spec.G.rows();
  if (q > 16) throw std::invalid_argument("active-set oracle supports at most 16 constraints");
  std::optional<QpSolution> best;
  for (unsigned mask = 0; mask < (1u << q); ++mask) {
    std::vector<Eigen::Index> S;
    for (Eigen::Index r = 0; r < q; ++r)
      if (mask & (1u << r)) S.push_back(r);
    const auto s = static_cast<Eigen::Index>(S.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + s, m + s);
    Eigen::VectorXd rhs(m + s);
    K.topLeftCorner(m, m) = spec.Q;
    rhs.head(m) = -spec.c;
    for (Eigen::Index a = 0; a < s; ++a) {
      K.block(m + a, 0, 1, m) = spec.G.row(S[a]);
      K.block(0, m + a, m, 1) = spec.G.row(S[a]).transpose();
      rhs(m + a) = spec.d(S[a]);
    }
    const Eigen::VectorXd z = K.completeOrthogonalDecomposition().solve(rhs);
    if ((K * z - rhs).norm() > tol * (1.0 + rhs.norm())) continue;
    QpSolution cand;
    cand.x = z.head(m);
    cand.y = Eigen::VectorXd::Zero(q);
    bool ok = true;
    for (Eigen::Index a = 0; a < s; ++a) {
      if (z(m + a) < -tol) ok = false;
      cand.y(S[a]) = std::max(z(m + a), 0.0);
    }
    if (!ok) continue;
    if (q > 0 && (spec.G * cand.x - spec.d).maxCoeff() > tol) continue;
    cand.objective = 0.5 * cand.x.dot(spec.Q * cand.x) + spec.c.dot(cand.x);
    Eigen::VectorXd stat = spec.Q * cand.x + spec.c;
    if (q > 0) stat += spec.G.transpose() * cand.y;
    double res = stat.lpNorm<Eigen::Infinity>();
    if (q > 0) {
      const Eigen::VectorXd slack = spec.G * cand.x - spec.d;
      res = std::max(res, slack.cwiseProduct(cand.y).lpNorm<Eigen::Infinity>());
      res = std::max(res, slack.cwiseMax(0.0).maxCoeff());
    }
    cand.kkt_residual = res;
    if (!best || cand.objective < best->objective - tol) best = cand;
  }
  if (!best) throw std::invalid_argument("constrained QP: no feasible active set");
  return *best;
}

ConstrainedQpProblem::ConstrainedQpProblem(ConstrainedSpec spec, std::size_t primal_blocks,
                                           std::size_t dual_blocks)
    : spec_(std::move(spec)) {
  const auto m = spec_.Q.rows();
  if (m < 1 || spec_.Q.cols() != m || spec_.c.size() != m)
    throw std::invalid_argument("constrained QP: Q must be square and match c");
  if (spec_.G.rows() == 0) spec_.G.resize(0, m);
  if (spec_.G.cols() != m || spec_.d.size() != spec_.G.rows())
    throw std::invalid_argument("constrained QP: G and d dimensions do not match");
  if (!spec_.Q.allFinite() || !spec_.c.allFinite() || !spec_.G.allFinite() || !spec_.d.allFinite())
    throw std::invalid_argument("constrained QP: data must be finite");
  const Eigen::MatrixXd sym = 0.5 * (spec_.Q + spec_.Q.transpose());
  if ((sym - spec_.Q).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("constrained QP: Q must be symmetric");
  if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("constrained QP: Q must be positive semidefinite");
  if (spec_.slater) {
    if (spec_.slater->size() != m) throw std::invalid_argument("constrained QP: bad Slater point");
    if (spec_.G.rows() > 0 && (spec_.G * *spec_.slater - spec_.d).maxCoeff() >= 0.0)
      throw std::invalid_argument("constrained QP: Slater point is not strictly feasible");
  }
  const auto q = static_cast<std::size_t>(spec_.G.rows());
  p_ = std::max<std::size_t>(q, 1);
  const std::size_t ydim = p_;
  if (primal_blocks < 1 || static_cast<std::size_t>(m) % primal_blocks != 0 || dual_blocks < 1 ||
      ydim % dual_blocks != 0)
    throw std::invalid_argument("constrained QP: block counts must divide the dimensions");
  structure_.primal_blocks = BlockStructure::even_split(static_cast<std::size_t>(m), primal_blocks);
  structure_.dual_blocks = BlockStructure::even_split(ydim, dual_blocks);
  for (std::size_t i = 0; i < primal_blocks; ++i) primal_.push_back(ProxSpec::zero());
  for (auto s : structure_.dual_blocks)
    dual_.push_back(q == 0 ? ProxSpec::uniform_box(s, 0.0, 1.0) : ProxSpec::nonnegative());

  const auto xo = offsets_of(structure_.primal_blocks);
  const auto yo = offsets_of(structure_.dual_blocks);
  lipschitz_.xx.resize(idx(primal_blocks), idx(primal_blocks));
  for (std::size_t i = 0; i < primal_blocks; ++i)
    for (std::size_t l = 0; l < primal_blocks; ++l)
      lipschitz_.xx(idx(i), idx(l)) = spectral_norm(spec_.Q.block(
          idx(xo[i]), idx(xo[l]), idx(structure_.primal_blocks[i]), idx(structure_.primal_blocks[l])));
  lipschitz_.xy = Eigen::MatrixXd::Zero(idx(primal_blocks), idx(dual_blocks));
  if (q > 0)
    for (std::size_t i = 0; i < primal_blocks; ++i)
      for (std::size_t j = 0; j < dual_blocks; ++j)
        lipschitz_.xy(idx(i), idx(j)) = spectral_norm(spec_.G.block(
            idx(yo[j]), idx(xo[i]), idx(structure_.dual_blocks[j]), idx(structure_.primal_blocks[i])));
  lipschitz_.yx = lipschitz_.xy.transpose();
  lipschitz_.yy = Eigen::MatrixXd::Zero(idx(dual_blocks), idx(dual_blocks));

  solution_ = solve_qp_active_set(spec_);
}

void ConstrainedQpProblem::component_grad_x(std::size_t l, std::size_t i, const BlockVector& x,
                                            const BlockVector& y, std::span<double> out) const {
  const auto off = idx(x.block_offset(i));
  const auto len = idx(out.size());
  Eigen::Map<Eigen::VectorXd> o(out.data(), len);
  o = spec_.Q.middleRows(off, len) * x.as_eigen() + spec_.c.segment(off, len);
  if (spec_.G.rows() > 0)
    o += static_cast<double>(p_) * y[l] * spec_.G.row(idx(l)).segment(off, len).transpose();
}

void ConstrainedQpProblem::component_grad_y(std::size_t l, std::size_t j, const BlockVector& x,
                                            const BlockVector& y, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  if (spec_.G.rows() == 0) return;
  const std::size_t off = y.block_offset(j);
  if (l < off || l >= off + out.size()) return;
  out[l - off] = static_cast<double>(p_) * (spec_.G.row(idx(l)).dot(x.as_eigen()) - spec_.d(idx(l)));
}

void ConstrainedQpProblem::grad_x(std::size_t i, const BlockVector& x, const BlockVector& y,
                                  std::span<double> out) const {
  const auto off = idx(x.block_offset(i));
  const auto len = idx(out.size());
  Eigen::Map<Eigen::VectorXd> o(out.data(), len);
  o = spec_.Q.middleRows(off, len) * x.as_eigen() + spec_.c.segment(off, len);
  if (spec_.G.rows() > 0) o += spec_.G.middleCols(off, len).transpose() * y.as_eigen();
}

void ConstrainedQpProblem::grad_y(std::size_t j, const BlockVector& x, const BlockVector& y,
                                  std::span<double> out) const {
  Eigen::Map<Eigen::VectorXd> o(out.data(), idx(out.size()));
  if (spec_.G.rows() == 0) {
    o.setZero();
    return;
  }
  const auto off = idx(y.block_offset(j));
  o = spec_.G.middleRows(off, idx(out.size())) * x.as_eigen() - spec_.d.segment(off, idx(out.size()));
}

std::optional<double> ConstrainedQpProblem::phi(const BlockVector& x, const BlockVector& y) const {
  double v = objective(x);
  if (spec_.G.rows() > 0) v += y.as_eigen().dot(spec_.G * x.as_eigen() - spec_.d);
  return v;
}

std::optional<double> ConstrainedQpProblem::phi_component(std::size_t l, const BlockVector& x,
                                                          const BlockVector& y) const {
  double v = objective(x);
  if (spec_.G.rows() > 0)
    v += static_cast<double>(p_) * y[l] * (spec_.G.row(idx(l)).dot(x.as_eigen()) - spec_.d(idx(l)));
  return v;
}

double ConstrainedQpProblem::objective(const BlockVector& x) const {
  const auto v = x.as_eigen();
  return 0.5 * v.dot(spec_.Q * v) + spec_.c.dot(v);
}

double ConstrainedQpProblem::max_violation(const BlockVector& x) const {
  if (spec_.G.rows() == 0) return 0.0;
  return std::max(0.0, (spec_.G * x.as_eigen() - spec_.d).maxCoeff());
}

SaddlePoint ConstrainedQpProblem::reference_point() const {
  std::vector<double> yv(p_, 0.0);
  for (Eigen::Index r = 0; r < solution_.y.size(); ++r) yv[static_cast<std::size_t>(r)] = solution_.y(r);
  return {BlockVector(structure_.primal_blocks,
                      std::vector<double>(solution_.x.data(), solution_.x.data() + solution_.x.size())),
          BlockVector(structure_.dual_blocks, std::move(yv))};
}

}  // namespace rbpda
