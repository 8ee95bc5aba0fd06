#include "metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "rng.hpp"

namespace rbpda {

const char* to_string(TraceColumn column) {
  switch (column) {
    case TraceColumn::GapRef: return "gap_ref";
    case TraceColumn::SupGap: return "sup_gap";
    case TraceColumn::DistRef: return "dist_ref";
    case TraceColumn::Subopt: return "subopt";
    case TraceColumn::Infeas: return "infeas";
  }
  return "?";
}

std::optional<TraceColumn> trace_column_from_string(const std::string& name) {
  for (auto c : {TraceColumn::GapRef, TraceColumn::SupGap, TraceColumn::DistRef,
                 TraceColumn::Subopt, TraceColumn::Infeas})
    if (name == to_string(c)) return c;
  return std::nullopt;
}

std::optional<double> column_value(const TraceRow& row, TraceColumn column) {
  switch (column) {
    case TraceColumn::GapRef: return row.gap_ref;
    case TraceColumn::SupGap: return row.sup_gap;
    case TraceColumn::DistRef: return row.dist_ref;
    case TraceColumn::Subopt: return row.subopt;
    case TraceColumn::Infeas: return row.infeas;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// trace

void ConvergenceTrace::append(TraceRow row) {
  if (!rows_.empty()) {
    if (row.k <= rows_.back().k) throw std::invalid_argument("trace rows must have increasing k");
    if (row.grad_budget < rows_.back().grad_budget)
      throw std::invalid_argument("trace gradient budget must not decrease");
  }
  rows_.push_back(std::move(row));
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

void put(std::ostream& out, const std::optional<double>& v) {
  if (v) out << format_real(*v);
}

std::optional<double> parse_optional(const std::string& field) {
  if (field.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("trace: cannot parse number '" + field + "'");
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

void ConvergenceTrace::write_csv(std::ostream& out) const {
  out << "k,grad_budget,gap_ref,sup_gap,dist_ref,subopt,infeas\n";
  for (const auto& r : rows_) {
    out << r.k << ',' << r.grad_budget << ',';
    put(out, r.gap_ref);
    out << ',';
    put(out, r.sup_gap);
    out << ',';
    put(out, r.dist_ref);
    out << ',';
    put(out, r.subopt);
    out << ',';
    put(out, r.infeas);
    out << '\n';
  }
}

ConvergenceTrace ConvergenceTrace::read_csv(std::istream& in) {
  ConvergenceTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("trace: empty input");
  if (line.rfind("k,grad_budget", 0) != 0) throw std::invalid_argument("trace: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 7) throw std::invalid_argument("trace: expected 7 columns");
    TraceRow row;
    row.k = static_cast<std::size_t>(std::stoull(f[0]));
    row.grad_budget = std::stoull(f[1]);
    row.gap_ref = parse_optional(f[2]);
    row.sup_gap = parse_optional(f[3]);
    row.dist_ref = parse_optional(f[4]);
    row.subopt = parse_optional(f[5]);
    row.infeas = parse_optional(f[6]);
    trace.append(std::move(row));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// gaps

std::optional<double> lagrangian_gap(const SaddleProblem& problem, const SaddlePoint& z_bar,
                                     const SaddlePoint& z_ref) {
  auto upper = problem.lagrangian(z_bar.x, z_ref.y);
  auto lower = problem.lagrangian(z_ref.x, z_bar.y);
  if (!upper || !lower) return std::nullopt;
  return *upper - *lower;
}

namespace {

// Minimizer of <g, u> over the block domain (or x_bar when unbounded).
void linear_minimizer(const ProxSpec& spec, std::span<const double> g, std::span<const double> at,
                      std::span<double> out) {
  switch (spec.kind) {
    case ProxKind::Box:
      for (std::size_t c = 0; c < g.size(); ++c)
        out[c] = g[c] > 0.0 ? spec.lower[c] : (g[c] < 0.0 ? spec.upper[c] : at[c]);
      break;
    case ProxKind::Simplex: {
      const auto best = std::min_element(g.begin(), g.end()) - g.begin();
      std::fill(out.begin(), out.end(), 0.0);
      out[static_cast<std::size_t>(best)] = 1.0;
      break;
    }
    default:
      std::copy(at.begin(), at.end(), out.begin());
  }
}

}  // namespace

SaddlePoint best_response(const SaddleProblem& problem, const SaddlePoint& z_bar) {
  SaddlePoint br{z_bar.x, z_bar.y};
  for (std::size_t i = 0; i < z_bar.x.num_blocks(); ++i) {
    std::vector<double> g(z_bar.x.block_dim(i));
    problem.grad_x(i, z_bar.x, z_bar.y, g);
    linear_minimizer(problem.primal_prox(i), g, z_bar.x.block(i), br.x.block(i));
  }
  for (std::size_t j = 0; j < z_bar.y.num_blocks(); ++j) {
    std::vector<double> g(z_bar.y.block_dim(j));
    problem.grad_y(j, z_bar.x, z_bar.y, g);
    for (double& v : g) v = -v;  // maximize over y
    linear_minimizer(problem.dual_prox(j), g, z_bar.y.block(j), br.y.block(j));
  }
  return br;
}

std::optional<double> sup_gap(const SaddleProblem& problem, const SaddlePoint& z_bar,
                              std::span<const SaddlePoint> candidates) {
  const SaddlePoint br = best_response(problem, z_bar);
  auto upper = problem.lagrangian(z_bar.x, br.y);
  auto lower = problem.lagrangian(br.x, z_bar.y);
  if (!upper || !lower) return std::nullopt;
  double best_upper = *upper;
  double best_lower = *lower;
  for (const auto& c : candidates) {
    if (auto v = problem.lagrangian(z_bar.x, c.y)) best_upper = std::max(best_upper, *v);
    if (auto v = problem.lagrangian(c.x, z_bar.y)) best_lower = std::min(best_lower, *v);
  }
  return best_upper - best_lower;
}

ConstrainedMetrics constrained_metrics(const ConstrainedAdapter& adapter, const BlockVector& x_bar,
                                       double f_star) {
  return {std::abs(adapter.objective(x_bar) - f_star), std::max(adapter.max_violation(x_bar), 0.0)};
}

double distance(const SaddlePoint& a, const SaddlePoint& b) {
  return std::sqrt((a.x.as_eigen() - b.x.as_eigen()).squaredNorm() +
                   (a.y.as_eigen() - b.y.as_eigen()).squaredNorm());
}

// ---------------------------------------------------------------------------
// rates

RateFit fit_rate(std::span<const std::pair<double, double>> k_gap, double k_lo, double k_hi) {
  RateFit fit;
  fit.k_lo = k_lo;
  fit.k_hi = k_hi;
  std::vector<double> lx, ly;
  for (const auto& [k, gap] : k_gap) {
    if (k < k_lo || k > k_hi || !(k > 0.0) || !(gap > 0.0) || !std::isfinite(gap)) continue;
    lx.push_back(std::log(k));
    ly.push_back(std::log(gap));
  }
  fit.points = lx.size();
  if (lx.size() < 5) return fit;
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t q = 0; q < lx.size(); ++q) {
    mx += lx[q];
    my += ly[q];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t q = 0; q < lx.size(); ++q) {
    sxx += (lx[q] - mx) * (lx[q] - mx);
    sxy += (lx[q] - mx) * (ly[q] - my);
    syy += (ly[q] - my) * (ly[q] - my);
  }
  if (!(sxx > 0.0)) return fit;
  fit.available = true;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

RateFit fit_rate(const ConvergenceTrace& trace, TraceColumn column, double k_lo, double k_hi) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : trace.rows())
    if (auto v = column_value(row, column)) pts.emplace_back(static_cast<double>(row.k), *v);
  return fit_rate(pts, k_lo, k_hi);
}

double measure_component_spread(const SaddleProblem& problem, std::size_t probes,
                                std::uint64_t seed) {
  const auto& st = problem.structure();
  const std::size_t p = problem.num_components();
  Rng rng(seed, 0xde17a);
  BlockVector x = problem.zero_primal();
  BlockVector y = problem.zero_dual();
  double worst = 0.0;
  for (std::size_t probe = 0; probe < probes; ++probe) {
    for (std::size_t i = 0; i < st.num_primal_blocks(); ++i)
      sample_in_domain(problem.primal_prox(i), rng, x.block(i));
    for (std::size_t j = 0; j < st.num_dual_blocks(); ++j)
      sample_in_domain(problem.dual_prox(j), rng, y.block(j));
    for (std::size_t i = 0; i < st.num_primal_blocks(); ++i) {
      const std::size_t d = st.primal_blocks[i];
      std::vector<double> full(d), tmp(d);
      problem.grad_x(i, x, y, full);
      double acc = 0.0;
      for (std::size_t l = 0; l < p; ++l) {
        problem.component_grad_x(l, i, x, y, tmp);
        for (std::size_t c = 0; c < d; ++c) acc += (tmp[c] - full[c]) * (tmp[c] - full[c]);
      }
      worst = std::max(worst, std::sqrt(acc / static_cast<double>(p)));
    }
  }
  return worst;
}

TraceRow evaluate_checkpoint(const SaddleProblem& problem, const SaddlePoint& z_bar, std::size_t k,
                             std::uint64_t grad_budget, const MetricOptions& options) {
  TraceRow row;
  row.k = k;
  row.grad_budget = grad_budget;
  if (options.reference) {
    row.gap_ref = lagrangian_gap(problem, z_bar, *options.reference);
    row.dist_ref = distance(z_bar, *options.reference);
  }
  if (options.compute_sup_gap) {
    if (options.reference) {
      const SaddlePoint ref[] = {*options.reference};
      row.sup_gap = sup_gap(problem, z_bar, ref);
    } else {
      row.sup_gap = sup_gap(problem, z_bar);
    }
  }
  if (options.constrained) {
    auto cm = constrained_metrics(*options.constrained, z_bar.x, options.f_star);
    row.subopt = cm.suboptimality;
    row.infeas = cm.infeasibility;
  }
  return row;
}

}  // namespace rbpda
