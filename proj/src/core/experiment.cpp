#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace rbpda {

namespace fs = std::filesystem;

const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::MatrixGame: return "matrix_game";
    case ProblemKind::BoxGame: return "box_game";
    case ProblemKind::RobustErm: return "robust_erm";
    case ProblemKind::Qp: return "qp";
  }
  return "?";
}

std::optional<ProblemKind> problem_kind_from_string(const std::string& name) {
  for (auto k : {ProblemKind::MatrixGame, ProblemKind::BoxGame, ProblemKind::RobustErm, ProblemKind::Qp})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

std::vector<std::uint64_t> ExperimentSpec::run_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out(repeats);
  for (std::size_t r = 0; r < repeats; ++r) out[r] = seed + r;
  return out;
}

// ---------------------------------------------------------------------------
// config text

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw ConfigError("key '" + key + "': " + why);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    bad(key, "expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    bad(key, "integer out of range: '" + v + "'");
  }
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad(key, "expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(out)) bad(key, "expected a finite number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, "expected true or false, got '" + v + "'");
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) bad(key, why);
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t q = 0; q < v.size(); ++q) s += (q ? "," : "") + std::to_string(v[q]);
  return s;
}

}  // namespace

Eigen::MatrixXd parse_payoff(const std::string& text) {
  std::vector<std::vector<double>> rows;
  for (const auto& row : split(text, ';')) {
    if (row.empty()) continue;
    std::vector<double> vals;
    for (const auto& f : split(row, ',')) vals.push_back(to_real("payoff", f));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) bad("payoff", "empty matrix");
  for (const auto& r : rows)
    if (r.size() != rows[0].size()) bad("payoff", "rows have different lengths");
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return A;
}

void apply_config_value(ExperimentSpec& s, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "problem") {
    auto k = problem_kind_from_string(v);
    require(k.has_value(), key, "expected one of matrix_game, box_game, robust_erm, qp, got '" + v + "'");
    s.problem = *k;
  } else if (key == "mode") {
    auto m = solver_mode_from_string(v);
    require(m.has_value(), key, "expected one of increasing, single, baseline, got '" + v + "'");
    s.mode = *m;
  } else if (key == "eta") {
    s.eta = to_real(key, v);
    require(s.eta >= 0.0 && s.eta < 1.0, key, "must lie in [0, 1)");
  } else if (key == "iters") {
    s.iters = to_size(key, v);
  } else if (key == "max_budget") {
    s.max_budget = to_u64(key, v);
  } else if (key == "repeats") {
    s.repeats = to_size(key, v);
    require(s.repeats >= 1, key, "must be at least 1");
  } else if (key == "seed") {
    s.seed = to_u64(key, v);
  } else if (key == "seeds") {
    s.seeds.clear();
    if (!v.empty())
      for (const auto& f : split(v, ',')) s.seeds.push_back(to_u64(key, f));
  } else if (key == "blocks_m") {
    s.blocks_m = to_size(key, v);
    require(s.blocks_m >= 1, key, "must be at least 1");
  } else if (key == "blocks_n") {
    s.blocks_n = to_size(key, v);
    require(s.blocks_n >= 1, key, "must be at least 1");
  } else if (key == "batch") {
    s.batch = to_size(key, v);
    require(s.batch >= 1, key, "must be at least 1");
  } else if (key == "restart") {
    s.restart = to_bool(key, v);
  } else if (key == "restart_threshold") {
    s.restart_threshold = to_real(key, v);
    require(s.restart_threshold > 0.0 && s.restart_threshold <= 1.0, key, "must lie in (0, 1]");
  } else if (key == "saturation") {
    s.saturation = to_real(key, v);
    require(s.saturation >= 0.0 && s.saturation <= 1.0, key, "must lie in [0, 1]");
  } else if (key == "checkpoint_every") {
    s.checkpoint_every = to_size(key, v);
  } else if (key == "as_mode") {
    s.as_mode = to_bool(key, v);
  } else if (key == "step_scale") {
    s.step_scale = to_real(key, v);
    require(s.step_scale > 0.0 && s.step_scale <= 1.0, key, "must lie in (0, 1]");
  } else if (key == "out") {
    require(!v.empty(), key, "must not be empty");
    s.out = v;
  } else if (key == "payoff") {
    parse_payoff(v);
    s.payoff = v;
  } else if (key == "geometry") {
    if (v == "euclidean") s.geometry = BregmanKind::Euclidean;
    else if (v == "entropy") s.geometry = BregmanKind::NegativeEntropy;
    else bad(key, "expected euclidean or entropy, got '" + v + "'");
  } else if (key == "erm_n") {
    s.erm_n = to_size(key, v);
    require(s.erm_n >= 1, key, "must be at least 1");
  } else if (key == "erm_m") {
    s.erm_m = to_size(key, v);
    require(s.erm_m >= 1, key, "must be at least 1");
  } else if (key == "flip_prob") {
    s.flip_prob = to_real(key, v);
    require(s.flip_prob >= 0.0 && s.flip_prob <= 1.0, key, "must lie in [0, 1]");
  } else if (key == "radius") {
    s.radius = to_real(key, v);
    require(s.radius > 0.0, key, "must be positive");
  } else if (key == "data_seed") {
    s.data_seed = to_u64(key, v);
  } else if (key == "dual_set") {
    require(v == "auto" || v == "simplex" || v == "box", key,
            "expected auto, simplex or box, got '" + v + "'");
    s.dual_set = v;
  } else if (key == "reference_iters") {
    s.reference_iters = to_size(key, v);
  } else if (key == "qp_m") {
    s.qp_m = to_size(key, v);
    require(s.qp_m >= 1, key, "must be at least 1");
  } else if (key == "qp_q") {
    s.qp_q = to_size(key, v);
    require(s.qp_q <= 16, key, "at most 16 constraints");
  } else if (key == "ablate_blocks_m") {
    s.ablate_blocks_m.clear();
    if (!v.empty())
      for (const auto& f : split(v, ',')) {
        s.ablate_blocks_m.push_back(to_size(key, f));
        require(s.ablate_blocks_m.back() >= 1, key, "block counts must be at least 1");
      }
  } else if (key == "ablate_modes") {
    s.ablate_modes.clear();
    if (!v.empty())
      for (const auto& f : split(v, ',')) {
        auto m = solver_mode_from_string(f);
        require(m.has_value(), key, "unknown mode '" + f + "'");
        s.ablate_modes.push_back(*m);
      }
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

ExperimentSpec parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentSpec spec;
  std::stringstream in(text);
  std::string line;
  std::size_t number = 0;
  bool seen_section = false;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(number) + ": ";
    if (line.front() == '[') {
      if (line != "[experiment]" || seen_section)
        throw ConfigError(where + "unexpected section '" + line + "'");
      seen_section = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    try {
      apply_config_value(spec, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return spec;
}

ExperimentSpec parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

std::string to_config_text(const ExperimentSpec& s) {
  std::ostringstream o;
  o << "[experiment]\n";
  o << "problem = " << to_string(s.problem) << '\n';
  o << "mode = " << to_string(s.mode) << '\n';
  o << "eta = " << format_real(s.eta) << '\n';
  o << "iters = " << s.iters << '\n';
  o << "max_budget = " << s.max_budget << '\n';
  o << "repeats = " << s.repeats << '\n';
  o << "seed = " << s.seed << '\n';
  o << "seeds = ";
  for (std::size_t q = 0; q < s.seeds.size(); ++q) o << (q ? "," : "") << s.seeds[q];
  o << '\n';
  o << "blocks_m = " << s.blocks_m << '\n';
  o << "blocks_n = " << s.blocks_n << '\n';
  o << "batch = " << s.batch << '\n';
  o << "restart = " << (s.restart ? "true" : "false") << '\n';
  o << "restart_threshold = " << format_real(s.restart_threshold) << '\n';
  o << "saturation = " << format_real(s.saturation) << '\n';
  o << "checkpoint_every = " << s.checkpoint_every << '\n';
  o << "as_mode = " << (s.as_mode ? "true" : "false") << '\n';
  o << "step_scale = " << format_real(s.step_scale) << '\n';
  o << "out = " << s.out << '\n';
  o << "payoff = " << s.payoff << '\n';
  o << "geometry = " << (s.geometry == BregmanKind::Euclidean ? "euclidean" : "entropy") << '\n';
  o << "erm_n = " << s.erm_n << '\n';
  o << "erm_m = " << s.erm_m << '\n';
  o << "flip_prob = " << format_real(s.flip_prob) << '\n';
  o << "radius = " << format_real(s.radius) << '\n';
  o << "data_seed = " << s.data_seed << '\n';
  o << "dual_set = " << s.dual_set << '\n';
  o << "reference_iters = " << s.reference_iters << '\n';
  o << "qp_m = " << s.qp_m << '\n';
  o << "qp_q = " << s.qp_q << '\n';
  o << "ablate_blocks_m = " << join_sizes(s.ablate_blocks_m) << '\n';
  o << "ablate_modes = ";
  for (std::size_t q = 0; q < s.ablate_modes.size(); ++q) o << (q ? "," : "") << to_string(s.ablate_modes[q]);
  o << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------
// problem instances

namespace {

ErmDualSet resolve_dual_set(const ExperimentSpec& spec, std::size_t blocks_n) {
  if (spec.dual_set == "simplex") return ErmDualSet::Simplex;
  if (spec.dual_set == "box") return ErmDualSet::Box;
  return blocks_n == 1 ? ErmDualSet::Simplex : ErmDualSet::Box;
}

ConstrainedSpec random_qp(std::uint64_t seed, std::size_t m, std::size_t q) {
  Rng rng(seed, 0x9b);
  const auto em = static_cast<Eigen::Index>(m);
  const auto eq = static_cast<Eigen::Index>(q);
  Eigen::MatrixXd B(em, em);
  for (Eigen::Index r = 0; r < em; ++r)
    for (Eigen::Index c = 0; c < em; ++c) B(r, c) = rng.normal();
  ConstrainedSpec spec;
  spec.Q = B.transpose() * B / static_cast<double>(m) + 0.1 * Eigen::MatrixXd::Identity(em, em);
  spec.Q = 0.5 * (spec.Q + spec.Q.transpose()).eval();
  spec.c.resize(em);
  for (Eigen::Index r = 0; r < em; ++r) spec.c(r) = 2.0 * rng.normal();
  spec.G.resize(eq, em);
  spec.d.resize(eq);
  for (Eigen::Index r = 0; r < eq; ++r) {
    for (Eigen::Index c = 0; c < em; ++c) spec.G(r, c) = rng.normal();
    spec.d(r) = 0.5 + rng.uniform();  // x = 0 is strictly feasible
  }
  spec.slater = Eigen::VectorXd::Zero(em);
  return spec;
}

}  // namespace

std::string problem_signature(const ExperimentSpec& spec) {
  std::ostringstream o;
  o << to_string(spec.problem);
  switch (spec.problem) {
    case ProblemKind::MatrixGame:
      o << ":payoff=" << spec.payoff << ":geometry="
        << (spec.geometry == BregmanKind::Euclidean ? "euclidean" : "entropy");
      break;
    case ProblemKind::BoxGame:
      break;
    case ProblemKind::RobustErm:
      o << ":n=" << spec.erm_n << ":m=" << spec.erm_m << ":flip=" << format_real(spec.flip_prob)
        << ":radius=" << format_real(spec.radius) << ":data_seed=" << spec.data_seed
        << ":dual=" << (resolve_dual_set(spec, spec.blocks_n) == ErmDualSet::Simplex ? "simplex" : "box");
      break;
    case ProblemKind::Qp:
      o << ":m=" << spec.qp_m << ":q=" << spec.qp_q << ":data_seed=" << spec.data_seed;
      break;
  }
  return o.str();
}

ProblemInstance build_problem(const ExperimentSpec& spec, std::size_t blocks_m,
                              std::size_t blocks_n, ReferenceCache* cache) {
  ProblemInstance inst;
  inst.signature = problem_signature(spec);
  switch (spec.problem) {
    case ProblemKind::MatrixGame: {
      if (blocks_m != 1 || blocks_n != 1)
        throw std::invalid_argument(
            "matrix game strategies live on simplices and cannot be split into blocks; use box_game");
      auto game = std::make_shared<MatrixGameProblem>(MatrixGameSpec{parse_payoff(spec.payoff), spec.geometry});
      if (auto sol = game->reference()) {
        inst.reference = game->reference_point();
        if (!sol->exact) inst.note = "reference approximate";
      }
      inst.problem = game;
      inst.metric = TraceColumn::SupGap;
      inst.sup_gap = true;
      break;
    }
    case ProblemKind::BoxGame: {
      std::shared_ptr<BoxGameProblem> game = make_box_game(blocks_m, blocks_n);
      inst.reference = game->reference_point();
      inst.problem = game;
      inst.metric = TraceColumn::SupGap;
      inst.sup_gap = true;
      break;
    }
    case ProblemKind::RobustErm: {
      auto data = std::make_shared<RobustErmDataset>(
          generate_robust_erm(spec.data_seed, spec.erm_n, spec.erm_m, spec.flip_prob));
      RobustErmOptions opt;
      opt.radius = spec.radius;
      opt.primal_blocks = blocks_m;
      opt.dual_blocks = blocks_n;
      opt.dual_set = resolve_dual_set(spec, blocks_n);
      auto erm = std::make_shared<RobustErmProblem>(data, opt);
      const std::string key = problem_signature(spec) + ":ref_iters=" + std::to_string(spec.reference_iters);
      const auto& st = erm->structure();
      if (cache && cache->flat.count(key)) {
        const auto& [x, y] = cache->flat.at(key);
        inst.reference = SaddlePoint{BlockVector(st.primal_blocks, x), BlockVector(st.dual_blocks, y)};
      } else {
        ReferenceRun ref = long_baseline_reference(*erm, spec.reference_iters);
        if (cache) cache->flat[key] = {ref.point.x.data(), ref.point.y.data()};
        inst.reference = ref.point;
      }
      if (*opt.dual_set == ErmDualSet::Box) inst.note = "dual simplex relaxed to the box [0;1]^n";
      inst.problem = erm;
      inst.metric = TraceColumn::GapRef;
      inst.sup_gap = false;
      break;
    }
    case ProblemKind::Qp: {
      auto qp = std::make_shared<ConstrainedQpProblem>(random_qp(spec.data_seed, spec.qp_m, spec.qp_q),
                                                       blocks_m, blocks_n);
      inst.reference = qp->reference_point();
      inst.constrained = qp;
      inst.f_star = qp->solution().objective;
      inst.problem = qp;
      inst.metric = TraceColumn::GapRef;
      inst.sup_gap = false;
      break;
    }
  }
  return inst;
}

std::vector<Configuration> configurations(const ExperimentSpec& spec) {
  const auto ms = spec.ablate_blocks_m.empty() ? std::vector<std::size_t>{spec.blocks_m}
                                               : spec.ablate_blocks_m;
  const auto modes = spec.ablate_modes.empty() ? std::vector<SolverMode>{spec.mode} : spec.ablate_modes;
  std::vector<Configuration> out;
  for (auto mode : modes)
    for (auto m : ms)
      out.push_back({std::string(to_string(mode)) + "_M" + std::to_string(m) + "_N" +
                         std::to_string(spec.blocks_n),
                     mode, m, spec.blocks_n});
  return out;
}

SolverConfig solver_config(const ExperimentSpec& spec, const Configuration& cfg, std::uint64_t seed) {
  SolverConfig c;
  c.mode = cfg.mode;
  c.eta = spec.eta;
  c.max_iters = spec.iters;
  c.max_budget = spec.max_budget;
  c.seed = seed;
  c.batch_size = spec.batch;
  c.restart_enabled = spec.restart && cfg.mode == SolverMode::IncreasingBatch;
  c.restart_threshold = spec.restart_threshold;
  if (spec.saturation > 0.0) c.saturation_fraction = spec.saturation;
  c.checkpoint_every = spec.checkpoint_every;
  c.as_mode = spec.as_mode;
  c.step_scale = spec.step_scale;
  return c;
}

// ---------------------------------------------------------------------------
// orchestration

std::size_t worker_limit() {
  if (const char* env = std::getenv("RBPDA_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = c == ',' ? ';' : ' ';
  return s;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

const char* kSummaryHeader =
    "config,replicate,seed,status,metric,final_gap,rate_slope,grad_budget,dual_grad_evals,"
    "iterations,restarts,component_spread,wall_seconds,signature,note";

void write_summary(const fs::path& file, const std::vector<SummaryRow>& rows) {
  std::ofstream out(file);
  out << kSummaryHeader << '\n';
  for (const auto& r : rows)
    out << r.config << ',' << r.replicate << ',' << r.seed << ',' << r.status << ',' << r.metric << ','
        << opt_real(r.final_gap) << ',' << opt_real(r.rate_slope) << ',' << r.grad_budget << ','
        << r.dual_grad_evals << ',' << r.iterations << ',' << r.restarts << ','
        << format_real(r.component_spread) << ',' << format_real(r.wall_seconds) << ','
        << csv_safe(r.signature) << ',' << csv_safe(r.note) << '\n';
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

struct Job {
  std::size_t config = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
};

struct JobOutput {
  RunResult result;
  std::string error;  // set when the run could not start
  double wall = 0.0;
};

std::string trace_name(const std::string& config, std::size_t replicate, std::uint64_t seed) {
  return "trace_" + config + "_r" + std::to_string(replicate) + "_seed" + std::to_string(seed) + ".csv";
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentSpec& spec) {
  ExperimentOutcome outcome;
  outcome.directory = spec.out;
  fs::create_directories(outcome.directory);
  {
    std::ofstream echo(outcome.directory / "config.effective.ini");
    echo << to_config_text(spec);
  }

  const auto configs = configurations(spec);
  const auto seeds = spec.run_seeds();
  ReferenceCache cache;
  std::vector<std::optional<ProblemInstance>> instances(configs.size());
  std::vector<std::string> build_errors(configs.size());
  std::vector<double> spreads(configs.size(), 0.0);
  for (std::size_t c = 0; c < configs.size(); ++c) {
    try {
      instances[c] = build_problem(spec, configs[c].blocks_m, configs[c].blocks_n, &cache);
      spreads[c] = measure_component_spread(*instances[c]->problem);
    } catch (const std::exception& e) {
      build_errors[c] = e.what();
    }
  }

  std::vector<Job> jobs;
  for (std::size_t c = 0; c < configs.size(); ++c)
    for (std::size_t r = 0; r < seeds.size(); ++r) jobs.push_back({c, r, seeds[r]});
  std::vector<JobOutput> outputs(jobs.size());

  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t q = cursor++; q < jobs.size(); q = cursor++) {
      const Job& job = jobs[q];
      JobOutput& out = outputs[q];
      if (!instances[job.config]) {
        out.error = build_errors[job.config];
        continue;
      }
      const ProblemInstance& inst = *instances[job.config];
      MetricOptions metrics;
      metrics.reference = inst.reference;
      metrics.compute_sup_gap = inst.sup_gap;
      metrics.constrained = inst.constrained.get();
      metrics.f_star = inst.f_star;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        out.result = run(*inst.problem, solver_config(spec, configs[job.config], job.seed), metrics);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      out.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const std::size_t nthreads = std::min(worker_limit(), std::max<std::size_t>(jobs.size(), 1));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // single collector writes every file
  for (std::size_t q = 0; q < jobs.size(); ++q) {
    const Job& job = jobs[q];
    const JobOutput& out = outputs[q];
    const Configuration& cfg = configs[job.config];
    SummaryRow row;
    row.config = cfg.name;
    row.seed = job.seed;
    row.replicate = job.replicate;
    row.signature = problem_signature(spec);
    row.wall_seconds = out.wall;
    row.component_spread = spreads[job.config];
    if (instances[job.config]) {
      row.metric = to_string(instances[job.config]->metric);
      row.note = instances[job.config]->note;
    }
    const bool ok = out.error.empty() && out.result.status == RunStatus::Ok;
    row.status = ok ? "ok" : "failed";
    if (!out.error.empty()) {
      row.note = out.error;
    } else {
      const RunResult& res = out.result;
      if (!res.error.empty()) row.note = res.error;
      row.grad_budget = res.grad_budget;
      row.dual_grad_evals = res.dual_grad_evals;
      row.iterations = res.iterations;
      row.restarts = res.restarts;
      const TraceColumn metric = instances[job.config]->metric;
      if (!res.trace.empty()) row.final_gap = column_value(res.trace.back(), metric);
      const double k_hi = static_cast<double>(res.iterations);
      const RateFit fit = fit_rate(res.trace, metric, std::max(1.0, k_hi / 100.0), k_hi);
      if (fit.available) row.rate_slope = fit.slope;
      std::ofstream tf(outcome.directory / trace_name(cfg.name, job.replicate, job.seed));
      res.trace.write_csv(tf);
    }
    if (!ok) ++outcome.failures;
    outcome.rows.push_back(std::move(row));
  }
  write_summary(outcome.directory / "summary.csv", outcome.rows);

  // plot data: mean gap and standard error per checkpoint over successful runs
  for (std::size_t c = 0; c < configs.size(); ++c) {
    if (!instances[c]) continue;
    const TraceColumn metric = instances[c]->metric;
    std::vector<const ConvergenceTrace*> traces;
    for (std::size_t q = 0; q < jobs.size(); ++q)
      if (jobs[q].config == c && outputs[q].error.empty() && outputs[q].result.status == RunStatus::Ok)
        traces.push_back(&outputs[q].result.trace);
    std::ofstream pf(outcome.directory / ("plot_" + configs[c].name + ".csv"));
    pf << "k,mean_budget,mean_gap,stderr,runs\n";
    if (traces.empty()) continue;
    std::vector<std::map<std::size_t, const TraceRow*>> by_k(traces.size());
    for (std::size_t t = 0; t < traces.size(); ++t)
      for (const auto& r : traces[t]->rows()) by_k[t][r.k] = &r;
    for (const auto& r0 : traces[0]->rows()) {
      std::vector<double> gaps, budgets;
      for (std::size_t t = 0; t < traces.size(); ++t) {
        auto it = by_k[t].find(r0.k);
        if (it == by_k[t].end()) break;
        auto v = column_value(*it->second, metric);
        if (!v) break;
        gaps.push_back(*v);
        budgets.push_back(static_cast<double>(it->second->grad_budget));
      }
      if (gaps.size() != traces.size()) continue;
      const double n = static_cast<double>(gaps.size());
      double mg = 0.0, mb = 0.0;
      for (std::size_t t = 0; t < gaps.size(); ++t) {
        mg += gaps[t] / n;
        mb += budgets[t] / n;
      }
      double var = 0.0;
      for (double g : gaps) var += (g - mg) * (g - mg);
      const double se = gaps.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
      pf << r0.k << ',' << format_real(mb) << ',' << format_real(mg) << ',' << format_real(se) << ','
         << gaps.size() << '\n';
    }
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// comparison

namespace {

std::vector<std::vector<std::string>> read_csv_table(const fs::path& file, std::vector<std::string>& header) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(file.string() + ": empty file");
  header = split(line, ',');
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    f.push_back(cur);
    if (f.size() != header.size())
      throw std::invalid_argument(file.string() + ": row with " + std::to_string(f.size()) +
                                  " fields, header has " + std::to_string(header.size()));
    rows.push_back(std::move(f));
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name, const fs::path& file) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::invalid_argument(file.string() + ": missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::optional<double> maybe_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

std::vector<SummaryRow> read_summary(const fs::path& file) {
  std::vector<std::string> h;
  const auto table = read_csv_table(file, h);
  std::vector<SummaryRow> rows;
  for (const auto& f : table) {
    SummaryRow r;
    r.config = f[column(h, "config", file)];
    r.replicate = std::stoull(f[column(h, "replicate", file)]);
    r.seed = std::stoull(f[column(h, "seed", file)]);
    r.status = f[column(h, "status", file)];
    r.metric = f[column(h, "metric", file)];
    r.final_gap = maybe_real(f[column(h, "final_gap", file)]);
    r.rate_slope = maybe_real(f[column(h, "rate_slope", file)]);
    r.grad_budget = std::stoull(f[column(h, "grad_budget", file)]);
    r.dual_grad_evals = std::stoull(f[column(h, "dual_grad_evals", file)]);
    r.iterations = std::stoull(f[column(h, "iterations", file)]);
    r.restarts = std::stoull(f[column(h, "restarts", file)]);
    r.component_spread = std::stod(f[column(h, "component_spread", file)]);
    r.wall_seconds = std::stod(f[column(h, "wall_seconds", file)]);
    r.signature = f[column(h, "signature", file)];
    r.note = f[column(h, "note", file)];
    rows.push_back(std::move(r));
  }
  return rows;
}

ComparisonTable compare_runs(const std::vector<fs::path>& directories) {
  if (directories.empty()) throw std::invalid_argument("compare: no directories given");
  struct Curve {
    ComparisonRow row;
    std::vector<double> budget, gap;
  };
  std::vector<Curve> curves;
  ComparisonTable table;
  std::string first_dir;
  for (const auto& dir : directories) {
    const auto rows = read_summary(dir / "summary.csv");
    std::vector<std::string> order;
    for (const auto& r : rows) {
      if (table.signature.empty()) {
        table.signature = r.signature;
        first_dir = dir.string();
      } else if (r.signature != table.signature) {
        throw std::invalid_argument("compare: " + dir.string() + " holds problem '" + r.signature +
                                    "' but " + first_dir + " holds '" + table.signature +
                                    "'; results on different problems are not comparable");
      }
      if (!r.metric.empty()) {
        if (table.metric.empty()) table.metric = r.metric;
        else if (r.metric != table.metric)
          throw std::invalid_argument("compare: " + dir.string() + " reports metric '" + r.metric +
                                      "' instead of '" + table.metric + "'");
      }
      if (std::find(order.begin(), order.end(), r.config) == order.end()) order.push_back(r.config);
    }
    for (const auto& cfg : order) {
      Curve cv;
      cv.row.directory = dir.string();
      cv.row.config = cfg;
      double sum = 0.0;
      for (const auto& r : rows)
        if (r.config == cfg && r.status == "ok" && r.final_gap) {
          sum += *r.final_gap;
          ++cv.row.runs;
        }
      if (cv.row.runs == 0) continue;
      cv.row.mean_final_gap = sum / static_cast<double>(cv.row.runs);
      std::vector<std::string> h;
      const fs::path pf = dir / ("plot_" + cfg + ".csv");
      const auto prow = read_csv_table(pf, h);
      const auto cb = column(h, "mean_budget", pf);
      const auto cg = column(h, "mean_gap", pf);
      for (const auto& f : prow) {
        cv.budget.push_back(std::stod(f[cb]));
        cv.gap.push_back(std::stod(f[cg]));
      }
      if (cv.budget.empty()) continue;
      curves.push_back(std::move(cv));
    }
  }
  if (curves.empty()) throw std::invalid_argument("compare: no successful runs to compare");
  double budget = curves[0].budget.back();
  for (const auto& cv : curves) budget = std::min(budget, cv.budget.back());
  table.budget = budget;
  for (auto& cv : curves) {
    // linear interpolation in the budget axis
    std::size_t q = 0;
    while (q + 1 < cv.budget.size() && cv.budget[q + 1] < budget) ++q;
    double g = cv.gap[q];
    if (q + 1 < cv.budget.size() && cv.budget[q] < budget) {
      const double w = (budget - cv.budget[q]) / (cv.budget[q + 1] - cv.budget[q]);
      g = (1.0 - w) * cv.gap[q] + w * cv.gap[q + 1];
    }
    cv.row.budget = budget;
    cv.row.gap_at_budget = g;
    table.rows.push_back(cv.row);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.gap_at_budget < b.gap_at_budget; });
  for (std::size_t r = 0; r < table.rows.size(); ++r) table.rows[r].rank = r + 1;
  return table;
}

std::string to_csv(const ComparisonTable& table) {
  std::ostringstream o;
  o << "rank,directory,config,runs,mean_final_gap,budget,gap_at_budget\n";
  for (const auto& r : table.rows)
    o << r.rank << ',' << csv_safe(r.directory) << ',' << r.config << ',' << r.runs << ','
      << format_real(r.mean_final_gap) << ',' << format_real(r.budget) << ','
      << format_real(r.gap_at_budget) << '\n';
  return o.str();
}

}  // namespace rbpda
