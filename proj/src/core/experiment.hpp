#pragma once

// Experiment harness: flat key = value configs, multi-run orchestration,
// CSV artifacts, and cross-directory comparison.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "problems.hpp"
#include "solver.hpp"

namespace rbpda {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ProblemKind { MatrixGame, BoxGame, RobustErm, Qp };

const char* to_string(ProblemKind kind);
std::optional<ProblemKind> problem_kind_from_string(const std::string& name);

struct ExperimentSpec {
  ProblemKind problem = ProblemKind::MatrixGame;
  SolverMode mode = SolverMode::IncreasingBatch;
  double eta = 0.0;
  std::size_t iters = 10000;
  std::uint64_t max_budget = 0;
  std::size_t repeats = 10;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;  // explicit list; overrides seed/repeats when set
  std::size_t blocks_m = 1;
  std::size_t blocks_n = 1;
  std::size_t batch = 1;
  bool restart = false;
  double restart_threshold = 0.9;
  double saturation = 0.0;  // 0: no cap
  std::size_t checkpoint_every = 0;
  bool as_mode = false;
  double step_scale = 1.0;
  std::string out = "results";

  // matrix game
  std::string payoff = "1,0;0,2";  // rows separated by ';'
  BregmanKind geometry = BregmanKind::Euclidean;

  // robust ERM
  std::size_t erm_n = 200;
  std::size_t erm_m = 500;
  double flip_prob = 0.1;
  double radius = 10.0;
  std::uint64_t data_seed = 1;
  std::string dual_set = "auto";  // auto | simplex | box
  std::size_t reference_iters = 1000000;

  // constrained QP (random instance with Slater point 0)
  std::size_t qp_m = 4;
  std::size_t qp_q = 3;

  // ablations: cartesian product, empty means the single value above
  std::vector<std::size_t> ablate_blocks_m;
  std::vector<SolverMode> ablate_modes;

  bool operator==(const ExperimentSpec&) const = default;

  /// Seeds in run order.
  std::vector<std::uint64_t> run_seeds() const;
};

/// Parses `key = value` lines; '#' starts a comment; an optional
/// "[experiment]" header is accepted. Errors name the line and key.
ExperimentSpec parse_config_text(const std::string& text, const std::string& origin = "<config>");
ExperimentSpec parse_config(const std::filesystem::path& path);
/// Applies one key, as from a command-line flag.
void apply_config_value(ExperimentSpec& spec, const std::string& key, const std::string& value);
/// Normalized text with every key; parse_config_text(to_config_text(s)) == s.
std::string to_config_text(const ExperimentSpec& spec);

Eigen::MatrixXd parse_payoff(const std::string& text);

/// A problem instance together with its metric set-up.
struct ProblemInstance {
  std::shared_ptr<const SaddleProblem> problem;
  std::optional<SaddlePoint> reference;
  std::shared_ptr<const ConstrainedAdapter> constrained;
  double f_star = 0.0;
  TraceColumn metric = TraceColumn::GapRef;
  bool sup_gap = false;
  std::string signature;  // identifies the data, independent of blocking
  std::string note;
};

/// Blocking-independent identity of the problem data described by `spec`.
std::string problem_signature(const ExperimentSpec& spec);

/// Reference points computed on the unblocked problem, keyed by signature.
struct ReferenceCache {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> flat;
};

/// Throws std::invalid_argument when the problem cannot be built with the
/// requested blocking.
ProblemInstance build_problem(const ExperimentSpec& spec, std::size_t blocks_m,
                              std::size_t blocks_n, ReferenceCache* cache = nullptr);

struct Configuration {
  std::string name;
  SolverMode mode;
  std::size_t blocks_m;
  std::size_t blocks_n;
};

std::vector<Configuration> configurations(const ExperimentSpec& spec);
SolverConfig solver_config(const ExperimentSpec& spec, const Configuration& cfg, std::uint64_t seed);

struct SummaryRow {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t replicate = 0;
  std::string status;  // ok | failed
  std::string metric;
  std::optional<double> final_gap;
  std::optional<double> rate_slope;
  std::uint64_t grad_budget = 0;
  std::uint64_t dual_grad_evals = 0;
  std::size_t iterations = 0;
  std::size_t restarts = 0;
  double component_spread = 0.0;
  double wall_seconds = 0.0;
  std::string signature;
  std::string note;
};

struct ExperimentOutcome {
  std::filesystem::path directory;
  std::vector<SummaryRow> rows;
  std::size_t failures = 0;
};

/// Worker cap from RBPDA_WORKERS, else the hardware concurrency (at least 1).
std::size_t worker_limit();

/// Runs every (configuration, seed) pair and writes trace_*.csv,
/// summary.csv, plot_<config>.csv and config.effective.ini into spec.out.
ExperimentOutcome run_experiment(const ExperimentSpec& spec);

std::vector<SummaryRow> read_summary(const std::filesystem::path& file);

struct ComparisonRow {
  std::string directory;
  std::string config;
  std::size_t runs = 0;
  double mean_final_gap = 0.0;
  double budget = 0.0;
  double gap_at_budget = 0.0;
  std::size_t rank = 0;
};

struct ComparisonTable {
  std::string signature;
  std::string metric;
  double budget = 0.0;
  std::vector<ComparisonRow> rows;  // ranked
};

/// Ranks configurations by mean gap interpolated at the largest budget every
/// configuration reached. Throws std::invalid_argument when the directories
/// hold different problems or metrics.
ComparisonTable compare_runs(const std::vector<std::filesystem::path>& directories);
std::string to_csv(const ComparisonTable& table);

}  // namespace rbpda
