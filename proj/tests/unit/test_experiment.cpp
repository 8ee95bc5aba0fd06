#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "experiment.hpp"

using namespace rbpda;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() / ("rbpda_" + tag + "_" + std::to_string(rd()));
  fs::remove_all(dir);
  return dir;
}

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag) : path(scratch(tag)) {}
  ~ScratchDir() { fs::remove_all(path); }
};

ExperimentSpec quick_game(const fs::path& out) {
  ExperimentSpec s;
  s.iters = 200;
  s.repeats = 1;
  s.out = out.string();
  return s;
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const auto s = parse_config_text("");
  EXPECT_EQ(s.problem, ProblemKind::MatrixGame);
  EXPECT_EQ(s.mode, SolverMode::IncreasingBatch);
  EXPECT_EQ(s.iters, 10000u);
  EXPECT_EQ(s.repeats, 10u);
  EXPECT_EQ(s.seed, 1u);
  EXPECT_EQ(s, ExperimentSpec{});
}

TEST(Config, ParsesValuesCommentsAndSection) {
  const auto s = parse_config_text(
      "[experiment]\n# comment\neta = 0.5\nmode = single   # trailing\nblocks_m = 3\nseeds = 4,5\n");
  EXPECT_EQ(s.eta, 0.5);
  EXPECT_EQ(s.mode, SolverMode::SingleSample);
  EXPECT_EQ(s.blocks_m, 3u);
  EXPECT_EQ(s.run_seeds(), (std::vector<std::uint64_t>{4, 5}));
}

TEST(Config, ErrorsNameTheKeyAndLine) {
  try {
    parse_config_text("iters = 5\nmode = turbo\n", "exp.ini");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("exp.ini:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("mode"), std::string::npos) << msg;
    EXPECT_NE(msg.find("turbo"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_config_text("colour = blue\n"), ConfigError);
  EXPECT_THROW(parse_config_text("eta = -1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("iters = many\n"), ConfigError);
  EXPECT_THROW(parse_config_text("just words\n"), ConfigError);
  EXPECT_THROW(parse_config("/nonexistent/dir/exp.ini"), std::exception);
}

TEST(Config, TextRoundTrip) {
  ExperimentSpec s;
  s.problem = ProblemKind::RobustErm;
  s.mode = SolverMode::Baseline;
  s.eta = 0.25;
  s.seeds = {3, 9};
  s.restart = true;
  s.saturation = 0.5;
  s.payoff = "1,2;3,4";
  s.geometry = BregmanKind::NegativeEntropy;
  s.flip_prob = 1.0 / 3.0;
  s.ablate_blocks_m = {1, 10};
  s.ablate_modes = {SolverMode::IncreasingBatch, SolverMode::SingleSample};
  EXPECT_EQ(parse_config_text(to_config_text(s)), s);
  EXPECT_EQ(parse_config_text(to_config_text(ExperimentSpec{})), ExperimentSpec{});
}

TEST(Config, PayoffParsing) {
  const auto A = parse_payoff("1, 0; 0, 2");
  EXPECT_EQ(A.rows(), 2);
  EXPECT_EQ(A(1, 1), 2.0);
  EXPECT_THROW(parse_payoff("1,2;3"), ConfigError);
}

TEST(Configurations, CartesianProductOfAblations) {
  ExperimentSpec s;
  s.ablate_blocks_m = {1, 2};
  s.ablate_modes = {SolverMode::IncreasingBatch, SolverMode::SingleSample};
  const auto c = configurations(s);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_NE(c[0].name, c[1].name);
}

TEST(RunExperiment, ZeroIterationsSingleRow) {
  ScratchDir dir("k0");
  auto s = quick_game(dir.path);
  s.iters = 0;
  const auto out = run_experiment(s);
  ASSERT_EQ(out.rows.size(), 1u);
  EXPECT_EQ(out.failures, 0u);
  EXPECT_EQ(out.rows[0].iterations, 0u);
  EXPECT_TRUE(fs::exists(dir.path / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir.path / "config.effective.ini"));
  EXPECT_EQ(parse_config(dir.path / "config.effective.ini"), s);
}

TEST(RunExperiment, IdenticalSeedsGiveIdenticalTraces) {
  ScratchDir dir("seeds");
  auto s = quick_game(dir.path);
  s.seeds = {7, 7};
  const auto out = run_experiment(s);
  ASSERT_EQ(out.rows.size(), 2u);
  std::vector<std::string> traces;
  for (const auto& e : fs::directory_iterator(dir.path))
    if (e.path().filename().string().rfind("trace_", 0) == 0) {
      std::ifstream in(e.path());
      traces.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
  ASSERT_EQ(traces.size(), 2u);
  EXPECT_EQ(traces[0], traces[1]);
  EXPECT_EQ(out.rows[0].final_gap, out.rows[1].final_gap);
}

TEST(RunExperiment, SummaryMatchesLastTraceRow) {
  ScratchDir dir("summary");
  auto s = quick_game(dir.path);
  s.seed = 3;
  const auto out = run_experiment(s);
  ASSERT_EQ(out.rows.size(), 1u);
  const auto back = read_summary(dir.path / "summary.csv");
  ASSERT_EQ(back.size(), 1u);
  fs::path trace;
  for (const auto& e : fs::directory_iterator(dir.path))
    if (e.path().filename().string().rfind("trace_", 0) == 0) trace = e.path();
  std::ifstream in(trace);
  const auto t = ConvergenceTrace::read_csv(in);
  ASSERT_FALSE(t.empty());
  const auto metric = trace_column_from_string(back[0].metric);
  ASSERT_TRUE(metric.has_value()) << back[0].metric;
  EXPECT_EQ(back[0].final_gap, column_value(t.back(), *metric));
  EXPECT_EQ(back[0].grad_budget, t.back().grad_budget);
  EXPECT_EQ(back[0].status, "ok");
}

TEST(RunExperiment, AblationOverPrimalBlocksOnErm) {
  ScratchDir dir("ablate");
  ExperimentSpec s;
  s.problem = ProblemKind::RobustErm;
  s.erm_n = 20;
  s.erm_m = 10;
  s.blocks_n = 20;
  s.ablate_blocks_m = {1, 10};
  s.iters = 100;
  s.repeats = 1;
  s.reference_iters = 20000;
  s.out = dir.path.string();
  const auto out = run_experiment(s);
  ASSERT_EQ(out.rows.size(), 2u);
  EXPECT_EQ(out.failures, 0u);
  EXPECT_NE(out.rows[0].config, out.rows[1].config);
  EXPECT_NE(out.rows[0].grad_budget, out.rows[1].grad_budget);
  EXPECT_EQ(out.rows[0].signature, out.rows[1].signature);
}

TEST(Compare, SingleDirectoryAndRanking) {
  ScratchDir a("cmp_a"), b("cmp_b");
  auto inc = quick_game(a.path);
  inc.iters = 300;
  run_experiment(inc);
  const auto one = compare_runs({a.path});
  ASSERT_EQ(one.rows.size(), 1u);
  EXPECT_EQ(one.rows[0].rank, 1u);

  auto base = quick_game(b.path);
  base.iters = 300;
  base.mode = SolverMode::Baseline;
  run_experiment(base);
  const auto two = compare_runs({a.path, b.path});
  ASSERT_EQ(two.rows.size(), 2u);
  EXPECT_LE(two.rows[0].gap_at_budget, two.rows[1].gap_at_budget);
  EXPECT_NE(to_csv(two).find("rank"), std::string::npos);
}

TEST(Compare, MismatchedProblemsAreRejected) {
  ScratchDir a("mm_a"), b("mm_b");
  run_experiment(quick_game(a.path));
  auto other = quick_game(b.path);
  other.payoff = "1,0;0,3";
  run_experiment(other);
  EXPECT_THROW(compare_runs({a.path, b.path}), std::invalid_argument);
}

TEST(BuildProblem, ReportsBlockingErrors) {
  ExperimentSpec s;
  s.problem = ProblemKind::BoxGame;
  EXPECT_THROW(build_problem(s, 3, 1), std::invalid_argument);
  const auto inst = build_problem(s, 2, 2);
  EXPECT_EQ(inst.problem->structure().num_primal_blocks(), 2u);
  EXPECT_TRUE(inst.reference.has_value());
}
