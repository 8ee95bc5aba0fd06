#include "rbpda/rbpda.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <new>
#include <sstream>
#include <string>

#include "experiment.hpp"

struct rbpda_problem {
  rbpda::ProblemInstance instance;
};

struct rbpda_result {
  rbpda::RunResult run;
};

struct rbpda_experiment {
  rbpda::ExperimentSpec spec;
};

namespace {

thread_local std::string g_last_error;

rbpda_status fail(rbpda_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Maps the active exception to a status code.
rbpda_status translate() {
  try {
    throw;
  } catch (const rbpda::ConfigError& e) {
    return fail(RBPDA_ERR_CONFIG, e.what());
  } catch (const rbpda::DomainError& e) {
    return fail(RBPDA_ERR_DOMAIN, e.what());
  } catch (const std::out_of_range& e) {
    return fail(RBPDA_ERR_OUT_OF_RANGE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(RBPDA_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(RBPDA_ERR_IO, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(RBPDA_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RBPDA_ERR_NO_MEMORY, "out of memory");
  } catch (const std::exception& e) {
    return fail(RBPDA_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RBPDA_ERR_INTERNAL, "unknown error");
  }
}

template <class F>
rbpda_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (...) {
    return translate();
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Eigen::MatrixXd row_major(const double* data, size_t rows, size_t cols) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c)
      A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = data[r * cols + c];
  return A;
}

void copy_point(const rbpda::SaddlePoint& z, double* x, double* y) {
  if (x) std::copy(z.x.data().begin(), z.x.data().end(), x);
  if (y) std::copy(z.y.data().begin(), z.y.data().end(), y);
}

rbpda_status null_arg(const char* name) {
  return fail(RBPDA_ERR_INVALID_ARGUMENT, std::string(name) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* rbpda_version(void) { return "0.1.0"; }

const char* rbpda_last_error(void) { return g_last_error.c_str(); }

void rbpda_string_free(char* s) { std::free(s); }

rbpda_status rbpda_problem_matrix_game(const double* A, size_t rows, size_t cols, int entropy,
                                       rbpda_problem** out) {
  return guarded([&] {
    if (!A) return null_arg("A");
    if (!out) return null_arg("out");
    *out = nullptr;
    auto game = std::make_shared<rbpda::MatrixGameProblem>(rbpda::MatrixGameSpec{
        row_major(A, rows, cols),
        entropy ? rbpda::BregmanKind::NegativeEntropy : rbpda::BregmanKind::Euclidean});
    auto p = std::make_unique<rbpda_problem>();
    if (game->reference()) p->instance.reference = game->reference_point();
    p->instance.problem = game;
    p->instance.metric = rbpda::TraceColumn::SupGap;
    p->instance.sup_gap = true;
    p->instance.signature = "matrix_game";
    *out = p.release();
    return RBPDA_OK;
  });
}

rbpda_status rbpda_problem_box_game(size_t blocks_m, size_t blocks_n, rbpda_problem** out) {
  return guarded([&] {
    if (!out) return null_arg("out");
    *out = nullptr;
    rbpda::ExperimentSpec spec;
    spec.problem = rbpda::ProblemKind::BoxGame;
    auto p = std::make_unique<rbpda_problem>();
    p->instance = rbpda::build_problem(spec, blocks_m, blocks_n);
    *out = p.release();
    return RBPDA_OK;
  });
}

rbpda_status rbpda_problem_robust_erm(uint64_t data_seed, size_t n, size_t m, double flip_prob,
                                      double radius, size_t blocks_m, size_t blocks_n,
                                      rbpda_dual_set dual_set, size_t reference_iters,
                                      rbpda_problem** out) {
  return guarded([&] {
    if (!out) return null_arg("out");
    *out = nullptr;
    rbpda::ExperimentSpec spec;
    spec.problem = rbpda::ProblemKind::RobustErm;
    spec.data_seed = data_seed;
    spec.erm_n = n;
    spec.erm_m = m;
    spec.flip_prob = flip_prob;
    spec.radius = radius;
    spec.blocks_n = blocks_n;
    spec.reference_iters = reference_iters;
    switch (dual_set) {
      case RBPDA_DUAL_AUTO: spec.dual_set = "auto"; break;
      case RBPDA_DUAL_SIMPLEX: spec.dual_set = "simplex"; break;
      case RBPDA_DUAL_BOX: spec.dual_set = "box"; break;
      default: return fail(RBPDA_ERR_INVALID_ARGUMENT, "unknown dual set");
    }
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
      return fail(RBPDA_ERR_INVALID_ARGUMENT, "flip_prob must lie in [0, 1]");
    auto p = std::make_unique<rbpda_problem>();
    p->instance = rbpda::build_problem(spec, blocks_m, blocks_n);
    *out = p.release();
    return RBPDA_OK;
  });
}

rbpda_status rbpda_problem_qp(const double* Q, const double* c, size_t m, const double* G,
                              const double* d, size_t q, size_t blocks_m, size_t blocks_n,
                              rbpda_problem** out) {
  return guarded([&] {
    if (!Q) return null_arg("Q");
    if (!c) return null_arg("c");
    if (q > 0 && (!G || !d)) return null_arg("G and d");
    if (!out) return null_arg("out");
    *out = nullptr;
    rbpda::ConstrainedSpec spec;
    spec.Q = row_major(Q, m, m);
    spec.c = Eigen::Map<const Eigen::VectorXd>(c, static_cast<Eigen::Index>(m));
    spec.G = q > 0 ? row_major(G, q, m) : Eigen::MatrixXd(0, static_cast<Eigen::Index>(m));
    spec.d = q > 0 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(d, static_cast<Eigen::Index>(q)))
                   : Eigen::VectorXd(0);
    auto qp = std::make_shared<rbpda::ConstrainedQpProblem>(spec, blocks_m, blocks_n);
    auto p = std::make_unique<rbpda_problem>();
    p->instance.reference = qp->reference_point();
    p->instance.constrained = qp;
    p->instance.f_star = qp->solution().objective;
    p->instance.problem = qp;
    p->instance.metric = rbpda::TraceColumn::GapRef;
    p->instance.signature = "qp";
    *out = p.release();
    return RBPDA_OK;
  });
}

void rbpda_problem_free(rbpda_problem* problem) { delete problem; }

rbpda_status rbpda_problem_dims(const rbpda_problem* problem, size_t* primal_dim, size_t* dual_dim,
                                size_t* components) {
  return guarded([&] {
    if (!problem) return null_arg("problem");
    const auto& st = problem->instance.problem->structure();
    if (primal_dim) *primal_dim = st.primal_dim();
    if (dual_dim) *dual_dim = st.dual_dim();
    if (components) *components = problem->instance.problem->num_components();
    return RBPDA_OK;
  });
}

rbpda_status rbpda_problem_reference(const rbpda_problem* problem, double* x, double* y) {
  return guarded([&] {
    if (!problem) return null_arg("problem");
    if (!problem->instance.reference) return fail(RBPDA_ERR_INVALID_ARGUMENT, "problem has no reference point");
    copy_point(*problem->instance.reference, x, y);
    return RBPDA_OK;
  });
}

void rbpda_solver_options_default(rbpda_solver_options* options) {
  if (!options) return;
  const rbpda::SolverConfig d;
  options->mode = RBPDA_MODE_INCREASING_BATCH;
  options->eta = d.eta;
  options->max_iters = d.max_iters;
  options->max_budget = d.max_budget;
  options->seed = d.seed;
  options->batch_size = d.batch_size;
  options->restart = d.restart_enabled ? 1 : 0;
  options->restart_threshold = d.restart_threshold;
  options->saturation = 0.0;
  options->checkpoint_every = d.checkpoint_every;
  options->as_mode = d.as_mode ? 1 : 0;
  options->step_scale = d.step_scale;
}

rbpda_status rbpda_solve(const rbpda_problem* problem, const rbpda_solver_options* options,
                         rbpda_result** out) {
  return guarded([&] {
    if (!problem) return null_arg("problem");
    if (!options) return null_arg("options");
    if (!out) return null_arg("out");
    *out = nullptr;
    rbpda::SolverConfig cfg;
    switch (options->mode) {
      case RBPDA_MODE_INCREASING_BATCH: cfg.mode = rbpda::SolverMode::IncreasingBatch; break;
      case RBPDA_MODE_SINGLE_SAMPLE: cfg.mode = rbpda::SolverMode::SingleSample; break;
      case RBPDA_MODE_BASELINE: cfg.mode = rbpda::SolverMode::Baseline; break;
      default: return fail(RBPDA_ERR_INVALID_ARGUMENT, "unknown solver mode");
    }
    cfg.eta = options->eta;
    cfg.max_iters = options->max_iters;
    cfg.max_budget = options->max_budget;
    cfg.seed = options->seed;
    cfg.batch_size = options->batch_size;
    cfg.restart_enabled = options->restart != 0;
    cfg.restart_threshold = options->restart_threshold;
    if (options->saturation > 0.0) cfg.saturation_fraction = options->saturation;
    cfg.checkpoint_every = options->checkpoint_every;
    cfg.as_mode = options->as_mode != 0;
    cfg.step_scale = options->step_scale;
    if (!(cfg.step_scale > 0.0 && cfg.step_scale <= 1.0))
      return fail(RBPDA_ERR_INVALID_ARGUMENT, "step_scale must lie in (0, 1]");

    const auto& inst = problem->instance;
    rbpda::MetricOptions metrics;
    metrics.reference = inst.reference;
    metrics.compute_sup_gap = inst.sup_gap;
    metrics.constrained = inst.constrained.get();
    metrics.f_star = inst.f_star;
    auto res = std::make_unique<rbpda_result>();
    res->run = rbpda::run(*inst.problem, cfg, metrics);
    const bool failed = res->run.status == rbpda::RunStatus::Failed;
    const std::string err = res->run.error;
    *out = res.release();
    return failed ? fail(RBPDA_ERR_RUN_FAILED, err) : RBPDA_OK;
  });
}

void rbpda_result_free(rbpda_result* result) { delete result; }

size_t rbpda_result_iterations(const rbpda_result* result) { return result ? result->run.iterations : 0; }

uint64_t rbpda_result_grad_budget(const rbpda_result* result) {
  return result ? result->run.grad_budget : 0;
}

size_t rbpda_result_restarts(const rbpda_result* result) { return result ? result->run.restarts : 0; }

rbpda_status rbpda_result_final(const rbpda_result* result, double* x, double* y) {
  return guarded([&] {
    if (!result) return null_arg("result");
    copy_point(result->run.final_point, x, y);
    return RBPDA_OK;
  });
}

rbpda_status rbpda_result_average(const rbpda_result* result, double* x, double* y) {
  return guarded([&] {
    if (!result) return null_arg("result");
    copy_point(result->run.average, x, y);
    return RBPDA_OK;
  });
}

size_t rbpda_result_trace_size(const rbpda_result* result) {
  return result ? result->run.trace.rows().size() : 0;
}

rbpda_status rbpda_result_trace_row(const rbpda_result* result, size_t index, rbpda_trace_row* row) {
  return guarded([&] {
    if (!result) return null_arg("result");
    if (!row) return null_arg("row");
    const auto& rows = result->run.trace.rows();
    if (index >= rows.size()) return fail(RBPDA_ERR_OUT_OF_RANGE, "trace row index out of range");
    const auto& r = rows[index];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row->k = r.k;
    row->grad_budget = r.grad_budget;
    row->gap_ref = r.gap_ref.value_or(nan);
    row->sup_gap = r.sup_gap.value_or(nan);
    row->dist_ref = r.dist_ref.value_or(nan);
    row->subopt = r.subopt.value_or(nan);
    row->infeas = r.infeas.value_or(nan);
    return RBPDA_OK;
  });
}

rbpda_status rbpda_result_trace_csv(const rbpda_result* result, char** csv) {
  return guarded([&] {
    if (!result) return null_arg("result");
    if (!csv) return null_arg("csv");
    std::ostringstream o;
    result->run.trace.write_csv(o);
    *csv = dup_string(o.str());
    return RBPDA_OK;
  });
}

rbpda_status rbpda_experiment_new(rbpda_experiment** out) {
  return guarded([&] {
    if (!out) return null_arg("out");
    *out = new rbpda_experiment{};
    return RBPDA_OK;
  });
}

rbpda_status rbpda_experiment_parse_file(const char* path, rbpda_experiment** out) {
  return guarded([&] {
    if (!path) return null_arg("path");
    if (!out) return null_arg("out");
    *out = nullptr;
    auto e = std::make_unique<rbpda_experiment>();
    e->spec = rbpda::parse_config(path);
    *out = e.release();
    return RBPDA_OK;
  });
}

rbpda_status rbpda_experiment_parse_text(const char* text, rbpda_experiment** out) {
  return guarded([&] {
    if (!text) return null_arg("text");
    if (!out) return null_arg("out");
    *out = nullptr;
    auto e = std::make_unique<rbpda_experiment>();
    e->spec = rbpda::parse_config_text(text);
    *out = e.release();
    return RBPDA_OK;
  });
}

rbpda_status rbpda_experiment_set(rbpda_experiment* experiment, const char* key, const char* value) {
  return guarded([&] {
    if (!experiment) return null_arg("experiment");
    if (!key || !value) return null_arg("key and value");
    rbpda::apply_config_value(experiment->spec, key, value);
    return RBPDA_OK;
  });
}

rbpda_status rbpda_experiment_to_text(const rbpda_experiment* experiment, char** text) {
  return guarded([&] {
    if (!experiment) return null_arg("experiment");
    if (!text) return null_arg("text");
    *text = dup_string(rbpda::to_config_text(experiment->spec));
    return RBPDA_OK;
  });
}

rbpda_status rbpda_experiment_run(const rbpda_experiment* experiment, size_t* runs, size_t* failures) {
  return guarded([&] {
    if (!experiment) return null_arg("experiment");
    const auto outcome = rbpda::run_experiment(experiment->spec);
    if (runs) *runs = outcome.rows.size();
    if (failures) *failures = outcome.failures;
    if (outcome.failures > 0) {
      std::string first;
      for (const auto& r : outcome.rows)
        if (r.status != "ok") {
          first = r.config + " seed " + std::to_string(r.seed) + ": " + r.note;
          break;
        }
      return fail(RBPDA_ERR_RUN_FAILED, std::to_string(outcome.failures) + " run(s) failed; first: " + first);
    }
    return RBPDA_OK;
  });
}

void rbpda_experiment_free(rbpda_experiment* experiment) { delete experiment; }

rbpda_status rbpda_compare(const char* const* directories, size_t count, char** csv) {
  return guarded([&] {
    if (!directories && count > 0) return null_arg("directories");
    if (!csv) return null_arg("csv");
    std::vector<std::filesystem::path> dirs;
    for (size_t q = 0; q < count; ++q) {
      if (!directories[q]) return null_arg("directory entry");
      dirs.emplace_back(directories[q]);
    }
    *csv = dup_string(rbpda::to_csv(rbpda::compare_runs(dirs)));
    return RBPDA_OK;
  });
}

}  // extern "C"
