/*
 * rbpda: randomized block primal-dual solver for finite-sum convex-concave
 * saddle-point problems, C interface.
 *
 * Every function returning rbpda_status reports failures through the status
 * code; rbpda_last_error() then describes the failure for the calling thread.
 * Handles are opaque and owned by the caller once created. Strings returned
 * through char** are released with rbpda_string_free.
 */
#ifndef RBPDA_RBPDA_H
#define RBPDA_RBPDA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RBPDA_API __declspec(dllexport)
#elif defined(__GNUC__)
#define RBPDA_API __attribute__((visibility("default")))
#else
#define RBPDA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rbpda_status {
  RBPDA_OK = 0,
  RBPDA_ERR_INVALID_ARGUMENT = 1,
  RBPDA_ERR_DOMAIN = 2,       /* a point left the domain of a prox term */
  RBPDA_ERR_OUT_OF_RANGE = 3,
  RBPDA_ERR_CONFIG = 4,       /* experiment configuration rejected */
  RBPDA_ERR_IO = 5,
  RBPDA_ERR_RUN_FAILED = 6,   /* a run stopped early; partial results kept */
  RBPDA_ERR_NO_MEMORY = 7,
  RBPDA_ERR_INTERNAL = 8
} rbpda_status;

RBPDA_API const char* rbpda_version(void);
/* Message for the last failing call on this thread; "" when none. */
RBPDA_API const char* rbpda_last_error(void);
RBPDA_API void rbpda_string_free(char* s);

/* ---- problems ---------------------------------------------------------- */

typedef struct rbpda_problem rbpda_problem;

/* min over the x-simplex, max over the y-simplex of x^T A y. A is row-major
   rows x cols; entropy != 0 selects the entropy geometry on both simplices. */
RBPDA_API rbpda_status rbpda_problem_matrix_game(const double* A, size_t rows, size_t cols,
                                                 int entropy, rbpda_problem** out);

/* The 4 x 4 bilinear test game on [0,1]^4 x [0,1]^4; block counts divide 4. */
RBPDA_API rbpda_status rbpda_problem_box_game(size_t blocks_m, size_t blocks_n, rbpda_problem** out);

typedef enum rbpda_dual_set {
  RBPDA_DUAL_AUTO = 0, /* simplex for one dual block, box otherwise */
  RBPDA_DUAL_SIMPLEX = 1,
  RBPDA_DUAL_BOX = 2
} rbpda_dual_set;

/* Distributionally robust logistic regression on generated data. The
   reference point comes from a long full-gradient run of at most
   reference_iters iterations. */
RBPDA_API rbpda_status rbpda_problem_robust_erm(uint64_t data_seed, size_t n, size_t m,
                                                double flip_prob, double radius, size_t blocks_m,
                                                size_t blocks_n, rbpda_dual_set dual_set,
                                                size_t reference_iters, rbpda_problem** out);

/* min 1/2 x^T Q x + c^T x  s.t.  G x <= d; Q is m x m, G is q x m, both
   row-major. G and d may be NULL when q == 0. */
RBPDA_API rbpda_status rbpda_problem_qp(const double* Q, const double* c, size_t m, const double* G,
                                        const double* d, size_t q, size_t blocks_m, size_t blocks_n,
                                        rbpda_problem** out);

RBPDA_API void rbpda_problem_free(rbpda_problem* problem);

RBPDA_API rbpda_status rbpda_problem_dims(const rbpda_problem* problem, size_t* primal_dim,
                                          size_t* dual_dim, size_t* components);

/* Copies the reference saddle point into x (primal_dim) and y (dual_dim). */
RBPDA_API rbpda_status rbpda_problem_reference(const rbpda_problem* problem, double* x, double* y);

/* ---- solver ------------------------------------------------------------ */

typedef enum rbpda_mode {
  RBPDA_MODE_INCREASING_BATCH = 0,
  RBPDA_MODE_SINGLE_SAMPLE = 1,
  RBPDA_MODE_BASELINE = 2
} rbpda_mode;

typedef struct rbpda_solver_options {
  rbpda_mode mode;
  double eta;
  size_t max_iters;
  uint64_t max_budget;      /* 0: unlimited */
  uint64_t seed;
  size_t batch_size;        /* single-sample mode */
  int restart;              /* increasing-batch mode */
  double restart_threshold;
  double saturation;        /* cap on v as a fraction of p; 0: none */
  size_t checkpoint_every;  /* 0: log-spaced */
  int as_mode;
  double step_scale;
} rbpda_solver_options;

RBPDA_API void rbpda_solver_options_default(rbpda_solver_options* options);

typedef struct rbpda_result rbpda_result;

/* On RBPDA_ERR_RUN_FAILED *out still receives the partial result. */
RBPDA_API rbpda_status rbpda_solve(const rbpda_problem* problem, const rbpda_solver_options* options,
                                   rbpda_result** out);
RBPDA_API void rbpda_result_free(rbpda_result* result);

RBPDA_API size_t rbpda_result_iterations(const rbpda_result* result);
RBPDA_API uint64_t rbpda_result_grad_budget(const rbpda_result* result);
RBPDA_API size_t rbpda_result_restarts(const rbpda_result* result);
RBPDA_API rbpda_status rbpda_result_final(const rbpda_result* result, double* x, double* y);
RBPDA_API rbpda_status rbpda_result_average(const rbpda_result* result, double* x, double* y);

/* Missing metrics are NaN. */
typedef struct rbpda_trace_row {
  size_t k;
  uint64_t grad_budget;
  double gap_ref;
  double sup_gap;
  double dist_ref;
  double subopt;
  double infeas;
} rbpda_trace_row;

RBPDA_API size_t rbpda_result_trace_size(const rbpda_result* result);
RBPDA_API rbpda_status rbpda_result_trace_row(const rbpda_result* result, size_t index,
                                              rbpda_trace_row* row);
RBPDA_API rbpda_status rbpda_result_trace_csv(const rbpda_result* result, char** csv);

/* ---- experiments ------------------------------------------------------- */

typedef struct rbpda_experiment rbpda_experiment;

RBPDA_API rbpda_status rbpda_experiment_new(rbpda_experiment** out);
RBPDA_API rbpda_status rbpda_experiment_parse_file(const char* path, rbpda_experiment** out);
RBPDA_API rbpda_status rbpda_experiment_parse_text(const char* text, rbpda_experiment** out);
/* Sets one configuration key (same names as in config files). */
RBPDA_API rbpda_status rbpda_experiment_set(rbpda_experiment* experiment, const char* key,
                                            const char* value);
RBPDA_API rbpda_status rbpda_experiment_to_text(const rbpda_experiment* experiment, char** text);
/* Writes artifacts into the configured output directory. Returns
   RBPDA_ERR_RUN_FAILED when at least one run failed. */
RBPDA_API rbpda_status rbpda_experiment_run(const rbpda_experiment* experiment, size_t* runs,
                                            size_t* failures);
RBPDA_API void rbpda_experiment_free(rbpda_experiment* experiment);

/* Ranked comparison table (CSV) over experiment output directories. */
RBPDA_API rbpda_status rbpda_compare(const char* const* directories, size_t count, char** csv);

#ifdef __cplusplus
}
#endif

#endif /* RBPDA_RBPDA_H */
