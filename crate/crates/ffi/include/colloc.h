#ifndef COLLOC_H
#define COLLOC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Hermite-Simpson variant selector for [`col_solve`].
typedef enum ColHsForm {
  COL_HS_FORM_SEPARATED = 0,
  COL_HS_FORM_COMPRESSED = 1,
} ColHsForm;

// Result codes of every fallible call.
typedef enum ColStatus {
  COL_STATUS_OK = 0,
  COL_STATUS_NULL_POINTER = 1,
  COL_STATUS_INVALID_ARGUMENT = 2,
  COL_STATUS_UNKNOWN_PROBLEM = 3,
  COL_STATUS_UNKNOWN_METHOD = 4,
  // The solve finished without converging; the solution handle is still
  // returned and must be freed.
  COL_STATUS_NOT_CONVERGED = 5,
  COL_STATUS_PANIC = 6,
} ColStatus;

// Opaque problem handle.
typedef struct ColProblem ColProblem;

// Opaque solution handle.
typedef struct ColSolution ColSolution;

// Dynamics callback: writes the `n_q` highest derivatives into `out` given
// the level-major stack `(q, q', ..., q^(M-1))`, the controls and the time.
// Null is rejected.
typedef void (*ColDynamicsFn)(void *user_data,
                              const double *state,
                              const double *u,
                              double t,
                              double *out);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *col_last_error_message(void);

// Trapezoidal step of order `order`: writes the stack at `t_k + h` into
// `out` (`order` values) from the stack `y_k` and the samples `g_k`, `g_k1`.
//
// # Safety
// `y_k` and `out` must point to `order` valid doubles.
enum ColStatus col_tz_step(size_t order,
                           const double *y_k,
                           double g_k,
                           double g_k1,
                           double h,
                           double *out);

// Hermite-Simpson step with the midpoint in eliminated form: writes the
// stacks at `t_k + h` and `t_k + h/2` into `out_end` and `out_mid`.
//
// # Safety
// `y_k`, `y_k1`, `out_end` and `out_mid` must point to `order` valid doubles.
enum ColStatus col_hs_step(size_t order,
                           const double *y_k,
                           const double *y_k1,
                           double g_k,
                           double g_c,
                           double g_k1,
                           double h,
                           double *out_end,
                           double *out_mid);

// Looks up a built-in problem (`cartpole`, `oscillator`, `triple_integrator`).
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum ColStatus col_problem_by_name(const char *name, struct ColProblem **out);

// Builds a problem from a C dynamics callback: `q^(M) = g(...)` on
// `[0, t_f]`, cost the integral of `|u|^2`, and the full stacks fixed to
// `x0` at the start and `xf` at the end (`n_q * order` values each).
//
// # Safety
// `x0` and `xf` must point to `n_q * order` doubles. `dynamics` must stay
// callable with `user_data` for the lifetime of the problem and of every
// solution created from it.
enum ColStatus col_problem_custom(size_t n_q,
                                  size_t n_u,
                                  size_t order,
                                  double t_f,
                                  ColDynamicsFn dynamics,
                                  void *user_data,
                                  const double *x0,
                                  const double *xf,
                                  struct ColProblem **out);

// Dynamics order `M` of the problem, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live problem handle.
size_t col_problem_order(const struct ColProblem *p);

// Number of configuration coordinates, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live problem handle.
size_t col_problem_n_q(const struct ColProblem *p);

// Number of controls, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live problem handle.
size_t col_problem_n_u(const struct ColProblem *p);

// Releases a problem. Null is ignored.
//
// # Safety
// `p` must come from this library and not be used afterwards.
void col_problem_free(struct ColProblem *p);

// Transcribes `problem` with `method` (`tz1`, `tz2`, `tzm`, `hs1`, `hs2`,
// `hsm`) on `n` intervals and solves it with default solver options.
//
// Returns `Ok` on convergence and `NotConverged` otherwise; in both cases
// `*out` receives a solution handle.
//
// # Safety
// `problem` must be a live handle, `method` a NUL-terminated string and
// `out` writable.
enum ColStatus col_solve(const struct ColProblem *problem,
                         const char *method,
                         enum ColHsForm hs_form,
                         size_t n,
                         struct ColSolution **out);

// Objective value, or NaN for a null handle.
//
// # Safety
// `s` must be null or a live solution handle.
double col_solution_cost(const struct ColSolution *s);

// Scaled KKT residual at the returned point, or NaN for a null handle.
//
// # Safety
// `s` must be null or a live solution handle.
double col_solution_kkt_residual(const struct ColSolution *s);

// Whether the solver converged.
//
// # Safety
// `s` must be null or a live solution handle.
bool col_solution_converged(const struct ColSolution *s);

// Number of NLP decision variables, or 0 for a null handle.
//
// # Safety
// `s` must be null or a live solution handle.
size_t col_solution_n_vars(const struct ColSolution *s);

// `r`-th time derivative (`r <= M`) of the configuration at `t`, written
// into `out` (`n_q` values; `cap` is the buffer length).
//
// # Safety
// `s` must be a live handle and `out` must hold `cap` doubles.
enum ColStatus col_solution_eval(const struct ColSolution *s,
                                 double t,
                                 size_t r,
                                 double *out,
                                 size_t cap);

// Reconstructed control at `t` (`n_u` values).
//
// # Safety
// `s` must be a live handle and `out` must hold `cap` doubles.
enum ColStatus col_solution_control(const struct ColSolution *s, double t, double *out, size_t cap);

// Integrated first-order dynamic error per coordinate (`n_q` values).
//
// # Safety
// `s` must be a live handle and `out` must hold `cap` doubles.
enum ColStatus col_solution_e1(const struct ColSolution *s, double *out, size_t cap);

// Integrated second-order dynamic error per coordinate (`n_q` values).
//
// # Safety
// `s` must be a live handle and `out` must hold `cap` doubles.
enum ColStatus col_solution_e2(const struct ColSolution *s, double *out, size_t cap);

// Releases a solution. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void col_solution_free(struct ColSolution *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLLOC_H */
