#ifndef UINFC_H
#define UINFC_H

/* Generated by cbindgen from crates/uinfc-ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define UINFC_OK 0

#define UINFC_ERR_NULL -1

#define UINFC_ERR_PARAM -2

#define UINFC_ERR_CONFIG -3

#define UINFC_ERR_NUMERIC -4

#define UINFC_ERR_INFEASIBLE -5

#define UINFC_ERR_IO -6

#define UINFC_ERR_PANIC -7

#define UINFC_VERDICT_STABLE 0

#define UINFC_VERDICT_UNSTABLE 2

#define UINFC_VERDICT_INCONCLUSIVE 3

/**
 * A control Lyapunov function.
 */
typedef struct UinfcClf UinfcClf;

/**
 * A parsed run configuration.
 */
typedef struct UinfcRun UinfcRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, nul-terminated and
 * truncated to `cap` bytes, into `buf`. Returns the buffer size needed for
 * the full message.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
uintptr_t uinfc_last_error(char *buf, uintptr_t cap);

/**
 * Parses a configuration file into a new run handle.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
int32_t uinfc_run_load(const char *path, struct UinfcRun **out);

/**
 * Replaces every seed of the run with streams derived from `seed`.
 *
 * # Safety
 * `run` must be a live handle from [`uinfc_run_load`].
 */
int32_t uinfc_run_set_seed(struct UinfcRun *run, uint64_t seed);

/**
 * Simulates the run, writes the trajectory CSV to `csv_path` and reports
 * the verdict as a `UINFC_VERDICT_*` code. `t_entry` receives the entry
 * time for stable verdicts and NaN otherwise.
 *
 * # Safety
 * `run` must be a live handle; `csv_path` a nul-terminated string;
 * `verdict` and `t_entry` writable.
 */
int32_t uinfc_run_simulate(const struct UinfcRun *run,
                           const char *csv_path,
                           int32_t *verdict,
                           double *t_entry);

/**
 * # Safety
 * `run` must be null or a handle from [`uinfc_run_load`] not yet freed.
 */
void uinfc_run_free(struct UinfcRun *run);

/**
 * The ENDI CLF calibrated on the input box `[−3, 3]²`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t uinfc_endi_clf_new(struct UinfcClf **out);

/**
 * `V(x) = ‖x‖` in `dim` dimensions with decay `w(x) = decay_gain·‖x‖`.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t uinfc_norm_clf_new(uintptr_t dim, double decay_gain, struct UinfcClf **out);

/**
 * # Safety
 * `clf` must be a live handle; `dim` writable.
 */
int32_t uinfc_clf_dim(const struct UinfcClf *clf, uintptr_t *dim);

/**
 * Evaluates `V(x)`.
 *
 * # Safety
 * `clf` must be a live handle; `x` must point to `len` doubles; `value`
 * must be writable.
 */
int32_t uinfc_clf_value(const struct UinfcClf *clf, const double *x, uintptr_t len, double *value);

/**
 * Approximate Moreau envelope minimizer with gap at most `eps_target`.
 * Writes the minimizer to `y` (length `len`), the objective value to
 * `value` and the certified gap to `eps_achieved`.
 *
 * # Safety
 * `clf` must be a live handle; `x` readable and `y` writable for `len`
 * doubles; `value` and `eps_achieved` writable.
 */
int32_t uinfc_moreau_envelope(const struct UinfcClf *clf,
                              const double *x,
                              uintptr_t len,
                              double alpha,
                              double eps_target,
                              uint64_t seed,
                              double *y,
                              double *value,
                              double *eps_achieved);

/**
 * # Safety
 * `clf` must be null or a handle from a `uinfc_*_clf_new` function not yet
 * freed.
 */
void uinfc_clf_free(struct UinfcClf *clf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UINFC_H */
