#ifndef MBEQ_H
#define MBEQ_H

#include <stdint.h>
#include <stddef.h>

typedef enum MbeqStatus {
  MBEQ_STATUS_OK = 0,
  MBEQ_STATUS_NULL_POINTER = 1,
  MBEQ_STATUS_INVALID_ARGUMENT = 2,
  MBEQ_STATUS_CONTRACT = 3,
  MBEQ_STATUS_POLE = 4,
  MBEQ_STATUS_NUMERICAL = 5,
  MBEQ_STATUS_PARSE = 6,
  MBEQ_STATUS_IO = 7,
  MBEQ_STATUS_NOT_CONVERGED = 8,
  MBEQ_STATUS_BUFFER_TOO_SMALL = 9,
  MBEQ_STATUS_PANIC = 10,
} MbeqStatus;

/**
 * Opaque scalar equilibrium solution.
 */
typedef struct MbeqScalar MbeqScalar;

/**
 * Largest defects of the point-mass family identities.
 */
typedef struct MbeqAnalyticSummary {
  uint32_t r;
  double a;
  double max_mass_defect;
  double max_balayage_defect;
  double max_closed_form_defect;
  double energy_defect;
  double residue_defect;
  double tail_exponent;
  double tail_exponent_expected;
} MbeqAnalyticSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty when none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *mbeq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mbeq_version(void);

/**
 * Solves the scalar problem for `theta = q/r` and `V(x) = c x^p` on `cells` cells,
 * with the support end located automatically. On success `*out` owns a handle
 * to be released with [`mbeq_scalar_free`]. A solution that misses its KKT
 * tolerance is still returned, together with `NotConverged`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum MbeqStatus mbeq_solve_scalar(uint32_t q,
                                  uint32_t r,
                                  double c,
                                  double p,
                                  uintptr_t cells,
                                  struct MbeqScalar **out);

/**
 * Releases a handle from [`mbeq_solve_scalar`]. Null is ignored.
 *
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void mbeq_scalar_free(struct MbeqScalar *h);

/**
 * Number of cells; 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
uintptr_t mbeq_scalar_len(const struct MbeqScalar *h);

/**
 * Lagrange constant; NaN for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
double mbeq_scalar_ell(const struct MbeqScalar *h);

/**
 * Distribution function at `x`; NaN for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
double mbeq_scalar_cdf(const struct MbeqScalar *h, double x);

/**
 * Right end of the last support interval; NaN for a null handle or empty support.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
double mbeq_scalar_support_end(const struct MbeqScalar *h);

/**
 * KKT residuals on and off the support.
 *
 * # Safety
 * `h` must be a live handle; the outputs must be writable or null.
 */
enum MbeqStatus mbeq_scalar_residuals(const struct MbeqScalar *h,
                                      double *on_support,
                                      double *off_support);

/**
 * Copies cell nodes and masses into caller buffers of length `len`.
 * Either buffer may be null. Fails with `BufferTooSmall` when `len` is short.
 *
 * # Safety
 * Non-null buffers must hold `len` writable doubles.
 */
enum MbeqStatus mbeq_scalar_copy(const struct MbeqScalar *h,
                                 double *nodes,
                                 double *masses,
                                 uintptr_t len);

/**
 * Checks the point-mass family of `(r, a)`.
 *
 * # Safety
 * `out` must point to writable storage for one summary.
 */
enum MbeqStatus mbeq_analytic_check(uint32_t r, double a, struct MbeqAnalyticSummary *out);

/**
 * Runs a JSON run config and writes its artifacts into `out_dir`, exactly as
 * the command-line tool does.
 *
 * # Safety
 * Both arguments must be valid NUL-terminated strings.
 */
enum MbeqStatus mbeq_run_config(const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBEQ_H */
