#ifndef TRANSONIC_H
#define TRANSONIC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call. Values 2 to 4 match the exit codes of the binary.
 */
typedef enum TransonicStatus {
  TRANSONIC_STATUS_OK = 0,
  /**
   * Null pointer, invalid UTF-8 or a handle of the wrong kind.
   */
  TRANSONIC_STATUS_INVALID_ARGUMENT = 1,
  /**
   * The configuration or input data were rejected.
   */
  TRANSONIC_STATUS_VALIDATION = 2,
  /**
   * A solver failed to produce a state.
   */
  TRANSONIC_STATUS_SOLVER = 3,
  /**
   * The property suite ran and at least one check failed.
   */
  TRANSONIC_STATUS_VERIFY_FAILED = 4,
  /**
   * The requested entry does not exist in the report.
   */
  TRANSONIC_STATUS_NOT_FOUND = 5,
  /**
   * A panic was caught at the boundary.
   */
  TRANSONIC_STATUS_PANIC = 6,
} TransonicStatus;

/**
 * Parsed and validated run configuration.
 */
typedef struct TransonicConfig TransonicConfig;

/**
 * Result of a solve or of a verification run.
 */
typedef struct TransonicReport TransonicReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *transonic_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *transonic_version(void);

/**
 * Fix the number of solver worker threads for the whole process. Only the
 * first call can take effect; later calls report `Validation`.
 */
enum TransonicStatus transonic_set_threads(size_t threads);

/**
 * Parse and validate a JSON configuration.
 *
 * # Safety
 * `json` must be null or a NUL-terminated string; `out` must be null or
 * point to writable storage for one pointer.
 */
enum TransonicStatus transonic_config_from_json(const char *json, struct TransonicConfig **out);

/**
 * Load, parse and validate a JSON configuration file.
 *
 * # Safety
 * As for [`transonic_config_from_json`], with `path` a file path.
 */
enum TransonicStatus transonic_config_load(const char *path, struct TransonicConfig **out);

/**
 * Release a configuration. Null is ignored.
 *
 * # Safety
 * `cfg` must be null or a handle from this library not freed before.
 */
void transonic_config_free(struct TransonicConfig *cfg);

/**
 * Background profile and admissibility margins; files go to `out_dir`.
 *
 * # Safety
 * `cfg` must be a live config handle, `out_dir` a NUL-terminated path and
 * `out` writable storage for one pointer.
 */
enum TransonicStatus transonic_run_background(const struct TransonicConfig *cfg,
                                              const char *out_dir,
                                              struct TransonicReport **out);

/**
 * Irrotational fixed point.
 *
 * # Safety
 * As for [`transonic_run_background`].
 */
enum TransonicStatus transonic_solve_potential(const struct TransonicConfig *cfg,
                                               const char *out_dir,
                                               struct TransonicReport **out);

/**
 * Rotational fixed point.
 *
 * # Safety
 * As for [`transonic_run_background`].
 */
enum TransonicStatus transonic_solve_beltrami(const struct TransonicConfig *cfg,
                                              const char *out_dir,
                                              struct TransonicReport **out);

/**
 * Property suite. A report is produced even when checks fail, in which case
 * the status is `VerifyFailed`.
 *
 * # Safety
 * As for [`transonic_run_background`].
 */
enum TransonicStatus transonic_verify(const struct TransonicConfig *cfg,
                                      const char *out_dir,
                                      struct TransonicReport **out);

/**
 * Report as JSON. The string is owned by the report.
 *
 * # Safety
 * `report` must be null or a live report handle.
 */
const char *transonic_report_json(const struct TransonicReport *report);

/**
 * Named residual of a solve report.
 *
 * # Safety
 * `report` must be a live report handle, `name` a NUL-terminated string and
 * `value` writable.
 */
enum TransonicStatus transonic_report_residual(const struct TransonicReport *report,
                                               const char *name,
                                               double *value);

/**
 * Largest sonic-surface displacement of a solve report.
 *
 * # Safety
 * `report` must be a live report handle and `value` writable.
 */
enum TransonicStatus transonic_report_sup_xi(const struct TransonicReport *report, double *value);

/**
 * Number of checks and of failed checks in a verify report.
 *
 * # Safety
 * `report` must be a live report handle; `checks` and `failed` writable.
 */
enum TransonicStatus transonic_report_checks(const struct TransonicReport *report,
                                             size_t *checks,
                                             size_t *failed);

/**
 * Release a report. Null is ignored.
 *
 * # Safety
 * `report` must be null or a handle from this library not freed before.
 */
void transonic_report_free(struct TransonicReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSONIC_H */
