#ifndef TABULAR_OBDA_H
#define TABULAR_OBDA_H

/* Generated by cbindgen from the tabular-obda-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Non-zero values mirror the command-line exit codes.
 */
typedef enum TobdaStatus {
  TOBDA_STATUS_OK = 0,
  TOBDA_STATUS_INPUT_ERROR = 2,
  TOBDA_STATUS_CONSTRAINT_VIOLATION = 3,
  TOBDA_STATUS_ENGINE_ERROR = 4,
  TOBDA_STATUS_MONOTONICITY_VIOLATION = 5,
  TOBDA_STATUS_NULL_ARGUMENT = 6,
  TOBDA_STATUS_PANIC = 7,
} TobdaStatus;

typedef struct TobdaConfig TobdaConfig;

typedef struct TobdaRun TobdaRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next call
 * on the same thread.
 */
const char *tobda_last_error(void);

/**
 * New configuration in enhanced mode. `metadata` may be null.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum TobdaStatus tobda_config_new(const char *data_dir,
                                  const char *mapping,
                                  const char *metadata,
                                  const char *query,
                                  struct TobdaConfig **out);

/**
 * # Safety
 * `cfg` must come from `tobda_config_new` and not be used afterwards.
 */
void tobda_config_free(struct TobdaConfig *cfg);

/**
 * `mode` is one of "enhanced", "baseline", "noselect".
 *
 * # Safety
 * `cfg` must be a live config; `mode` NUL-terminated.
 */
enum TobdaStatus tobda_config_set_mode(struct TobdaConfig *cfg, const char *mode);

/**
 * Connection string; null restores the default.
 *
 * # Safety
 * `cfg` must be a live config; `db` null or NUL-terminated.
 */
enum TobdaStatus tobda_config_set_db(struct TobdaConfig *cfg, const char *db);

/**
 * # Safety
 * `cfg` must be a live config.
 */
enum TobdaStatus tobda_config_set_repetitions(struct TobdaConfig *cfg, uint32_t n);

/**
 * Index selectivity threshold.
 *
 * # Safety
 * `cfg` must be a live config.
 */
enum TobdaStatus tobda_config_set_tau(struct TobdaConfig *cfg, double tau);

/**
 * Non-zero `warn` nulls out violating values instead of failing.
 *
 * # Safety
 * `cfg` must be a live config.
 */
enum TobdaStatus tobda_config_set_warn(struct TobdaConfig *cfg, bool warn);

/**
 * # Safety
 * `cfg` must be a live config.
 */
enum TobdaStatus tobda_config_set_no_fk(struct TobdaConfig *cfg, bool on);

/**
 * # Safety
 * `cfg` must be a live config.
 */
enum TobdaStatus tobda_config_set_no_index(struct TobdaConfig *cfg, bool on);

/**
 * # Safety
 * `cfg` must be a live config.
 */
enum TobdaStatus tobda_config_set_jobs(struct TobdaConfig *cfg, uint32_t jobs);

/**
 * Runs the configured mode.
 *
 * # Safety
 * `cfg` must be a live config; `out` writable.
 */
enum TobdaStatus tobda_run(const struct TobdaConfig *cfg, struct TobdaRun **out);

/**
 * Runs all modes; writes the comparison report as JSON.
 *
 * # Safety
 * `cfg` must be a live config; `json_out` writable. Free the string with
 * `tobda_string_free`.
 */
enum TobdaStatus tobda_compare(const struct TobdaConfig *cfg, char **json_out);

/**
 * # Safety
 * `r` must come from `tobda_run` and not be used afterwards.
 */
void tobda_run_free(struct TobdaRun *r);

/**
 * # Safety
 * `r` must be a live run or null.
 */
size_t tobda_run_answer_count(const struct TobdaRun *r);

/**
 * # Safety
 * `r` must be a live run or null.
 */
uint64_t tobda_run_bytes_read(const struct TobdaRun *r);

/**
 * Median total wall time in seconds.
 *
 * # Safety
 * `r` must be a live run or null.
 */
double tobda_run_total_seconds(const struct TobdaRun *r);

/**
 * Answers as CSV. Free with `tobda_string_free`.
 *
 * # Safety
 * `r` must be a live run.
 */
char *tobda_run_results_csv(const struct TobdaRun *r);

/**
 * Answers as SPARQL results JSON. Free with `tobda_string_free`.
 *
 * # Safety
 * `r` must be a live run.
 */
char *tobda_run_results_json(const struct TobdaRun *r);

/**
 * Timing report as JSON. Free with `tobda_string_free`.
 *
 * # Safety
 * `r` must be a live run.
 */
char *tobda_run_report_json(const struct TobdaRun *r);

/**
 * Generated DDL. Free with `tobda_string_free`.
 *
 * # Safety
 * `r` must be a live run.
 */
char *tobda_run_ddl(const struct TobdaRun *r);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void tobda_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TABULAR_OBDA_H */
