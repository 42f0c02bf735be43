#ifndef CIRRHOSIS_HORIZON_H
#define CIRRHOSIS_HORIZON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum ChStatus {
  CH_STATUS_OK = 0,
  CH_STATUS_NULL_POINTER = 1,
  CH_STATUS_INVALID_ARGUMENT = 2,
  CH_STATUS_CONFIG = 3,
  CH_STATUS_MISSING_DEPENDENCY = 4,
  CH_STATUS_IO = 5,
  CH_STATUS_DATA = 6,
  CH_STATUS_DOMAIN = 7,
  CH_STATUS_PANIC = 8,
} ChStatus;

/**
 * A loaded model.
 */
typedef struct ChModel ChModel;

/**
 * A loaded record set.
 */
typedef struct ChRecords ChRecords;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ch_last_error_message(void);

void ch_clear_error(void);

/**
 * Library version as a static string.
 */
const char *ch_version(void);

/**
 * FIB-4 from age (years), AST and ALT (U/L) and platelets (10^9/L).
 *
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
enum ChStatus ch_fib4(double age_years, double ast, double alt, double platelets, double *out);

/**
 * FIB-5 from AST, ALT and ALP (U/L), albumin (g/dL) and platelets.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
enum ChStatus ch_fib5(double ast,
                      double alt,
                      double platelets,
                      double albumin_g_per_dl,
                      double alp,
                      double *out);

/**
 * Area under the ROC curve. Labels are 0 or 1; ties get half credit.
 *
 * # Safety
 * `scores` and `labels` must point to `n` readable elements; `out` to one
 * writable `double`.
 */
enum ChStatus ch_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Loads a `model.json` file.
 *
 * # Safety
 * `path` must be a valid string and `out` writable.
 */
enum ChStatus ch_model_load(const char *path, struct ChModel **out);

/**
 * Parses a model from JSON text.
 *
 * # Safety
 * `json` must be a valid string and `out` writable.
 */
enum ChStatus ch_model_from_json(const char *json, struct ChModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void ch_model_free(struct ChModel *model);

/**
 * Number of input features the model expects.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum ChStatus ch_model_n_features(const struct ChModel *model, size_t *out);

/**
 * Name of feature `index`, owned by the handle, or null when out of range.
 *
 * # Safety
 * `model` must be a live handle.
 */
const char *ch_model_feature_name(const struct ChModel *model, size_t index);

/**
 * Predicted probability for one row laid out in feature order.
 *
 * # Safety
 * `row` must point to `n` readable doubles; `out` to one writable double.
 */
enum ChStatus ch_model_predict_proba(const struct ChModel *model,
                                     const double *row,
                                     size_t n,
                                     double *out);

/**
 * Loads the five record CSVs from a directory.
 *
 * # Safety
 * `dir` must be a valid string and `out` writable.
 */
enum ChStatus ch_records_load(const char *dir, struct ChRecords **out);

/**
 * # Safety
 * `records` must be a live handle and `out` writable.
 */
enum ChStatus ch_records_n_patients(const struct ChRecords *records, size_t *out);

/**
 * # Safety
 * `records` must be null or a handle from this library not yet freed.
 */
void ch_records_free(struct ChRecords *records);

/**
 * Runs one pipeline stage: `generate`, `cohort`, `features`, `train`,
 * `eval` or `eval-benchmark`. A null `config_path` uses the defaults;
 * `output_dir` and `data_dir`, when not null, override the configured
 * directories.
 *
 * # Safety
 * String arguments must be null or valid strings.
 */
enum ChStatus ch_run_stage(const char *config_path,
                           const char *data_dir,
                           const char *output_dir,
                           const char *stage);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIRRHOSIS_HORIZON_H */
