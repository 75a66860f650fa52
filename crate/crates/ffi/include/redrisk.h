#ifndef REDRISK_H
#define REDRISK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RrStatus {
  RR_STATUS_OK = 0,
  RR_STATUS_NULL_POINTER = 1,
  RR_STATUS_INVALID_UTF8 = 2,
  RR_STATUS_CONFIG_ERROR = 3,
  RR_STATUS_DATA_ERROR = 4,
  RR_STATUS_IO_ERROR = 5,
  RR_STATUS_OUT_OF_RANGE = 6,
  RR_STATUS_PANIC = 7,
} RrStatus;

/**
 * A model archive written by an experiment run.
 */
typedef struct RrArchive RrArchive;

/**
 * A loaded or generated cohort.
 */
typedef struct RrCohort RrCohort;

/**
 * Scores produced by [`rr_archive_score`].
 */
typedef struct RrScores RrScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *rr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rr_version(void);

/**
 * Generates a synthetic cohort. `synthetic_toml` holds the body of a
 * `[cohort.synthetic]` section, or null for defaults.
 *
 * # Safety
 * `synthetic_toml` is null or a valid C string; `out` is a valid pointer.
 */
enum RrStatus rr_cohort_generate(const char *synthetic_toml, uint64_t seed, struct RrCohort **out);

/**
 * Loads a cohort file. `format` is `event-lines`, `cohort-archive` or null
 * to detect it.
 *
 * # Safety
 * `path` is a valid C string, `format` is null or a valid C string, `out`
 * is a valid pointer.
 */
enum RrStatus rr_cohort_load(const char *path, const char *format, struct RrCohort **out);

/**
 * # Safety
 * `cohort` is a live handle; `path` and `format` as for [`rr_cohort_load`],
 * except that a null `format` means `event-lines`.
 */
enum RrStatus rr_cohort_save(const struct RrCohort *cohort, const char *path, const char *format);

/**
 * Patient and assessment counts of a cohort.
 *
 * # Safety
 * `cohort` is a live handle; the out pointers are valid or null.
 */
enum RrStatus rr_cohort_counts(const struct RrCohort *cohort,
                               size_t *patients,
                               size_t *assessments);

/**
 * # Safety
 * `cohort` is null or a handle not yet freed.
 */
void rr_cohort_free(struct RrCohort *cohort);

/**
 * Mann-Whitney AUC with its 95% interval. Labels are +1 / -1.
 *
 * # Safety
 * `labels` and `scores` point to `n` readable values; out pointers are
 * valid or null.
 */
enum RrStatus rr_auc(const int8_t *labels,
                     const double *scores,
                     size_t n,
                     double *auc,
                     double *ci_lo,
                     double *ci_hi);

/**
 * Recall, precision and F-measure of +1 / -1 predictions.
 *
 * # Safety
 * `labels` and `predicted` point to `n` readable values; out pointers are
 * valid or null.
 */
enum RrStatus rr_confusion(const int8_t *labels,
                           const int8_t *predicted,
                           size_t n,
                           double *recall,
                           double *precision,
                           double *f_measure);

/**
 * Runs the experiment protocol into `out_dir`. A null `config_path` runs
 * the default configuration. `n_rows` receives the metric row count.
 *
 * # Safety
 * `config_path` is null or a valid C string, `out_dir` is a valid C string,
 * `n_rows` is valid or null.
 */
enum RrStatus rr_run_experiment(const char *config_path, const char *out_dir, size_t *n_rows);

/**
 * # Safety
 * `path` is a valid C string; `out` is a valid pointer.
 */
enum RrStatus rr_archive_load(const char *path, struct RrArchive **out);

/**
 * Number of fitted models in an archive.
 *
 * # Safety
 * `archive` is a live handle; `n` is valid or null.
 */
enum RrStatus rr_archive_model_count(const struct RrArchive *archive, size_t *n);

/**
 * # Safety
 * `archive` is null or a handle not yet freed.
 */
void rr_archive_free(struct RrArchive *archive);

/**
 * Scores every assessment of `cohort` with every archived model.
 *
 * # Safety
 * `archive` and `cohort` are live handles; `out` is a valid pointer.
 */
enum RrStatus rr_archive_score(const struct RrArchive *archive,
                               const struct RrCohort *cohort,
                               struct RrScores **out);

/**
 * # Safety
 * `scores` is a live handle; `n` is valid or null.
 */
enum RrStatus rr_scores_len(const struct RrScores *scores, size_t *n);

/**
 * Horizon, score and label of row `i`.
 *
 * # Safety
 * `scores` is a live handle; out pointers are valid or null.
 */
enum RrStatus rr_scores_get(const struct RrScores *scores,
                            size_t i,
                            uint32_t *horizon_days,
                            double *score,
                            int8_t *label);

/**
 * Writes the scores as CSV.
 *
 * # Safety
 * `scores` is a live handle; `path` is a valid C string.
 */
enum RrStatus rr_scores_write_csv(const struct RrScores *scores, const char *path);

/**
 * # Safety
 * `scores` is null or a handle not yet freed.
 */
void rr_scores_free(struct RrScores *scores);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REDRISK_H */
