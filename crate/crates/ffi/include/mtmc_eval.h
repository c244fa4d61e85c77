#ifndef MTMC_EVAL_H
#define MTMC_EVAL_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Add per-camera rows to the report.
 */
#define MTMC_PER_CAMERA 1

/**
 * Add handover diagnostics.
 */
#define MTMC_DIAGNOSTICS 2

/**
 * Add the truth-to-result mapping.
 */
#define MTMC_MAPPING 4

/**
 * Count merges as well as fragmentations in MOTA.
 */
#define MTMC_MOTA_MU 8

/**
 * Result codes.
 */
typedef enum {
  MTMC_STATUS_OK = 0,
  MTMC_STATUS_NULL_ARGUMENT = 1,
  MTMC_STATUS_INVALID_ARGUMENT = 2,
  MTMC_STATUS_PARSE = 3,
  MTMC_STATUS_VALIDATION = 4,
  MTMC_STATUS_IO = 5,
  MTMC_STATUS_UNDEFINED = 6,
  MTMC_STATUS_INTERNAL = 7,
} MtmcStatus;

typedef enum {
  MTMC_MODE_IOU = 0,
  MTMC_MODE_GROUND = 1,
} MtmcMode;

/**
 * Opaque report handle.
 */
typedef struct MtmcReport MtmcReport;

/**
 * Opaque scenario handle.
 */
typedef struct MtmcScenario MtmcScenario;

/**
 * Headline numbers of a report. Scores the report did not compute are NaN.
 */
typedef struct {
  double idp;
  double idr;
  double idf1;
  uint64_t idtp;
  uint64_t idfp;
  uint64_t idfn;
  double mota;
  double motp;
  double mcta;
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_;
  uint64_t fragmentations;
  uint64_t merges;
} MtmcScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Owned by the library;
 * valid until the next call that fails.
 */
const char *mtmc_last_error(void);

/**
 * Library version as a static string.
 */
const char *mtmc_version(void);

/**
 * Loads ground truth and tracker CSVs. `homography_dir` may be null.
 * `delta <= 0` selects the mode's default threshold.
 *
 * # Safety
 * Path arguments must be null or NUL-terminated strings; `out` must be a
 * valid pointer.
 */
MtmcStatus mtmc_scenario_load(const char *gt_path,
                              const char *res_path,
                              MtmcMode mode,
                              double delta,
                              const char *homography_dir,
                              MtmcScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from [`mtmc_scenario_load`] not yet freed.
 */
void mtmc_scenario_free(MtmcScenario *scenario);

/**
 * Runs all measures. `flags` is a bitwise OR of the `MTMC_*` options.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
MtmcStatus mtmc_evaluate(const MtmcScenario *scenario, uint32_t flags, MtmcReport **out);

/**
 * # Safety
 * `report` must be null or a handle from [`mtmc_evaluate`] not yet freed.
 */
void mtmc_report_free(MtmcReport *report);

/**
 * Copies the headline scores into `out`.
 *
 * # Safety
 * `report` must be a live handle and `out` a valid pointer.
 */
MtmcStatus mtmc_report_scores(const MtmcReport *report, MtmcScores *out);

/**
 * The report as pretty-printed JSON, or null on failure. Release with
 * [`mtmc_string_free`].
 *
 * # Safety
 * `report` must be a live handle.
 */
char *mtmc_report_json(const MtmcReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void mtmc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTMC_EVAL_H */
