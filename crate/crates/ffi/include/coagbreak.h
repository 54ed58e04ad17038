/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef COAGBREAK_H
#define COAGBREAK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CbStatus {
  CB_STATUS_OK = 0,
  CB_STATUS_CHECK_FAILED = 1,
  CB_STATUS_INVALID_CONFIG = 2,
  CB_STATUS_NUMERICAL = 3,
  CB_STATUS_IO = 4,
  CB_STATUS_NULL_POINTER = 5,
  CB_STATUS_INVALID_ARGUMENT = 6,
  CB_STATUS_PANIC = 7,
} CbStatus;

typedef struct CbConfig CbConfig;

typedef struct CbReport CbReport;

typedef struct CbTrajectory CbTrajectory;

// Moment log entry; `flux_out` is cumulative.
typedef struct CbMoments {
  double t;
  double m_neg;
  double m0;
  double m1;
  double m2;
  double flux_out;
} CbMoments;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cb_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into the library from the same thread.
const char *cb_last_error_message(void);

// `s` must be NULL or a string returned by this library.
void cb_string_free(char *s);

// `out` must be a valid pointer.
enum CbStatus cb_config_default(struct CbConfig **out);

// Parses configuration text; every problem is reported in one message.
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum CbStatus cb_config_parse(const char *text, struct CbConfig **out);

// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CbStatus cb_config_load(const char *path, struct CbConfig **out);

// Canonical text of the configuration, or NULL if `cfg` is NULL.
// `cfg` must be NULL or a live configuration handle.
char *cb_config_emit(const struct CbConfig *cfg);

// Hex SHA-256 fingerprint, or NULL if `cfg` is NULL.
// `cfg` must be NULL or a live configuration handle.
char *cb_config_fingerprint(const struct CbConfig *cfg);

// `cfg` must be NULL or a handle not yet freed.
void cb_config_free(struct CbConfig *cfg);

// Integrates the configured scenario.
// `cfg` must be a live configuration handle and `out` a valid pointer.
enum CbStatus cb_run(const struct CbConfig *cfg, struct CbTrajectory **out);

// Integrates and runs every enabled check. A failed check is not an error:
// inspect the report with `cb_report_passed`. `out_traj` may be NULL.
// `cfg` must be a live configuration handle, `out_report` a valid pointer
// and `out_traj` NULL or a valid pointer.
enum CbStatus cb_verify(const struct CbConfig *cfg,
                        uint64_t seed,
                        struct CbTrajectory **out_traj,
                        struct CbReport **out_report);

// Number of stored snapshots, 0 for NULL.
// `traj` must be NULL or a live trajectory handle.
size_t cb_trajectory_snapshot_count(const struct CbTrajectory *traj);

// Number of mesh cells, 0 for NULL.
// `traj` must be NULL or a live trajectory handle.
size_t cb_trajectory_cell_count(const struct CbTrajectory *traj);

// `traj` must be a live trajectory handle and `out` a valid pointer.
enum CbStatus cb_trajectory_time(const struct CbTrajectory *traj, size_t index, double *out);

// Copies the cell centers into `buf`, which must hold `cb_trajectory_cell_count` values.
// `traj` must be a live trajectory handle and `buf` valid for `len` writes.
enum CbStatus cb_trajectory_centers(const struct CbTrajectory *traj, double *buf, size_t len);

// Copies the densities of snapshot `index` into `buf`.
// `traj` must be a live trajectory handle and `buf` valid for `len` writes.
enum CbStatus cb_trajectory_values(const struct CbTrajectory *traj,
                                   size_t index,
                                   double *buf,
                                   size_t len);

// Moments of snapshot `index`.
// `traj` must be a live trajectory handle and `out` a valid pointer.
enum CbStatus cb_trajectory_moments(const struct CbTrajectory *traj,
                                    size_t index,
                                    struct CbMoments *out);

// Relative mass lost through the truncation boundaries by the final time.
// `traj` must be a live trajectory handle and `out` a valid pointer.
enum CbStatus cb_trajectory_mass_defect(const struct CbTrajectory *traj, double *out);

// Writes the trajectory and moment CSV files; either path may be NULL to skip it.
// `traj` must be a live trajectory handle; paths NULL or NUL-terminated.
enum CbStatus cb_trajectory_write_csv(const struct CbTrajectory *traj,
                                      const char *trajectory_path,
                                      const char *moments_path);

// `traj` must be NULL or a handle not yet freed.
void cb_trajectory_free(struct CbTrajectory *traj);

// 1 if every check passed, 0 if one failed, -1 for NULL.
// `report` must be NULL or a live report handle.
int cb_report_passed(const struct CbReport *report);

// Report in its text form, or NULL if `report` is NULL.
// `report` must be NULL or a live report handle.
char *cb_report_text(const struct CbReport *report);

// `report` must be NULL or a handle not yet freed.
void cb_report_free(struct CbReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COAGBREAK_H */
