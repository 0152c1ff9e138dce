#ifndef ROVERNAV_H
#define ROVERNAV_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RN_METRIC_RAW 0

#define RN_METRIC_NCC 1

#define RN_MODE_EFFICIENT_ONLY 0

#define RN_MODE_FULL_ONLY 1

#define RN_MODE_AUTO 2

/**
 * How a run ended.
 */
typedef enum RnRunEnd {
  RN_RUN_END_COMPLETED = 0,
  RN_RUN_END_SLIP_FAULT = 1,
  RN_RUN_END_ATTITUDE_FAULT = 2,
  RN_RUN_END_CORRIDOR_FAULT = 3,
  RN_RUN_END_MOTOR_FAULT = 4,
  RN_RUN_END_PATH_BLOCKED = 5,
  RN_RUN_END_OUT_OF_BOUNDS = 6,
  RN_RUN_END_TIMEOUT = 7,
  RN_RUN_END_NO_MOTION = 8,
} RnRunEnd;

typedef enum RnStatus {
  RN_STATUS_OK = 0,
  RN_STATUS_NULL_POINTER = 1,
  RN_STATUS_INVALID_ARGUMENT = 2,
  RN_STATUS_CONFIG = 3,
  RN_STATUS_IO = 4,
  RN_STATUS_PARSE = 5,
  RN_STATUS_INSUFFICIENT_DATA = 6,
  RN_STATUS_OUT_OF_RANGE = 7,
  RN_STATUS_INTERNAL = 8,
  RN_STATUS_PANIC = 9,
} RnStatus;

/**
 * Opaque handle on a finished run.
 */
typedef struct RnRun RnRun;

/**
 * Opaque scenario handle.
 */
typedef struct RnScenario RnScenario;

typedef struct RnMetrics {
  uint32_t end;
  double planned_m;
  double traversed_m;
  uint64_t replans;
  uint64_t repairs;
  double final_error_m;
  double odometry_error_m;
  uint64_t corrections_applied;
  uint64_t mode_switches;
  double sim_time_s;
  uint64_t trajectory_len;
} RnMetrics;

/**
 * `full` is 1 when the sample was taken in full navigation mode.
 */
typedef struct RnSample {
  double time;
  double truth_x;
  double truth_y;
  double truth_heading;
  double est_x;
  double est_y;
  double est_heading;
  uint32_t full;
} RnSample;

typedef struct RnMatch {
  uint64_t best_row;
  uint64_t best_col;
  double subcell_row;
  double subcell_col;
  double peak;
  double sharpness;
  double valid_fraction;
  uint32_t accepted;
  /**
   * Correction that moves the local map onto the orbital map, meters.
   */
  double dx;
  double dy;
} RnMatch;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated, truncated
 * to `len`). Returns the length the full message needs, including the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t rn_last_error(char *buf, size_t len);

/**
 * Static name of a status code, or "unknown status" for anything else.
 */
const char *rn_status_name(int32_t code);

/**
 * Load a scenario file. Relative paths inside it resolve next to the file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RnStatus rn_scenario_load(const char *path, struct RnScenario **out);

/**
 * Parse scenario TOML from memory.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum RnStatus rn_scenario_parse(const char *toml, struct RnScenario **out);

/**
 * # Safety
 * `scenario` must come from `rn_scenario_load` or `rn_scenario_parse`.
 */
enum RnStatus rn_scenario_set_seed(struct RnScenario *scenario, uint64_t seed);

/**
 * Override the navigation mode policy with one of the `RN_MODE_*` values.
 *
 * # Safety
 * `scenario` must come from `rn_scenario_load` or `rn_scenario_parse`.
 */
enum RnStatus rn_scenario_set_mode(struct RnScenario *scenario, uint32_t mode);

/**
 * # Safety
 * `scenario` must be null or a live handle; it is invalid afterwards.
 */
void rn_scenario_free(struct RnScenario *scenario);

/**
 * Run a scenario to completion. A run that ends in a fault still returns `RN_OK`;
 * the ending is in the metrics.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum RnStatus rn_run(const struct RnScenario *scenario, struct RnRun **out);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum RnStatus rn_run_metrics(const struct RnRun *run, struct RnMetrics *out);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum RnStatus rn_run_sample(const struct RnRun *run, uint64_t index, struct RnSample *out);

/**
 * Write metrics.csv, trajectory.csv and events.log into `dir`, creating it.
 *
 * # Safety
 * `run` must be a live handle; `dir` a NUL-terminated string.
 */
enum RnStatus rn_run_write(const struct RnRun *run, const char *dir);

/**
 * # Safety
 * `run` must be null or a live handle; it is invalid afterwards.
 */
void rn_run_free(struct RnRun *run);

/**
 * Match a local DEM against an orbital DEM, both ESRI ASCII grids. The search window
 * of `search_radius` meters is centered on the local map's own georeference; pass a
 * negative radius for the default.
 *
 * # Safety
 * `local` and `orbital` must be NUL-terminated strings; `out` must be writable.
 */
enum RnStatus rn_match_dem_files(const char *local,
                                 const char *orbital,
                                 uint32_t metric,
                                 double search_radius,
                                 struct RnMatch *out);

/**
 * Shortest range the hazard detector tolerates for a pixel whose flat-ground range is
 * `d_cal`, with the camera `h_cam` above ground and obstacles flagged above `t_near`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RnStatus rn_min_tolerated_distance(double d_cal, double h_cam, double t_near, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROVERNAV_H */
