#ifndef SATSLAM_H
#define SATSLAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SatslamStatus {
  SATSLAM_STATUS_OK = 0,
  SATSLAM_STATUS_NULL_POINTER = 1,
  SATSLAM_STATUS_INVALID_ARGUMENT = 2,
  SATSLAM_STATUS_INVALID_CONFIG = 3,
  SATSLAM_STATUS_DOMAIN = 4,
  SATSLAM_STATUS_NUMERICAL = 5,
  SATSLAM_STATUS_DEGENERATE_GEOMETRY = 6,
  SATSLAM_STATUS_IO = 7,
  SATSLAM_STATUS_OUT_OF_RANGE = 8,
  SATSLAM_STATUS_PANIC = 9,
} SatslamStatus;

typedef struct SatslamConfig SatslamConfig;

typedef struct SatslamExperiment SatslamExperiment;

typedef struct SatslamPlan SatslamPlan;

typedef struct SatslamRecon SatslamRecon;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *satslam_last_error(void);

// # Safety
// `s` must be null or a string returned by this library.
void satslam_string_free(char *s);

// Default experiment configuration.
struct SatslamConfig *satslam_config_new(void);

// Parses a JSON configuration; missing fields take their defaults.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum SatslamStatus satslam_config_from_json(const char *json, struct SatslamConfig **out);

// # Safety
// `cfg` and `out` must be valid pointers.
enum SatslamStatus satslam_config_to_json(const struct SatslamConfig *cfg, char **out);

// # Safety
// `cfg` must be a valid configuration handle.
enum SatslamStatus satslam_config_set_seed(struct SatslamConfig *cfg, uint64_t seed);

// Sets the Monte-Carlo counts.
//
// # Safety
// `cfg` must be a valid configuration handle.
enum SatslamStatus satslam_config_set_counts(struct SatslamConfig *cfg,
                                             size_t num_plans,
                                             size_t num_runs_per_plan);

// Replaces the list of planning horizons.
//
// # Safety
// `cfg` must be a valid handle and `horizons` must point to `len` values.
enum SatslamStatus satslam_config_set_horizons(struct SatslamConfig *cfg,
                                               const size_t *horizons,
                                               size_t len);

// # Safety
// `cfg` must be a valid handle and `dir` a NUL-terminated path.
enum SatslamStatus satslam_config_set_output_dir(struct SatslamConfig *cfg, const char *dir);

// # Safety
// `cfg` must be null or a handle from this library, freed at most once.
void satslam_config_free(struct SatslamConfig *cfg);

// Simulates the reconnaissance orbit of plan `plan_id`.
//
// # Safety
// `cfg` and `out` must be valid pointers.
enum SatslamStatus satslam_recon_run(const struct SatslamConfig *cfg,
                                     size_t plan_id,
                                     struct SatslamRecon **out);

// Number of pose variables in the reconnaissance graph.
//
// # Safety
// `recon` must be null or a valid handle.
size_t satslam_recon_num_poses(const struct SatslamRecon *recon);

// Number of landmarks seen during reconnaissance.
//
// # Safety
// `recon` must be null or a valid handle.
size_t satslam_recon_num_landmarks(const struct SatslamRecon *recon);

// True chaser position and velocity at the end of the orbit.
//
// # Safety
// `recon` must be valid; `position` and `velocity` must hold 3 doubles each.
enum SatslamStatus satslam_recon_final_state(const struct SatslamRecon *recon,
                                             double *position,
                                             double *velocity);

// Reconnaissance factor graph and initial values as JSON.
//
// # Safety
// `recon` and `out` must be valid pointers.
enum SatslamStatus satslam_recon_graph_json(const struct SatslamRecon *recon, char **out);

// # Safety
// `recon` must be null or a handle from this library, freed at most once.
void satslam_recon_free(struct SatslamRecon *recon);

// Scores candidate observation targets over `horizon` steps after the
// reconnaissance orbit and keeps the most informative one.
//
// # Safety
// `cfg`, `recon` and `out` must be valid pointers.
enum SatslamStatus satslam_plan_active(const struct SatslamConfig *cfg,
                                       const struct SatslamRecon *recon,
                                       size_t horizon,
                                       struct SatslamPlan **out);

// Chosen target and its candidate index.
//
// # Safety
// `plan` must be valid and `target` must hold 3 doubles; `best_index` may be null.
enum SatslamStatus satslam_plan_target(const struct SatslamPlan *plan,
                                       double *target,
                                       size_t *best_index);

// # Safety
// `plan` must be null or a valid handle.
size_t satslam_plan_num_candidates(const struct SatslamPlan *plan);

// Copies the candidate rewards (−inf marks infeasible candidates) into
// `rewards`, which must hold `satslam_plan_num_candidates` values.
//
// # Safety
// `plan` must be valid and `rewards` must point to `len` doubles.
enum SatslamStatus satslam_plan_rewards(const struct SatslamPlan *plan,
                                        double *rewards,
                                        size_t len);

// # Safety
// `plan` must be null or a handle from this library, freed at most once.
void satslam_plan_free(struct SatslamPlan *plan);

// Runs the Monte-Carlo experiment. With `persist` nonzero, records and
// aggregates are also written under the configured output directory.
//
// # Safety
// `cfg` and `out` must be valid pointers.
enum SatslamStatus satslam_experiment_run(const struct SatslamConfig *cfg,
                                          int32_t persist,
                                          struct SatslamExperiment **out);

// Number of completed episodes.
//
// # Safety
// `exp` must be null or a valid handle.
size_t satslam_experiment_num_records(const struct SatslamExperiment *exp);

// Number of excluded (failed) episodes.
//
// # Safety
// `exp` must be null or a valid handle.
size_t satslam_experiment_num_failures(const struct SatslamExperiment *exp);

// Number of aggregate tables (one per strategy and horizon).
//
// # Safety
// `exp` must be null or a valid handle.
size_t satslam_experiment_num_tables(const struct SatslamExperiment *exp);

// Per-step CSV of aggregate table `index`.
//
// # Safety
// `exp` and `out` must be valid pointers.
enum SatslamStatus satslam_experiment_table_csv(const struct SatslamExperiment *exp,
                                                size_t index,
                                                char **out);

// All aggregate tables as a JSON array.
//
// # Safety
// `exp` and `out` must be valid pointers.
enum SatslamStatus satslam_experiment_aggregates_json(const struct SatslamExperiment *exp,
                                                      char **out);

// # Safety
// `exp` must be null or a handle from this library, freed at most once.
void satslam_experiment_free(struct SatslamExperiment *exp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SATSLAM_H */
