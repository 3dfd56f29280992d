#ifndef LOGISTIC_RAYKNIGHT_H
#define LOGISTIC_RAYKNIGHT_H

/* Auto-generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum LrkStatus {
  LRK_STATUS_OK = 0,
  LRK_STATUS_NULL_POINTER = 1,
  LRK_STATUS_INVALID_PARAMS = 2,
  LRK_STATUS_BUDGET_EXCEEDED = 3,
  LRK_STATUS_STOP_BEYOND_PATH = 4,
  // The exploration was truncated before completing its forest.
  LRK_STATUS_INCOMPLETE = 5,
  LRK_STATUS_INVALID_ARGUMENT = 6,
} LrkStatus;

// One exploration path with its local-time profile (opaque).
typedef struct LrkExploration LrkExploration;

// One exact trajectory of the discrete mass process (opaque).
typedef struct LrkMassPath LrkMassPath;

// Validated model parameters (opaque).
typedef struct LrkParams LrkParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the library as a NUL-terminated static string.
const char *lrk_version(void);

// Validates (σ, θ, γ, N, x) and allocates a parameter handle.
//
// # Safety
// `out` must be a valid pointer. On `Ok` it receives a handle that must be
// released with [`lrk_params_free`].
enum LrkStatus lrk_params_new(double sigma,
                              double theta,
                              double gamma,
                              uint32_t capital_n,
                              double x,
                              struct LrkParams **out);

// # Safety
// `p` must be a handle from [`lrk_params_new`] not yet freed, or null.
void lrk_params_free(struct LrkParams *p);

// Discrete initial mass ⌊Nx⌋/N, or NaN on a null handle.
//
// # Safety
// `p` must be a live handle or null.
double lrk_params_z0(const struct LrkParams *p);

// Simulates one exact mass path on [0, t_max].
//
// # Safety
// `p` must be a live parameter handle; `out` a valid pointer. On `Ok` it
// receives a handle to free with [`lrk_mass_free`].
enum LrkStatus lrk_mass_simulate(const struct LrkParams *p,
                                 uint64_t master_seed,
                                 uint64_t stream_id,
                                 double t_max,
                                 struct LrkMassPath **out);

// # Safety
// `h` must be a handle from [`lrk_mass_simulate`] not yet freed, or null.
void lrk_mass_free(struct LrkMassPath *h);

// Number of jumps in the path; 0 on a null handle.
//
// # Safety
// `h` must be a live handle or null.
uint64_t lrk_mass_jump_count(const struct LrkMassPath *h);

// Right-continuous path value at time `t`; NaN on a null handle.
//
// # Safety
// `h` must be a live handle or null.
double lrk_mass_value_at(const struct LrkMassPath *h, double t);

// Jump `index` as (time, level reached).
//
// # Safety
// `h` must be a live handle; `out_t` and `out_z` valid pointers.
enum LrkStatus lrk_mass_jump(const struct LrkMassPath *h,
                             uint64_t index,
                             double *out_t,
                             double *out_z);

// Explores the forest of ⌊Nx⌋ trees; `s_max <= 0` means no truncation.
//
// # Safety
// `p` must be a live parameter handle; `out` a valid pointer. On `Ok` it
// receives a handle to free with [`lrk_explore_free`].
enum LrkStatus lrk_explore(const struct LrkParams *p,
                           uint64_t master_seed,
                           uint64_t stream_id,
                           double s_max,
                           struct LrkExploration **out);

// # Safety
// `h` must be a handle from [`lrk_explore`] not yet freed, or null.
void lrk_explore_free(struct LrkExploration *h);

// Completion time S_x of the exploration; `Incomplete` when the run was
// truncated by `s_max` before all trees were traversed.
//
// # Safety
// `h` must be a live handle; `out` a valid pointer.
enum LrkStatus lrk_explore_s_x(const struct LrkExploration *h, double *out);

// Crossing count of the terminal profile at height 0 (2⌊Nx⌋ on a complete
// run); 0 on a null handle.
//
// # Safety
// `h` must be a live handle or null.
uint64_t lrk_explore_crossings_at_zero(const struct LrkExploration *h);

// Number of turning points in the path; 0 on a null handle.
//
// # Safety
// `h` must be a live handle or null.
uint64_t lrk_explore_turning_point_count(const struct LrkExploration *h);

// Turning point `index` as (exploration time, height).
//
// # Safety
// `h` must be a live handle; `out_s` and `out_h` valid pointers.
enum LrkStatus lrk_explore_turning_point(const struct LrkExploration *h,
                                         uint64_t index,
                                         double *out_s,
                                         double *out_h);

// Writes the terminal mass slice `count(t)/(2N)` for `len` heights from
// `ts` into `out_values`.
//
// # Safety
// `h` must be a live handle; `ts` and `out_values` must point to `len`
// readable/writable doubles.
enum LrkStatus lrk_explore_slice(const struct LrkExploration *h,
                                 const double *ts,
                                 uint64_t len,
                                 double *out_values);

// Girsanov log-weight of a null-law exploration against `target`, stopped
// at `τ = S_{trees/N} ∧ stop_s` (`stop_s <= 0` means no time cap).
//
// # Safety
// `h` and `target` must be live handles; `out_log_weight` and
// `out_stop_time` valid pointers.
enum LrkStatus lrk_girsanov_log_weight(const struct LrkExploration *h,
                                       const struct LrkParams *target,
                                       uint64_t stop_trees,
                                       double stop_s,
                                       double *out_log_weight,
                                       double *out_stop_time);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGISTIC_RAYKNIGHT_H */
