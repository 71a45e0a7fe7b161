#ifndef DIOSENSE_H
#define DIOSENSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_INVALID_ARGUMENT = 1,
  DS_STATUS_UNSOLVABLE = 2,
  DS_STATUS_OVERFLOW = 3,
  DS_STATUS_DEGENERATE = 4,
  DS_STATUS_NOT_COVERED = 5,
  DS_STATUS_NULL_POINTER = 6,
  DS_STATUS_BUFFER_TOO_SMALL = 7,
  DS_STATUS_INTERNAL = 8,
} DsStatus;

typedef struct DsArray DsArray;

typedef struct DsSchedule DsSchedule;

typedef struct DsScheme DsScheme;

typedef struct DsScheduleEntry {
  uint64_t k;
  uint64_t l;
  uint64_t indices[3];
  /**
   * Zero-based slot whose sample is conjugated.
   */
  uint32_t conj_slot;
} DsScheduleEntry;

typedef struct DsCoarrayReport {
  /**
   * Largest `S` with every lag in `[−S, S]` present.
   */
  int64_t span;
  int64_t dof;
  uint64_t distinct_lags;
  /**
   * Zero for single-sensor geometries.
   */
  int64_t min_spacing;
  uint64_t sensor_count;
  uint64_t formula_sensor_count;
  /**
   * `2·p1·p2·q + 1` or `2·M1·M2 + 1`.
   */
  int64_t guaranteed_dof;
} DsCoarrayReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ds_last_error(void);

/**
 * Extended Euclid: `u·x + v·y = g` with `g ≥ 0`.
 *
 * # Safety
 * `g`, `u` and `v` must be valid for writes.
 */
enum DsStatus ds_ext_gcd(int64_t x, int64_t y, int64_t *g, int64_t *u, int64_t *v);

/**
 * Solves `a·M = 0`, `b·M = 1` for three rates.
 *
 * # Safety
 * `rates` must point to 3 readable values; `out` must be valid for writes.
 */
enum DsStatus ds_scheme_solve(const uint64_t *rates, struct DsScheme **out);

/**
 * The scheme on rates `(Γ+2, Γ+3, Γ+5)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DsStatus ds_scheme_consecutive(uint64_t gamma, struct DsScheme **out);

/**
 * Copies rates, `a` and `b` (3 values each). Any output may be null.
 *
 * # Safety
 * `scheme` must come from this library; non-null outputs must hold 3 values.
 */
enum DsStatus ds_scheme_coefficients(const struct DsScheme *scheme,
                                     uint64_t *rates,
                                     int64_t *a,
                                     int64_t *b);

/**
 * # Safety
 * `scheme` must come from this library and not be used afterwards. Null is ignored.
 */
void ds_scheme_free(struct DsScheme *scheme);

/**
 * Largest sample index, times the largest rate, over lags `1..=K` and snapshots `1..=L`.
 *
 * # Safety
 * `scheme` must come from this library; `out` must be valid for writes.
 */
enum DsStatus ds_delay_bound(const struct DsScheme *scheme,
                             uint64_t lags,
                             uint64_t snapshots,
                             uint64_t *out);

/**
 * # Safety
 * `scheme` must come from this library; `out` must be valid for writes.
 */
enum DsStatus ds_schedule_build(const struct DsScheme *scheme,
                                uint64_t lags,
                                uint64_t snapshots,
                                struct DsSchedule **out);

/**
 * # Safety
 * `schedule` must come from this library; `len` must be valid for writes.
 */
enum DsStatus ds_schedule_len(const struct DsSchedule *schedule, size_t *len);

/**
 * Entry `index`, ordered by `k` then `l`.
 *
 * # Safety
 * `schedule` must come from this library; `out` must be valid for writes.
 */
enum DsStatus ds_schedule_entry(const struct DsSchedule *schedule,
                                size_t index,
                                struct DsScheduleEntry *out);

/**
 * # Safety
 * `schedule` must come from this library and not be used afterwards. Null is ignored.
 */
void ds_schedule_free(struct DsSchedule *schedule);

/**
 * Three-subarray design for pairwise-coprime `(p1, p2, q)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DsStatus ds_array_design(uint64_t p1, uint64_t p2, uint64_t q, struct DsArray **out);

/**
 * Co-prime baseline for coprime `(m1, m2)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DsStatus ds_array_coprime(uint64_t m1, uint64_t m2, struct DsArray **out);

/**
 * Sorted sensor positions. `len` receives the sensor count; pass a null
 * `positions` to query it. Returns `BufferTooSmall` if `capacity` is short.
 *
 * # Safety
 * `array` must come from this library; `positions` must hold `capacity` values.
 */
enum DsStatus ds_array_positions(const struct DsArray *array,
                                 int64_t *positions,
                                 size_t capacity,
                                 size_t *len);

/**
 * # Safety
 * `array` must come from this library; `out` must be valid for writes.
 */
enum DsStatus ds_array_coarray_report(const struct DsArray *array, struct DsCoarrayReport *out);

/**
 * # Safety
 * `array` must come from this library and not be used afterwards. Null is ignored.
 */
void ds_array_free(struct DsArray *array);

/**
 * Estimates `order` frequencies (radians, ascending) from a moment sequence on
 * consecutive lags, using a `grid_points` grid over (−π, π].
 *
 * # Safety
 * `re` and `im` must hold `len` values; `frequencies` must hold `order` values.
 */
enum DsStatus ds_estimate_frequencies(const double *re,
                                      const double *im,
                                      size_t len,
                                      size_t order,
                                      size_t grid_points,
                                      double *frequencies);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIOSENSE_H */
