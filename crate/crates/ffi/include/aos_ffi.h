/* Generated by cbindgen. Do not edit. */

#ifndef AOS_FFI_H
#define AOS_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AosStatus {
  AOS_STATUS_OK = 0,
  AOS_STATUS_NULL_POINTER = 1,
  AOS_STATUS_INVALID_ARGUMENT = 2,
  AOS_STATUS_DOMAIN = 3,
  AOS_STATUS_STATS = 4,
  AOS_STATUS_POSE = 5,
  AOS_STATUS_COVERAGE = 6,
  AOS_STATUS_IO = 7,
  AOS_STATUS_PARSE = 8,
  AOS_STATUS_INTERNAL = 9,
} AosStatus;

typedef enum AosFlightMode {
  AOS_FLIGHT_MODE_LINE = 0,
  AOS_FLIGHT_MODE_GRID = 1,
} AosFlightMode;

typedef struct AosForest AosForest;

typedef struct AosIntegral AosIntegral;

typedef struct AosScene AosScene;

typedef struct AosForestStats {
  double h_t_m;
  double d_t_m;
  double trees_per_ha;
} AosForestStats;

/**
 * Flight, sensor and ground grid for [`aos_integrate`]. The aperture is the
 * rectangle the poses span; the grid has `nx × ny` cells of `cell_m` from
 * `(grid_origin_x, grid_origin_y)`.
 */
typedef struct AosIntegrateParams {
  double aperture_min_x;
  double aperture_min_y;
  double aperture_max_x;
  double aperture_max_y;
  double spacing_m;
  double altitude_m;
  enum AosFlightMode mode;
  double fov_deg;
  uint32_t resolution_px;
  double grid_origin_x;
  double grid_origin_y;
  double cell_m;
  size_t nx;
  size_t ny;
} AosIntegrateParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *aos_last_error_message(void);

/**
 * Maximal off-nadir angle (degrees) for a full field of view.
 */
enum AosStatus aos_alpha_max(double fov_deg, double *out);

/**
 * Ground footprint width `2 h tan(fov / 2)`.
 */
enum AosStatus aos_ground_coverage(double altitude_m, double fov_deg, double *out);

enum AosStatus aos_samples_per_point(double coverage_m, double sample_dist_m, double *out);

/**
 * `2 atan(d_t / h_t)` in degrees.
 */
enum AosStatus aos_optimal_fov(double d_t_m, double h_t_m, double *out);

/**
 * Generates a forest with default tree parameters on an `extent_x × extent_y`
 * patch centred on the origin.
 */
enum AosStatus aos_forest_generate(uint64_t seed,
                                   double trees_per_ha,
                                   double extent_x_m,
                                   double extent_y_m,
                                   double min_spacing_m,
                                   struct AosForest **out);

/**
 * Parses a forest from its JSON serialization (NUL-terminated UTF-8).
 */
enum AosStatus aos_forest_from_json(const char *json, struct AosForest **out);

/**
 * Serializes a forest. Release the string with [`aos_string_free`].
 */
enum AosStatus aos_forest_to_json(const struct AosForest *forest, char **out);

enum AosStatus aos_forest_tree_count(const struct AosForest *forest, size_t *out);

enum AosStatus aos_forest_stats(const struct AosForest *forest, struct AosForestStats *out);

/**
 * # Safety
 * `forest` must come from this library and not be used afterwards. Null is ignored.
 */
void aos_forest_free(struct AosForest *forest);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void aos_string_free(char *s);

/**
 * Builds the ray-queryable scene of a forest. The forest may be freed afterwards.
 */
enum AosStatus aos_scene_build(const struct AosForest *forest, struct AosScene **out);

enum AosStatus aos_scene_primitive_count(const struct AosScene *scene, size_t *out);

/**
 * Whether any occluder blocks the segment between two points, each given as `[x, y, z]`.
 */
enum AosStatus aos_scene_occluded(const struct AosScene *scene,
                                  const double *from,
                                  const double *to,
                                  bool *out);

/**
 * # Safety
 * `scene` must come from this library and not be used afterwards. Null is ignored.
 */
void aos_scene_free(struct AosScene *scene);

/**
 * Flies the plan described by `params` over `scene` and returns the integral image.
 */
enum AosStatus aos_integrate(const struct AosScene *scene,
                             const struct AosIntegrateParams *params,
                             struct AosIntegral **out);

enum AosStatus aos_integral_dims(const struct AosIntegral *integral, size_t *nx, size_t *ny);

/**
 * Mean sample value of cell `(ix, iy)`; `AOS_STATUS_COVERAGE` if nothing sampled it.
 */
enum AosStatus aos_integral_value(const struct AosIntegral *integral,
                                  size_t ix,
                                  size_t iy,
                                  double *out);

/**
 * Mean integral value over the cells whose centres fall in the given rectangle.
 */
enum AosStatus aos_integral_visibility(const struct AosIntegral *integral,
                                       double min_x,
                                       double min_y,
                                       double max_x,
                                       double max_y,
                                       double *out);

/**
 * # Safety
 * `integral` must come from this library and not be used afterwards. Null is ignored.
 */
void aos_integral_free(struct AosIntegral *integral);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AOS_FFI_H */
