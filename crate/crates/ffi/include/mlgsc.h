#ifndef MLGSC_H
#define MLGSC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Codes 2, 3 and 4 match the CLI exit codes.
 */
typedef enum MlgscStatus {
  MLGSC_STATUS_OK = 0,
  MLGSC_STATUS_NULL_ARGUMENT = 1,
  MLGSC_STATUS_CONFIG = 2,
  MLGSC_STATUS_DATA = 3,
  MLGSC_STATUS_NUMERIC = 4,
  MLGSC_STATUS_INVALID_UTF8 = 5,
  MLGSC_STATUS_BUFFER_TOO_SMALL = 6,
  MLGSC_STATUS_PANIC = 7,
} MlgscStatus;

/**
 * Run configuration (TOML-backed).
 */
typedef struct MlgscConfig MlgscConfig;

/**
 * Trained parameters, optimizer moments and loss history.
 */
typedef struct MlgscModel MlgscModel;

/**
 * A prepared scene with its graph views built.
 */
typedef struct MlgscScene MlgscScene;

typedef struct MlgscMetrics {
  double oa;
  double nmi;
  double kappa;
} MlgscMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mlgsc_version(void);

/**
 * Message of the most recent failure on this thread, or NULL. Valid until
 * the next failing call on the same thread.
 */
const char *mlgsc_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void mlgsc_string_free(char *s);

/**
 * Built-in defaults: the synthetic 30×30×20 three-class scene.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum MlgscStatus mlgsc_config_new_default(struct MlgscConfig **out);

/**
 * Parses and validates a TOML run config.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum MlgscStatus mlgsc_config_from_toml(const char *toml, struct MlgscConfig **out);

/**
 * Serializes the config; free the result with `mlgsc_string_free`.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum MlgscStatus mlgsc_config_to_toml(const struct MlgscConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum MlgscStatus mlgsc_config_set_seed(struct MlgscConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum MlgscStatus mlgsc_config_set_epochs(struct MlgscConfig *cfg, size_t epochs);

/**
 * # Safety
 * `cfg` must be NULL or a handle from this library, not yet freed.
 */
void mlgsc_config_free(struct MlgscConfig *cfg);

/**
 * Loads (or synthesizes) the scene the config describes and builds its views.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be writable.
 */
enum MlgscStatus mlgsc_scene_load(const struct MlgscConfig *cfg, struct MlgscScene **out);

/**
 * Builds a scene from caller memory. `cube` holds `height * width * bands`
 * values, band-interleaved by pixel. `labels` holds `height * width` class
 * ids (0 = background) or is NULL to cluster every pixel without metrics.
 * The config's crop, if any, still applies.
 *
 * # Safety
 * `cube` (and `labels` when non-NULL) must point to arrays of the stated
 * lengths; `cfg` must be a live handle; `out` must be writable.
 */
enum MlgscStatus mlgsc_scene_from_arrays(const struct MlgscConfig *cfg,
                                         const float *cube,
                                         size_t height,
                                         size_t width,
                                         size_t bands,
                                         const uint16_t *labels,
                                         struct MlgscScene **out);

/**
 * Scene height and width (after cropping) and the number of clustered pixels.
 *
 * # Safety
 * `scene` must be a live handle; each out-pointer may be NULL.
 */
enum MlgscStatus mlgsc_scene_dims(const struct MlgscScene *scene,
                                  size_t *height,
                                  size_t *width,
                                  size_t *nodes);

/**
 * # Safety
 * `scene` must be NULL or a handle from this library, not yet freed.
 */
void mlgsc_scene_free(struct MlgscScene *scene);

/**
 * Trains for the configured number of epochs.
 *
 * # Safety
 * `cfg` and `scene` must be live handles; `out` must be writable.
 */
enum MlgscStatus mlgsc_train(const struct MlgscConfig *cfg,
                             const struct MlgscScene *scene,
                             struct MlgscModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MlgscStatus mlgsc_model_load(const char *path, struct MlgscModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum MlgscStatus mlgsc_model_save(const struct MlgscModel *model, const char *path);

/**
 * # Safety
 * `model` must be a live handle; `epochs` must be writable.
 */
enum MlgscStatus mlgsc_model_epochs(const struct MlgscModel *model, size_t *epochs);

/**
 * Copies the per-epoch total loss into `out`, which must hold at least
 * `mlgsc_model_epochs` values; `MLGSC_STATUS_BUFFER_TOO_SMALL` otherwise.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum MlgscStatus mlgsc_model_loss_history(const struct MlgscModel *model, double *out, size_t len);

/**
 * # Safety
 * `model` must be NULL or a handle from this library, not yet freed.
 */
void mlgsc_model_free(struct MlgscModel *model);

/**
 * Spectral clustering on the trained coefficients. Writes the cluster map
 * (`height * width` entries, 0 = background, clusters from 1) into `map`.
 * When the scene carries ground truth, `metrics` (if non-NULL) receives
 * OA / NMI / Kappa and `has_metrics` (if non-NULL) is set to true.
 *
 * # Safety
 * Handles must be live; `map` must hold `map_len` writable values.
 */
enum MlgscStatus mlgsc_cluster(const struct MlgscConfig *cfg,
                               const struct MlgscScene *scene,
                               const struct MlgscModel *model,
                               uint16_t *map,
                               size_t map_len,
                               struct MlgscMetrics *metrics,
                               bool *has_metrics);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MLGSC_H */
