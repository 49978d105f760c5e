#ifndef RIRFORGE_H
#define RIRFORGE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The scene document is malformed or physically invalid.
   */
  RF_STATUS_SCENE = 3,
  /**
   * A solver refused the configuration or became unstable.
   */
  RF_STATUS_SIMULATION = 4,
  /**
   * The signal does not support the requested measure.
   */
  RF_STATUS_ANALYSIS = 5,
  RF_STATUS_IO = 6,
  /**
   * A bug inside the library; the message has details.
   */
  RF_STATUS_PANIC = 7,
} RfStatus;

/**
 * Opaque impulse response.
 */
typedef struct RfRir RfRir;

/**
 * Opaque room description.
 */
typedef struct RfScene RfScene;

typedef struct RfGeoOptions {
  uint32_t ray_count;
  uint32_t ism_max_order;
  uint64_t rng_seed;
  uint32_t sample_rate;
  /**
   * Upper bound on the response length in seconds.
   */
  double max_duration;
} RfGeoOptions;

typedef struct RfWaveOptions {
  double max_frequency;
  double duration;
  uint32_t sample_rate;
} RfWaveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rf_last_error_message(void);

struct RfGeoOptions rf_geo_options_default(void);

struct RfWaveOptions rf_wave_options_default(void);

/**
 * Parses a JSON scene document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RfStatus rf_scene_parse(const char *json, struct RfScene **out);

/**
 * # Safety
 * `scene` must come from `rf_scene_parse` and not be used afterwards. NULL is ignored.
 */
void rf_scene_free(struct RfScene *scene);

/**
 * # Safety
 * Pointers must be valid.
 */
enum RfStatus rf_scene_line_of_sight(const struct RfScene *scene, bool *out);

/**
 * Image sources plus diffuse ray tracing. `opts` may be NULL for defaults.
 *
 * # Safety
 * Pointers must be valid; `*out` receives a new handle on success.
 */
enum RfStatus rf_simulate_geometric(const struct RfScene *scene,
                                    const struct RfGeoOptions *opts,
                                    struct RfRir **out);

/**
 * FDTD wave simulation. `opts` may be NULL for defaults.
 *
 * # Safety
 * Pointers must be valid; `*out` receives a new handle on success.
 */
enum RfStatus rf_simulate_wave(const struct RfScene *scene,
                               const struct RfWaveOptions *opts,
                               struct RfRir **out);

/**
 * Both solvers merged at `crossover_hz`. Either options pointer may be NULL.
 *
 * # Safety
 * Pointers must be valid; `*out` receives a new handle on success.
 */
enum RfStatus rf_simulate_hybrid(const struct RfScene *scene,
                                 const struct RfWaveOptions *wave,
                                 const struct RfGeoOptions *geo,
                                 double crossover_hz,
                                 struct RfRir **out);

/**
 * Wraps caller samples (copied) as an impulse response.
 *
 * # Safety
 * `samples` must hold `len` values; `out` must be valid.
 */
enum RfStatus rf_rir_from_samples(const double *samples_ptr,
                                  size_t len,
                                  uint32_t sample_rate,
                                  struct RfRir **out);

/**
 * # Safety
 * `rir` must be a valid handle or NULL (gives 0).
 */
size_t rf_rir_len(const struct RfRir *rir);

/**
 * # Safety
 * `rir` must be a valid handle or NULL (gives 0).
 */
uint32_t rf_rir_sample_rate(const struct RfRir *rir);

/**
 * Borrowed view of the samples, valid while the handle lives.
 *
 * # Safety
 * `rir` must be a valid handle or NULL (gives NULL).
 */
const double *rf_rir_samples(const struct RfRir *rir);

/**
 * Writes a 32-bit float WAV plus its JSON sidecar.
 *
 * # Safety
 * `rir` must be valid and `path` NUL-terminated.
 */
enum RfStatus rf_rir_write_wav(const struct RfRir *rir, const char *path);

/**
 * # Safety
 * `rir` must come from this library and not be used afterwards. NULL is ignored.
 */
void rf_rir_free(struct RfRir *rir);

/**
 * Reverberation time in seconds from the Schroeder decay.
 *
 * # Safety
 * Pointers must be valid.
 */
enum RfStatus rf_estimate_t60(const struct RfRir *rir, double *out);

/**
 * Share of signal energy below `cutoff_hz`.
 *
 * # Safety
 * `samples` must hold `len` values; `out` must be valid.
 */
enum RfStatus rf_band_energy_fraction(const double *samples_ptr,
                                      size_t len,
                                      double sample_rate,
                                      double cutoff_hz,
                                      double *out);

/**
 * Pearson correlation of two equally long series.
 *
 * # Safety
 * `x` and `y` must each hold `len` values; `out` must be valid.
 */
enum RfStatus rf_pearson(const double *x, const double *y, size_t len, double *out);

/**
 * Speech-to-reverberation modulation energy ratio with default settings.
 *
 * # Safety
 * `samples` must hold `len` values; `out` must be valid.
 */
enum RfStatus rf_srmr(const double *samples_ptr, size_t len, double sample_rate, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIRFORGE_H */
