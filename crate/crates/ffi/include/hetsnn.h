#ifndef HETSNN_H
#define HETSNN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum HsnnStatus {
  HSNN_STATUS_OK = 0,
  HSNN_STATUS_NULL_POINTER = 1,
  HSNN_STATUS_INVALID_ARGUMENT = 2,
  HSNN_STATUS_SIMULATION = 3,
  HSNN_STATUS_OPTIMIZER = 4,
  HSNN_STATUS_ANALYSIS = 5,
  HSNN_STATUS_IO = 6,
  HSNN_STATUS_BUFFER_TOO_SMALL = 7,
  HSNN_STATUS_PANIC = 8,
} HsnnStatus;

/**
 * Feedforward LIF network.
 */
typedef struct HsnnNetwork HsnnNetwork;

/**
 * PGPE optimizer state. `ask` yields the population of the current
 * generation; `tell` applies its fitnesses and advances one generation.
 */
typedef struct HsnnPgpe HsnnPgpe;

typedef struct HsnnPgpeConfig {
  /**
   * Even number of perturbed genomes per generation.
   */
  size_t population;
  double sigma0;
  double lr_center;
  double lr_sigma;
  uint64_t seed;
  bool rank_shaping;
  /**
   * Ascend when true, descend when false.
   */
  bool maximize;
  size_t episodes_per_genome;
} HsnnPgpeConfig;

typedef struct HsnnGenerationStats {
  uint64_t generation;
  double fitness_mean;
  double fitness_max;
  double fitness_min;
  double sigma_mean;
  size_t excluded;
} HsnnGenerationStats;

/**
 * Fitness callback: `(genome, dim, episode_seed, user_data) -> fitness`.
 * Non-finite returns exclude the member's antithetic pair.
 */
typedef double (*HsnnFitnessFn)(const double*, size_t, uint64_t, void*);

typedef struct HsnnFit {
  double shape;
  double scale;
  double log_likelihood;
  size_t n;
  bool converged;
  bool degenerate;
} HsnnFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *hsnn_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hsnn_version(void);

/**
 * Creates a network with seeded random weights and default neuron parameters.
 *
 * `layer_sizes[0]` is the input width; each further entry is a neuron layer.
 *
 * # Safety
 * `layer_sizes` must point to `n_layers` readable values and `out` must be writable.
 */
enum HsnnStatus hsnn_network_new(const size_t *layer_sizes,
                                 size_t n_layers,
                                 uint64_t seed,
                                 struct HsnnNetwork **out);

/**
 * Loads a network saved as `network.json` by the training commands.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum HsnnStatus hsnn_network_load_json(const char *path, struct HsnnNetwork **out);

/**
 * # Safety
 * `net` must be NULL or a handle from this library that has not been freed.
 */
void hsnn_network_free(struct HsnnNetwork *net);

/**
 * # Safety
 * `net` must be a live handle.
 */
size_t hsnn_network_input_dim(const struct HsnnNetwork *net);

/**
 * # Safety
 * `net` must be a live handle.
 */
size_t hsnn_network_output_dim(const struct HsnnNetwork *net);

/**
 * Number of values in the neuron-parameter genome under the current mask.
 *
 * # Safety
 * `net` must be a live handle.
 */
size_t hsnn_network_genome_len(const struct HsnnNetwork *net);

/**
 * Sets which neuron properties belong to the genome: bit 0 tau_m, bit 1
 * v_th, bit 2 v_rest, bit 3 R.
 *
 * # Safety
 * `net` must be a live handle.
 */
enum HsnnStatus hsnn_network_set_trainable(struct HsnnNetwork *net, uint8_t bits);

/**
 * # Safety
 * `net` must be a live handle.
 */
enum HsnnStatus hsnn_network_set_input_gain(struct HsnnNetwork *net, double gain);

/**
 * Selects the readout: `false` for membrane potential, `true` for spike counts.
 *
 * # Safety
 * `net` must be a live handle.
 */
enum HsnnStatus hsnn_network_set_spike_readout(struct HsnnNetwork *net, bool spikes);

/**
 * Copies the genome into `buf`, which must hold `hsnn_network_genome_len` values.
 *
 * # Safety
 * `buf` must point to `len` writable values.
 */
enum HsnnStatus hsnn_network_get_genome(const struct HsnnNetwork *net, double *buf, size_t len);

/**
 * # Safety
 * `genome` must point to `len` readable values.
 */
enum HsnnStatus hsnn_network_set_genome(struct HsnnNetwork *net, const double *genome, size_t len);

/**
 * Simulates `steps` steps from rest. `inputs` is row-major `steps x input_dim`;
 * `outputs` receives row-major `steps x output_dim`.
 *
 * # Safety
 * Buffers must hold the stated number of values.
 */
enum HsnnStatus hsnn_network_run(const struct HsnnNetwork *net,
                                 const double *inputs,
                                 size_t steps,
                                 double *outputs,
                                 size_t outputs_len);

/**
 * Defaults used by the Rust API.
 */
struct HsnnPgpeConfig hsnn_pgpe_config_default(void);

/**
 * # Safety
 * `center` must point to `dim` readable values and `out` must be writable.
 */
enum HsnnStatus hsnn_pgpe_new(const struct HsnnPgpeConfig *config,
                              const double *center,
                              size_t dim,
                              struct HsnnPgpe **out);

/**
 * # Safety
 * `es` must be NULL or a handle from this library that has not been freed.
 */
void hsnn_pgpe_free(struct HsnnPgpe *es);

/**
 * # Safety
 * `es` must be a live handle.
 */
size_t hsnn_pgpe_dim(const struct HsnnPgpe *es);

/**
 * Completed generations.
 *
 * # Safety
 * `es` must be a live handle.
 */
uint64_t hsnn_pgpe_generation(const struct HsnnPgpe *es);

/**
 * # Safety
 * `buf` must point to `len` writable values.
 */
enum HsnnStatus hsnn_pgpe_center(const struct HsnnPgpe *es, double *buf, size_t len);

/**
 * # Safety
 * `buf` must point to `len` writable values.
 */
enum HsnnStatus hsnn_pgpe_sigma(const struct HsnnPgpe *es, double *buf, size_t len);

/**
 * Writes the current generation's genomes, row-major `population x dim`,
 * interleaved as `+0, -0, +1, -1, ...`. Repeated calls return the same rows
 * until `hsnn_pgpe_tell`.
 *
 * # Safety
 * `buf` must point to `len` writable values.
 */
enum HsnnStatus hsnn_pgpe_ask(struct HsnnPgpe *es, double *buf, size_t len);

/**
 * Applies fitnesses in `ask` order and advances one generation.
 *
 * # Safety
 * `fitness` must point to `len` readable values; `stats` may be NULL.
 */
enum HsnnStatus hsnn_pgpe_tell(struct HsnnPgpe *es,
                               const double *fitness,
                               size_t len,
                               struct HsnnGenerationStats *stats);

/**
 * Runs one generation, calling `fitness` serially for each member and
 * episode with the counter-based episode seed.
 *
 * # Safety
 * `fitness` must be safe to call with the arguments described on
 * [`HsnnFitnessFn`]; `stats` may be NULL.
 */
enum HsnnStatus hsnn_pgpe_step(struct HsnnPgpe *es,
                               HsnnFitnessFn fitness,
                               void *user_data,
                               struct HsnnGenerationStats *stats);

/**
 * Maximum-likelihood gamma fit; `scale` is theta.
 *
 * # Safety
 * `samples` must point to `n` readable values and `out` must be writable.
 */
enum HsnnStatus hsnn_fit_gamma(const double *samples, size_t n, struct HsnnFit *out);

/**
 * Maximum-likelihood lognormal fit; `shape` is sigma, `scale` is exp(mu).
 *
 * # Safety
 * `samples` must point to `n` readable values and `out` must be writable.
 */
enum HsnnStatus hsnn_fit_lognormal(const double *samples, size_t n, struct HsnnFit *out);

/**
 * Exact Shapley values over the four neuron properties. `table` holds 16
 * coalition values indexed by mask bits; `values` receives 4 entries.
 *
 * # Safety
 * `table` must point to 16 readable values, `values` to 4 writable ones;
 * `residual` may be NULL.
 */
enum HsnnStatus hsnn_shapley(const double *table, double *values, double *residual);

/**
 * Shapley values of the bundled HalfCheetah ablation table.
 *
 * # Safety
 * `values` must point to 4 writable values.
 */
enum HsnnStatus hsnn_shapley_halfcheetah(double empty_value, double *values);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HETSNN_H */
