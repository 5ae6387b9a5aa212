#ifndef GAUSSLOC_H
#define GAUSSLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes shared by every fallible entry point.
 */
typedef enum GlStatus {
  GL_STATUS_OK = 0,
  GL_STATUS_NULL_POINTER = 1,
  GL_STATUS_INVALID_ARGUMENT = 2,
  GL_STATUS_ENCODING = 3,
  GL_STATUS_DIMENSION_MISMATCH = 4,
  GL_STATUS_BUDGET_EXCEEDED = 5,
  GL_STATUS_PRECONDITION = 6,
  GL_STATUS_UNSUPPORTED = 7,
  GL_STATUS_BUFFER_TOO_SMALL = 8,
  GL_STATUS_INTERNAL = 9,
  GL_STATUS_PANIC = 10,
} GlStatus;

/**
 * Disorder handle.
 */
typedef struct GlEnvironment GlEnvironment;

/**
 * Exact Gibbs measure handle.
 */
typedef struct GlGibbs GlGibbs;

/**
 * Model handle.
 */
typedef struct GlModel GlModel;

/**
 * Configuration handle.
 */
typedef struct GlState GlState;

typedef struct GlGibbsSummary {
  double beta;
  double log_z;
  double free_energy;
  double free_energy_derivative;
  double free_energy_second;
  double mean_overlap;
} GlGibbsSummary;

typedef struct GlAtomReport {
  double passage_time;
  double max_atom;
  double n_times_atom;
  size_t turns_of_argmax;
} GlAtomReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty after a success.
 * Valid until the next gaussloc call on the same thread.
 */
const char *gl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gl_version(void);

/**
 * # Safety
 * `out` must be writable.
 */
enum GlStatus gl_model_rem(size_t n, struct GlModel **out);

/**
 * Mixed p-spin with `ξ(q) = Σ β_p² q^p` from `len` pairs `(orders[k], betas[k])`.
 *
 * # Safety
 * `orders` and `betas` must hold `len` elements; `out` must be writable.
 */
enum GlStatus gl_model_pspin(size_t n,
                             const uint32_t *orders,
                             const double *betas,
                             size_t len,
                             struct GlModel **out);

/**
 * Directed polymer with the simple random walk in dimension `d`.
 *
 * # Safety
 * `out` must be writable.
 */
enum GlStatus gl_model_polymer(size_t n, size_t d, struct GlModel **out);

/**
 * # Safety
 * `model` must come from a `gl_model_*` constructor and not be freed twice.
 */
void gl_model_free(struct GlModel *model);

/**
 * Number of disorder coordinates, 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t gl_model_feature_count(const struct GlModel *model);

/**
 * Size parameter `n`, 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t gl_model_n(const struct GlModel *model);

/**
 * Seeded standard Gaussian disorder for `model`.
 *
 * # Safety
 * `model` must be live; `out` must be writable.
 */
enum GlStatus gl_env_sample(const struct GlModel *model,
                            uint64_t seed,
                            uint64_t replica,
                            struct GlEnvironment **out);

/**
 * Disorder from explicit values.
 *
 * # Safety
 * `values` must hold `len` doubles; `out` must be writable.
 */
enum GlStatus gl_env_from_values(const double *values, size_t len, struct GlEnvironment **out);

/**
 * # Safety
 * `env` must be a live handle or null.
 */
size_t gl_env_len(const struct GlEnvironment *env);

/**
 * Copy the disorder into `buf`, which must hold `gl_env_len` doubles.
 *
 * # Safety
 * `env` must be live; `buf` must hold `cap` doubles.
 */
enum GlStatus gl_env_values(const struct GlEnvironment *env, double *buf, size_t cap);

/**
 * # Safety
 * `env` must come from a `gl_env_*` constructor and not be freed twice.
 */
void gl_env_free(struct GlEnvironment *env);

/**
 * Parse a configuration: a `0`/`1` string for spins (character `i` is
 * spin `i`, `1` meaning `+1`) or step letters `RLUDFB` for paths.
 *
 * # Safety
 * `model` must be live, `text` NUL-terminated, `out` writable.
 */
enum GlStatus gl_state_parse(const struct GlModel *model, const char *text, struct GlState **out);

/**
 * Canonical text of a state; `needed` receives the buffer size required.
 *
 * # Safety
 * `state` must be live; `buf` must hold `cap` bytes; `needed` may be null.
 */
enum GlStatus gl_state_to_string(const struct GlState *state,
                                 char *buf,
                                 size_t cap,
                                 size_t *needed);

/**
 * # Safety
 * `state` must come from `gl_state_parse` and not be freed twice.
 */
void gl_state_free(struct GlState *state);

/**
 * `H(σ) = Σ_i g_i φ_i(σ)`.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum GlStatus gl_hamiltonian(const struct GlModel *model,
                             const struct GlEnvironment *env,
                             const struct GlState *state,
                             double *out);

/**
 * `R(σ¹, σ²)`.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum GlStatus gl_overlap(const struct GlModel *model,
                         const struct GlState *a,
                         const struct GlState *b,
                         double *out);

/**
 * Exact Gibbs measure under the default size budget.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum GlStatus gl_gibbs_new(const struct GlModel *model,
                           const struct GlEnvironment *env,
                           double beta,
                           struct GlGibbs **out);

/**
 * # Safety
 * `gibbs` must come from `gl_gibbs_new` and not be freed twice.
 */
void gl_gibbs_free(struct GlGibbs *gibbs);

/**
 * # Safety
 * `gibbs` must be live; `out` writable.
 */
enum GlStatus gl_gibbs_summary(const struct GlGibbs *gibbs, struct GlGibbsSummary *out);

/**
 * `R(σ) = ⟨R(σ, ·)⟩`.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum GlStatus gl_gibbs_conditional_overlap(const struct GlGibbs *gibbs,
                                           const struct GlState *state,
                                           double *out);

/**
 * Gibbs mass of `{σ : R(σ) <= δ}`.
 *
 * # Safety
 * `gibbs` must be live; `out` writable.
 */
enum GlStatus gl_gibbs_a_delta_mass(const struct GlGibbs *gibbs, double delta, double *out);

/**
 * Passage time `L_n` and the step indices of the lexicographically first
 * maximizing path (`n` bytes written to `steps`).
 *
 * # Safety
 * `env` must be live; `out` writable; `steps` must hold `cap` bytes.
 */
enum GlStatus gl_passage_time(size_t d,
                              size_t n,
                              const struct GlEnvironment *env,
                              double *out,
                              uint8_t *steps,
                              size_t cap);

/**
 * # Safety
 * `env` must be live; `out` writable.
 */
enum GlStatus gl_max_atom(size_t d,
                          size_t n,
                          const struct GlEnvironment *env,
                          double beta,
                          struct GlAtomReport *out);

/**
 * Decimal count of length-`n` paths in `Z^d` with exactly `j` turns.
 *
 * # Safety
 * `buf` must hold `cap` bytes; `needed` may be null.
 */
enum GlStatus gl_count_paths_by_turns(size_t n,
                                      size_t d,
                                      size_t j,
                                      char *buf,
                                      size_t cap,
                                      size_t *needed);

/**
 * # Safety
 * `out` must be writable.
 */
enum GlStatus gl_rem_limit_free_energy(double beta, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum GlStatus gl_rem_limit_mean_overlap(double beta, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAUSSLOC_H */
