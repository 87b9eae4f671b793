#ifndef CRGAN_H
#define CRGAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum CrganStatus {
  CRGAN_STATUS_OK = 0,
  CRGAN_STATUS_NULL_POINTER = 1,
  CRGAN_STATUS_INVALID_ARGUMENT = 2,
  CRGAN_STATUS_DIMENSION = 3,
  CRGAN_STATUS_DOMAIN = 4,
  CRGAN_STATUS_NUMERIC = 5,
  CRGAN_STATUS_CONFIG = 6,
  CRGAN_STATUS_CHECKPOINT = 7,
  CRGAN_STATUS_IO = 8,
  CRGAN_STATUS_DIVERGENCE = 9,
  CRGAN_STATUS_PANIC = 10,
} CrganStatus;

/**
 * A cascading-rejection head with fixed weights (no spectral normalization).
 */
typedef struct CrganCrHead CrganCrHead;

/**
 * A generator restored from a training checkpoint.
 */
typedef struct CrganGenerator CrganGenerator;

/**
 * Coverage statistics of generated points against the eight-mode ring.
 */
typedef struct CrganModeReport {
  size_t modes_covered;
  double high_quality_fraction;
} CrganModeReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *crgan_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *crgan_version(void);

/**
 * `out = v − (w·v / w·w)·w` for vectors of length `len`.
 *
 * # Safety
 * `v`, `w` and `out` must each point to `len` doubles; `out` may alias neither input.
 */
enum CrganStatus crgan_reject(const double *v, const double *w, size_t len, double *out);

/**
 * Creates a head from `n_scores × feature_dim` row-major weights.
 *
 * # Safety
 * `weights` must point to `n_scores * feature_dim` doubles and `out` to a writable handle slot.
 */
enum CrganStatus crgan_cr_head_new(const double *weights,
                                   size_t n_scores,
                                   size_t feature_dim,
                                   struct CrganCrHead **out);

/**
 * Scores a `feature_dim × batch` feature matrix into `n_scores × batch` scores.
 *
 * # Safety
 * `head` must come from [`crgan_cr_head_new`]; `features` must hold
 * `feature_dim * batch` doubles and `scores` room for `n_scores * batch`.
 */
enum CrganStatus crgan_cr_head_scores(const struct CrganCrHead *head,
                                      const double *features,
                                      size_t batch,
                                      double *scores);

/**
 * Number of scores `N` produced by `head`.
 *
 * # Safety
 * `head` must come from [`crgan_cr_head_new`]; `out` must be writable.
 */
enum CrganStatus crgan_cr_head_num_scores(const struct CrganCrHead *head, size_t *out);

/**
 * Releases a head. NULL is ignored.
 *
 * # Safety
 * `head` must come from [`crgan_cr_head_new`] and not be used afterwards.
 */
void crgan_cr_head_free(struct CrganCrHead *head);

/**
 * Fréchet distance between Gaussian fits of two `dim × n` sample matrices.
 *
 * # Safety
 * `a` must hold `dim * n_a` doubles, `b` `dim * n_b` doubles; `out` must be writable.
 */
enum CrganStatus crgan_frechet_distance(const double *a,
                                        size_t n_a,
                                        const double *b,
                                        size_t n_b,
                                        size_t dim,
                                        double *out);

/**
 * Mode coverage of `2 × n` points against the eight-mode ring (radius 2, σ 0.05).
 *
 * # Safety
 * `points` must hold `2 * n` doubles; `out` must be writable.
 */
enum CrganStatus crgan_mode_report_ring8(const double *points,
                                         size_t n,
                                         struct CrganModeReport *out);

/**
 * Loads the generator stored in a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` a writable handle slot.
 */
enum CrganStatus crgan_generator_load(const char *path, struct CrganGenerator **out);

/**
 * Whether the generator takes class labels (1) or not (0).
 *
 * # Safety
 * `generator` must come from [`crgan_generator_load`]; `out` must be writable.
 */
enum CrganStatus crgan_generator_is_conditional(const struct CrganGenerator *generator,
                                                int32_t *out);

/**
 * Draws `n` points into `points` (`2 × n`). For a conditional generator the
 * sampled labels go to `labels` when it is non-NULL.
 *
 * # Safety
 * `generator` must come from [`crgan_generator_load`]; `points` must have
 * room for `2 * n` doubles and `labels`, if non-NULL, for `n` values.
 */
enum CrganStatus crgan_generator_sample(const struct CrganGenerator *generator,
                                        size_t n,
                                        uint64_t seed,
                                        double *points,
                                        size_t *labels);

/**
 * Releases a generator. NULL is ignored.
 *
 * # Safety
 * `generator` must come from [`crgan_generator_load`] and not be used afterwards.
 */
void crgan_generator_free(struct CrganGenerator *generator);

/**
 * Trains one run from `key=value` config text and reports its final metrics.
 *
 * # Safety
 * `config_text` must be a NUL-terminated UTF-8 string; `final_fd` and
 * `final_report` must be writable.
 */
enum CrganStatus crgan_train(const char *config_text,
                             double *final_fd,
                             struct CrganModeReport *final_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRGAN_H */
