/* C interface to the qkmeans query-clustering library. */

#ifndef QKMEANS_H
#define QKMEANS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Algorithm selector for `qkm_run`.
 */
typedef enum QkmAlgorithm {
  QkmAlgorithm_Noiseless = 0,
  QkmAlgorithm_Outlier = 1,
  QkmAlgorithm_Noisy = 2,
  QkmAlgorithm_NoisyOutlier = 3,
} QkmAlgorithm;

/**
 * Constant-factor preset for the noisy algorithms.
 */
typedef enum QkmScale {
  QkmScale_Paper = 0,
  QkmScale_Desk = 1,
} QkmScale;

/**
 * Status codes returned by every fallible call.
 */
typedef enum QkmStatus {
  QkmStatus_Ok = 0,
  QkmStatus_NullArgument = 1,
  QkmStatus_InvalidArgument = 2,
  QkmStatus_Infeasible = 3,
  QkmStatus_IoError = 4,
  QkmStatus_AlgorithmError = 5,
} QkmStatus;

/**
 * Opaque dataset handle: points, hidden ground truth, and file header.
 */
typedef struct QkmDataset QkmDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; do not free.
 */
const char *qkm_version(void);

/**
 * Release a string allocated by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must come from a `qkm_*` call that documents this free function, and
 * must not be used afterwards.
 */
void qkm_string_free(char *s);

/**
 * Release a dataset handle. NULL is a no-op.
 *
 * # Safety
 * `handle` must come from `qkm_dataset_generate` or `qkm_dataset_load` and
 * must not be used afterwards.
 */
void qkm_dataset_free(struct QkmDataset *handle);

/**
 * Generate a synthetic mixture dataset; writes a fresh handle to `out`.
 *
 * # Safety
 * `out` must be a valid pointer to a `QkmDataset*` slot.
 */
enum QkmStatus qkm_dataset_generate(size_t n,
                                    size_t k,
                                    size_t d,
                                    double alpha,
                                    double p_o,
                                    double sigma,
                                    double center_spread,
                                    double min_center_sep_sigmas,
                                    double sep_eps,
                                    uint64_t seed,
                                    struct QkmDataset **out);

/**
 * Load a dataset file written by this library or the `qkm` CLI.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid slot.
 */
enum QkmStatus qkm_dataset_load(const char *path, struct QkmDataset **out);

/**
 * Write the dataset to `path` in the versioned header+CSV format.
 *
 * # Safety
 * `handle` must be a live dataset handle; `path` a valid NUL-terminated
 * string.
 */
enum QkmStatus qkm_dataset_save(const struct QkmDataset *handle, const char *path);

/**
 * Number of points. Zero when the handle is NULL.
 *
 * # Safety
 * `handle` must be NULL or a live dataset handle.
 */
size_t qkm_dataset_len(const struct QkmDataset *handle);

/**
 * Point dimension. Zero when the handle is NULL.
 *
 * # Safety
 * `handle` must be NULL or a live dataset handle.
 */
size_t qkm_dataset_dim(const struct QkmDataset *handle);

/**
 * Number of ground-truth clusters. Zero when the handle is NULL.
 *
 * # Safety
 * `handle` must be NULL or a live dataset handle.
 */
size_t qkm_dataset_k(const struct QkmDataset *handle);

/**
 * Number of ground-truth outliers. Zero when the handle is NULL.
 *
 * # Safety
 * `handle` must be NULL or a live dataset handle.
 */
size_t qkm_dataset_outlier_count(const struct QkmDataset *handle);

/**
 * Run one algorithm trial against the dataset's simulated oracle and return
 * the JSON report row through `out_json` (free with `qkm_string_free`).
 *
 * `gamma < 0` selects the data-driven automatic rejection radius; any
 * nonnegative value (including INFINITY) is used as given. `p_e` is ignored
 * by the noiseless algorithms.
 *
 * # Safety
 * `handle` must be a live dataset handle and `out_json` a valid slot.
 */
enum QkmStatus qkm_run(const struct QkmDataset *handle,
                       enum QkmAlgorithm algorithm,
                       double delta,
                       double eps,
                       double p_e,
                       double gamma,
                       enum QkmScale scale,
                       uint64_t seed,
                       char **out_json);

/**
 * `2 alpha k (ln k + m ln 2)`.
 */
double qkm_bounds_dixie(double alpha, size_t k, size_t m);

/**
 * `n eps^3 / k^7`.
 */
double qkm_bounds_min_cluster_threshold(double n, size_t k, double eps);

/**
 * Expected-query bound of the two-phase outlier pipeline.
 *
 * # Safety
 * The out-pointers must be valid `double` slots or NULL (NULL skips them).
 */
enum QkmStatus qkm_bounds_thm_qkmwol(double alpha,
                                     size_t k,
                                     double delta,
                                     double eps,
                                     double p_o,
                                     double *out_phase1,
                                     double *out_phase2,
                                     double *out_total);

/**
 * Sample sizes for the noisy pipeline (theorem constants).
 *
 * # Safety
 * The out-pointers must be valid slots or NULL.
 */
enum QkmStatus qkm_bounds_noisy_m(double alpha,
                                  size_t k,
                                  double delta,
                                  double eps,
                                  double p_e,
                                  double *out_m_tilde,
                                  uint64_t *out_m);

/**
 * Sample and subgraph sizes for the noisy pipeline with outliers
 * (theorem constants).
 *
 * # Safety
 * The out-pointers must be valid `double` slots or NULL.
 */
enum QkmStatus qkm_bounds_noisy_outlier_params(double alpha,
                                               size_t k,
                                               double delta,
                                               double eps,
                                               double p_e,
                                               double p_o,
                                               double *out_m_tilde,
                                               double *out_m,
                                               double *out_n);

/**
 * Bernoulli KL divergence and its quadratic lower bound.
 *
 * # Safety
 * The out-pointers must be valid `double` slots or NULL.
 */
enum QkmStatus qkm_bounds_kl(double x, double y, double *out_kl, double *out_quadratic);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QKMEANS_H */
