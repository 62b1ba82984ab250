#ifndef QFOREST_H
#define QFOREST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QfStatus {
  QF_STATUS_OK = 0,
  QF_STATUS_NULL_POINTER = 1,
  QF_STATUS_INVALID_INPUT = 2,
  QF_STATUS_DEGENERATE = 3,
  QF_STATUS_IO = 4,
  QF_STATUS_PARSE = 5,
  QF_STATUS_PANIC = 6,
} QfStatus;

typedef enum QfStrategy {
  /**
   * Classes split into two halves at random.
   */
  QF_STRATEGY_EVEN_SPLIT = 0,
  /**
   * One class against the rest.
   */
  QF_STRATEGY_ONE_AGAINST_ALL = 1,
} QfStrategy;

typedef enum QfEmbeddingKind {
  /**
   * IQP with one qubit per feature.
   */
  QF_EMBEDDING_KIND_IQP = 0,
  /**
   * Hardware-efficient ansatz; features are cycled over the rotations.
   */
  QF_EMBEDDING_KIND_HEA = 1,
} QfEmbeddingKind;

/**
 * A trained model plus the kernel cache its predictions draw from.
 */
typedef struct QfModel QfModel;

/**
 * Forest hyperparameters; fill with `qf_forest_params_default` first.
 */
typedef struct QfForestParams {
  size_t n_trees;
  /**
   * Rows per bag; 0 uses every training row.
   */
  size_t partition_size;
  size_t max_depth;
  size_t min_split;
  size_t landmarks;
  double c;
  /**
   * Shots per kernel estimate; 0 for exact values.
   */
  uint64_t shots;
  enum QfStrategy strategy;
  enum QfEmbeddingKind embedding;
  /**
   * Only read for `Hea`; 0 layers means one per qubit.
   */
  size_t hea_qubits;
  size_t hea_layers;
  uint64_t seed;
} QfForestParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *qf_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *qf_version(void);

/**
 * Writes the default hyperparameters into `out`.
 *
 * # Safety
 * `out` must be null or point to writable `QfForestParams`.
 */
enum QfStatus qf_forest_params_default(struct QfForestParams *out);

/**
 * Trains a quantum random forest. Labels are class indices below
 * `n_classes`. On success `*out` owns a model to release with `qf_model_free`.
 *
 * # Safety
 * `features` must hold `n_rows * n_cols` doubles, `labels` `n_rows` values,
 * `params` must be readable and `out` writable.
 */
enum QfStatus qf_forest_train(const double *features,
                              size_t n_rows,
                              size_t n_cols,
                              const uint32_t *labels,
                              size_t n_classes,
                              const struct QfForestParams *params,
                              struct QfModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void qf_model_free(struct QfModel *model);

/**
 * Number of classes the model predicts.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum QfStatus qf_model_n_classes(const struct QfModel *model, size_t *out);

/**
 * Number of raw input features the model expects.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum QfStatus qf_model_n_features(const struct QfModel *model, size_t *out);

/**
 * Predicted class index for each row.
 *
 * # Safety
 * `features` must hold `n_rows * n_cols` doubles and `out_labels` must have
 * room for `n_rows` values.
 */
enum QfStatus qf_model_predict(const struct QfModel *model,
                               const double *features,
                               size_t n_rows,
                               size_t n_cols,
                               uint32_t *out_labels);

/**
 * Class distributions, row-major `n_rows × n_classes`. Forest models only.
 *
 * # Safety
 * `features` must hold `n_rows * n_cols` doubles and `out` must have room for
 * `n_rows * n_classes` doubles.
 */
enum QfStatus qf_model_predict_proba(const struct QfModel *model,
                                     const double *features,
                                     size_t n_rows,
                                     size_t n_cols,
                                     double *out);

/**
 * Writes the model as JSON to `path`.
 *
 * # Safety
 * `model` must be a live handle and `path` a nul-terminated string.
 */
enum QfStatus qf_model_save_json(const struct QfModel *model, const char *path);

/**
 * Loads a model written by `qf_model_save_json` or the command-line tool.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` writable.
 */
enum QfStatus qf_model_load_json(const char *path, struct QfModel **out);

/**
 * The model as a JSON string; release it with `qf_string_free`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum QfStatus qf_model_to_json(const struct QfModel *model, char **out);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void qf_string_free(char *s);

/**
 * Fidelity kernel `|⟨φ(x1)|φ(x2)⟩|²`, estimated from `shots` samples
 * (0 for the exact value) with noise drawn from `seed`.
 *
 * # Safety
 * `x1` and `x2` must each hold `dim` doubles and `out` must be writable.
 */
enum QfStatus qf_kernel_evaluate(const double *x1,
                                 const double *x2,
                                 size_t dim,
                                 enum QfEmbeddingKind embedding,
                                 size_t hea_qubits,
                                 size_t hea_layers,
                                 uint64_t shots,
                                 uint64_t seed,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QFOREST_H */
