#ifndef SOIT2FNN_H
#define SOIT2FNN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum Soit2fnnStatus {
  SOIT2FNN_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SOIT2FNN_STATUS_NULL_POINTER = 1,
  /**
   * Invalid configuration or argument.
   */
  SOIT2FNN_STATUS_CONFIG = 2,
  /**
   * Training or evaluation produced non-finite values.
   */
  SOIT2FNN_STATUS_NUMERIC = 3,
  /**
   * File could not be read or written.
   */
  SOIT2FNN_STATUS_IO = 4,
  /**
   * Model file or CSV is malformed.
   */
  SOIT2FNN_STATUS_PARSE = 5,
  /**
   * Buffer or input length does not match the model dimensions.
   */
  SOIT2FNN_STATUS_SHAPE = 6,
  /**
   * Argument is not valid UTF-8.
   */
  SOIT2FNN_STATUS_UTF8 = 7,
  /**
   * Internal panic caught at the boundary.
   */
  SOIT2FNN_STATUS_PANIC = 8,
} Soit2fnnStatus;

/**
 * Opaque trained model.
 */
typedef struct Soit2fnnModel Soit2fnnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *soit2fnn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *soit2fnn_version(void);

/**
 * Load a model file written by the library.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum Soit2fnnStatus soit2fnn_model_load(const char *path, struct Soit2fnnModel **out);

/**
 * Parse a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum Soit2fnnStatus soit2fnn_model_from_json(const char *json, struct Soit2fnnModel **out);

/**
 * Write a model to `path`.
 *
 * # Safety
 * `model` must come from a load function; `path` must be NUL-terminated.
 */
enum Soit2fnnStatus soit2fnn_model_save(const struct Soit2fnnModel *model, const char *path);

/**
 * Release a model. Null is ignored.
 *
 * # Safety
 * `model` must come from a load function and not be used afterwards.
 */
void soit2fnn_model_free(struct Soit2fnnModel *model);

/**
 * Number of inputs `n`, rules `M` and outputs `K`.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
enum Soit2fnnStatus soit2fnn_model_dims(const struct Soit2fnnModel *model,
                                        size_t *n_inputs,
                                        size_t *n_rules,
                                        size_t *n_outputs);

/**
 * Forecast from one raw (unnormalized) input row into `y`.
 *
 * # Safety
 * `x` must hold `n` doubles and `y` must have room for `k` doubles.
 */
enum Soit2fnnStatus soit2fnn_model_predict(const struct Soit2fnnModel *model,
                                           const double *x,
                                           size_t n,
                                           double *y,
                                           size_t k);

/**
 * Rule firing intervals (without the per-output layer) for one raw input
 * row. `lower` and `upper` receive `m` values each.
 *
 * # Safety
 * `x` must hold `n` doubles; `lower` and `upper` must have room for `m`.
 */
enum Soit2fnnStatus soit2fnn_model_firing(const struct Soit2fnnModel *model,
                                          const double *x,
                                          size_t n,
                                          double *lower,
                                          double *upper,
                                          size_t m);

/**
 * Mackey-Glass series sampled at integer times `t_start .. t_start + len`.
 *
 * # Safety
 * `out` must have room for `len` doubles.
 */
enum Soit2fnnStatus soit2fnn_mackey_glass(double tau,
                                          double x0,
                                          double step,
                                          size_t t_start,
                                          size_t len,
                                          double *out);

/**
 * Analytic versus finite-difference gradients on `configs` random networks.
 * `passed` receives 1 or 0.
 *
 * # Safety
 * The out pointers must be writable.
 */
enum Soit2fnnStatus soit2fnn_grad_check(uint64_t seed,
                                        size_t configs,
                                        int32_t *passed,
                                        double *max_rel_error);

/**
 * Run the experiment described by a TOML config file. With `write_artifacts`
 * non-zero, models and reports go to the configured output directory.
 * `test_rmse` receives the average test RMSE and `n_rules` the rule count of
 * the first model.
 *
 * # Safety
 * `config_path` must be NUL-terminated; the out pointers must be writable.
 */
enum Soit2fnnStatus soit2fnn_run_experiment(const char *config_path,
                                            int32_t write_artifacts,
                                            double *test_rmse,
                                            size_t *n_rules);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOIT2FNN_H */
