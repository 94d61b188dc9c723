/* C interface for the bnmr fairness-aware training and auditing library. */

#ifndef BNMR_H
#define BNMR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum BnmrStatus {
  BNMR_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BNMR_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8 or contained interior NULs.
   */
  BNMR_STATUS_INVALID_STRING = 2,
  /**
   * File could not be read or written.
   */
  BNMR_STATUS_IO = 3,
  /**
   * Input text failed to parse.
   */
  BNMR_STATUS_PARSE = 4,
  /**
   * Inputs were structurally invalid (shape, config or data errors).
   */
  BNMR_STATUS_INVALID = 5,
  /**
   * The operation panicked; this indicates a bug in the library.
   */
  BNMR_STATUS_INTERNAL = 6,
} BnmrStatus;

/**
 * Opaque dataset handle.
 */
typedef struct BnmrDataset BnmrDataset;

/**
 * Opaque calibration-network handle.
 */
typedef struct BnmrNetwork BnmrNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or an empty
 * string. Borrowed; valid until the next failing call on the same thread.
 */
const char *bnmr_last_error_message(void);

/**
 * Free a string returned through a `char **` out-parameter. Null is a no-op.
 */
void bnmr_string_free(char *s);

/**
 * Load a dataset from a CSV file produced by `bnmr gen-data`.
 */
enum BnmrStatus bnmr_dataset_load_csv(const char *path, struct BnmrDataset **out);

/**
 * Generate a synthetic dataset from a generator spec (same text format as
 * the `bnmr gen-data --spec` file).
 */
enum BnmrStatus bnmr_dataset_generate(const char *spec_text,
                                      uintptr_t rows,
                                      uint64_t seed,
                                      struct BnmrDataset **out);

/**
 * Number of rows in the dataset. Returns 0 for a null handle.
 */
uintptr_t bnmr_dataset_len(const struct BnmrDataset *dataset);

/**
 * Release a dataset handle. Null is a no-op.
 */
void bnmr_dataset_free(struct BnmrDataset *dataset);

/**
 * Learn a calibration network (structure, CPTs and an initially uniform
 * prediction node) from a dataset's attribute columns.
 */
enum BnmrStatus bnmr_network_learn(const struct BnmrDataset *dataset, struct BnmrNetwork **out);

/**
 * Parse a network from its text serialization.
 */
enum BnmrStatus bnmr_network_from_text(const char *text, struct BnmrNetwork **out);

/**
 * Serialize a network to its text format. The caller frees `*out` with
 * `bnmr_string_free`.
 */
enum BnmrStatus bnmr_network_to_text(const struct BnmrNetwork *network, char **out);

/**
 * Calibration ratio P(attribute=value | prediction=1) / P(attribute=value).
 */
enum BnmrStatus bnmr_network_calibrator_z(const struct BnmrNetwork *network,
                                          const char *attribute,
                                          uint8_t value,
                                          double *out);

/**
 * Release a network handle. Null is a no-op.
 */
void bnmr_network_free(struct BnmrNetwork *network);

/**
 * Audit binary predictions against a dataset: accuracy, per-attribute true
 * positive rate disparity and disparate impact gap, plus pairwise phi
 * coefficients, rendered as text. `predictions` holds one 0/1 entry per
 * dataset row. The caller frees `*out` with `bnmr_string_free`.
 */
enum BnmrStatus bnmr_audit_predictions(const struct BnmrDataset *dataset,
                                       const uint8_t *predictions,
                                       uintptr_t prediction_count,
                                       char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BNMR_H */
