#ifndef BERTHSIM_H
#define BERTHSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stdint.h>

/**
 * Result codes. Zero is success.
 */
typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_ARGUMENT = 1,
  BS_STATUS_INVALID_UTF8 = 2,
  /**
   * Model or scenario text has syntax errors.
   */
  BS_STATUS_PARSE = 3,
  /**
   * The model parsed but fails validation.
   */
  BS_STATUS_INVALID = 4,
  /**
   * Simulation, scenario or other runtime failure.
   */
  BS_STATUS_RUNTIME = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  BS_STATUS_PANIC = 6,
} BsStatus;

/**
 * Opaque model handle.
 */
typedef struct BsModel BsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *bs_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *bs_last_error(void);

/**
 * Parses model source text into a new handle. Syntax errors give
 * `BS_STATUS_PARSE`; the handle is not validated.
 *
 * # Safety
 * `text` is a NUL-terminated string; `out` points to writable storage.
 */
enum BsStatus bs_model_parse(const char *text, struct BsModel **out);

/**
 * Loads the bundled berth rehabilitation model.
 *
 * # Safety
 * `out` points to writable storage.
 */
enum BsStatus bs_model_load_reference(struct BsModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `m` is null or a handle not yet freed.
 */
void bs_model_free(struct BsModel *m);

/**
 * Writes the diagnostics as a JSON array to `*out`. Returns
 * `BS_STATUS_INVALID` when any diagnostic is an error; `*out` is set either
 * way.
 *
 * # Safety
 * `m` is a live handle; `out` points to writable storage.
 */
enum BsStatus bs_model_validate(const struct BsModel *m, char **out);

/**
 * Writes the model in canonical source form to `*out`.
 *
 * # Safety
 * `m` is a live handle; `out` points to writable storage.
 */
enum BsStatus bs_model_serialize(const struct BsModel *m, char **out);

/**
 * Replicates one scenario and writes the JSON report to `*out`.
 *
 * `name` picks a scenario from `scenarios_text` (null name: the first).
 * With null `scenarios_text`, a name is looked up in the bundled ladders
 * and a null name runs the model as written. `reps` of 0 and a null `seed`
 * keep the scenario's own settings.
 *
 * # Safety
 * String arguments are null or NUL-terminated; `seed` is null or readable;
 * `m` is a live handle; `out` points to writable storage.
 */
enum BsStatus bs_replicate_json(const struct BsModel *m,
                                const char *scenarios_text,
                                const char *name,
                                uint32_t reps,
                                const uint64_t *seed,
                                char **out);

/**
 * Runs every scenario of `ladder_text` as a cumulative ladder under one
 * seed and writes the JSON report to `*out`.
 *
 * # Safety
 * As for `bs_replicate_json`.
 */
enum BsStatus bs_sweep_json(const struct BsModel *m,
                            const char *ladder_text,
                            uint32_t reps,
                            const uint64_t *seed,
                            char **out);

/**
 * Frees a string returned through an `out` parameter. Null is ignored.
 *
 * # Safety
 * `s` is null or a string from this library not yet freed.
 */
void bs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BERTHSIM_H */
