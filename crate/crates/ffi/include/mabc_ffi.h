#ifndef MABC_FFI_H
#define MABC_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MabcStatus {
  MABC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MABC_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MABC_STATUS_INVALID_UTF8 = 2,
  /**
   * An argument was outside its domain.
   */
  MABC_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The scenario text or name could not be turned into a valid scenario.
   */
  MABC_STATUS_CONFIG = 4,
  /**
   * The protocol step rejected its input.
   */
  MABC_STATUS_PROTOCOL = 5,
  /**
   * Simulation or analysis failed.
   */
  MABC_STATUS_SIMULATION = 6,
  /**
   * A trace could not be parsed.
   */
  MABC_STATUS_PARSE = 7,
  /**
   * Node or round not present in the run.
   */
  MABC_STATUS_NOT_FOUND = 8,
  /**
   * A Rust panic was caught at the boundary.
   */
  MABC_STATUS_PANIC = 9,
} MabcStatus;

/**
 * A single correct node driven one round at a time by the caller.
 */
typedef struct MabcNode MabcNode;

/**
 * The trace and report of one finished run.
 */
typedef struct MabcRun MabcRun;

/**
 * A scenario ready to run.
 */
typedef struct MabcScenario MabcScenario;

/**
 * Protocol parameters, as passed to [`mabc_node_step`].
 */
typedef struct MabcParams {
  size_t n;
  size_t f;
  uint64_t rc;
  double epsilon;
} MabcParams;

/**
 * One value received by a node in the current round.
 */
typedef struct MabcMessage {
  uint32_t sender;
  double value;
} MabcMessage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *mabc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mabc_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void mabc_string_free(char *s);

/**
 * Whether `n >= 3f + 1`.
 */
bool mabc_meets_cardinality(size_t n, size_t f);

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MabcStatus mabc_scenario_from_toml(const char *toml, struct MabcScenario **out);

/**
 * Loads one of the bundled scenarios by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MabcStatus mabc_scenario_builtin(const char *name, struct MabcScenario **out);

/**
 * Replaces the seed of a scenario.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum MabcStatus mabc_scenario_set_seed(struct MabcScenario *scenario, uint64_t seed);

/**
 * Releases a scenario handle. Null is ignored.
 *
 * # Safety
 * `scenario` must come from this library and not have been freed already.
 */
void mabc_scenario_free(struct MabcScenario *scenario);

/**
 * Simulates the scenario and runs every checker over the trace.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum MabcStatus mabc_run(const struct MabcScenario *scenario, struct MabcRun **out);

/**
 * Releases a run handle. Null is ignored.
 *
 * # Safety
 * `run` must come from this library and not have been freed already.
 */
void mabc_run_free(struct MabcRun *run);

/**
 * Number of simulated rounds.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MabcStatus mabc_run_rounds(const struct MabcRun *run, uint64_t *out);

/**
 * Whether the run converged and, if so, at which common new starting
 * round (`0` otherwise).
 *
 * # Safety
 * `run` must be a live handle; `converged` and `at_round` valid pointers.
 */
enum MabcStatus mabc_run_converged(const struct MabcRun *run, bool *converged, uint64_t *at_round);

/**
 * Whether every range check and scenario expectation passed.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MabcStatus mabc_run_passed(const struct MabcRun *run, bool *out);

/**
 * Value of correct node `node` at the start of `round`; round `R + 1` is
 * the final value.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MabcStatus mabc_run_value(const struct MabcRun *run,
                               uint32_t node,
                               uint64_t round,
                               double *out);

/**
 * The trace as JSON Lines. Free the result with [`mabc_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MabcStatus mabc_run_trace_jsonl(const struct MabcRun *run, char **out);

/**
 * The run report as JSON. Free the result with [`mabc_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum MabcStatus mabc_run_report_json(const struct MabcRun *run, char **out);

/**
 * Runs the checkers over a JSON Lines trace and returns the report as
 * JSON. Free the result with [`mabc_string_free`].
 *
 * # Safety
 * `trace_jsonl` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MabcStatus mabc_check_trace(const char *trace_jsonl, char **out);

/**
 * Creates a node with an empty log at round 1.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MabcStatus mabc_node_new(uint32_t id, double value, struct MabcNode **out);

/**
 * Releases a node handle. Null is ignored.
 *
 * # Safety
 * `node` must come from this library and not have been freed already.
 */
void mabc_node_free(struct MabcNode *node);

/**
 * Executes the protocol part of `round`: merges `inbox` into the log, and
 * recomputes the value when the admission test passes. On error the node
 * is left unchanged. `updated` may be null.
 *
 * # Safety
 * `node` must be a live handle; `inbox` must point to `len` messages (or
 * be null with `len == 0`).
 */
enum MabcStatus mabc_node_step(struct MabcNode *node,
                               struct MabcParams params,
                               uint64_t round,
                               const struct MabcMessage *inbox,
                               size_t len,
                               bool *updated);

/**
 * Current value of a node.
 *
 * # Safety
 * `node` must be a live handle and `out` a valid pointer.
 */
enum MabcStatus mabc_node_value(const struct MabcNode *node, double *out);

/**
 * Number of entries currently retained in the node's log.
 *
 * # Safety
 * `node` must be a live handle and `out` a valid pointer.
 */
enum MabcStatus mabc_node_log_len(const struct MabcNode *node, size_t *out);

/**
 * Counts logged values `>= own` (`x`) and `<= own` (`y`).
 *
 * # Safety
 * `values` must point to `len` doubles (or be null with `len == 0`); `x`
 * and `y` must be valid pointers.
 */
enum MabcStatus mabc_count_relative(const double *values,
                                    size_t len,
                                    double own,
                                    size_t *x,
                                    size_t *y);

/**
 * Reduces a log and averages the survivors with `own`. Entry `k` is
 * treated as coming from sender `k + 1`, which decides ties. When the
 * admission test fails `*updated` is false and `*out` is `own`.
 *
 * # Safety
 * `values` must point to `len` doubles (or be null with `len == 0`);
 * `updated` and `out` must be valid pointers.
 */
enum MabcStatus mabc_reduce_average(const double *values,
                                    size_t len,
                                    double own,
                                    size_t f,
                                    bool *updated,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MABC_FFI_H */
