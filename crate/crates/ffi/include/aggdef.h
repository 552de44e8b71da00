#ifndef AGGDEF_H
#define AGGDEF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum AggdefStatus {
  AGGDEF_STATUS_OK = 0,
  AGGDEF_STATUS_NULL_POINTER = 1,
  AGGDEF_STATUS_INVALID_INPUT = 2,
  AGGDEF_STATUS_CONFIG = 3,
  AGGDEF_STATUS_NUMERICAL = 4,
  AGGDEF_STATUS_PROTOCOL = 5,
  AGGDEF_STATUS_IO = 6,
  AGGDEF_STATUS_PANIC = 7,
  AGGDEF_STATUS_BUFFER_TOO_SMALL = 8,
} AggdefStatus;

/**
 * Opaque simulation handle.
 */
typedef struct AggdefSimulation AggdefSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a simulation from a built-in preset.
 *
 * `horizon < 0` keeps the preset horizon.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AggdefStatus aggdef_simulation_new_preset(const char *name,
                                               uint64_t seed,
                                               int64_t horizon,
                                               struct AggdefSimulation **out);

/**
 * Creates a simulation from the text of a run configuration (TOML).
 *
 * Trajectory CSV references are not supported here; inline the waypoints.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AggdefStatus aggdef_simulation_new_from_toml(const char *config,
                                                  struct AggdefSimulation **out);

/**
 * Releases a simulation. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle not freed before.
 */
void aggdef_simulation_free(struct AggdefSimulation *sim);

/**
 * Advances one tick. `advanced` receives false once the horizon is reached.
 *
 * # Safety
 * `sim` must be a live handle; `advanced` may be null.
 */
enum AggdefStatus aggdef_simulation_step(struct AggdefSimulation *sim, bool *advanced);

/**
 * Runs to the horizon.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum AggdefStatus aggdef_simulation_run(struct AggdefSimulation *sim);

/**
 * Current tick and simulated time in seconds.
 *
 * # Safety
 * `sim` must be a live handle; `tick` and `time` writable.
 */
enum AggdefStatus aggdef_simulation_time(const struct AggdefSimulation *sim,
                                         uint64_t *tick,
                                         double *time);

/**
 * Number of defenders.
 *
 * # Safety
 * `sim` must be a live handle and `n` writable.
 */
enum AggdefStatus aggdef_simulation_num_agents(const struct AggdefSimulation *sim, uintptr_t *n);

/**
 * Copies defender positions as `x0 y0 z0 x1 y1 z1 ...` into `buf`.
 *
 * `len` is the capacity in doubles; fewer than `3 N` gives
 * `AGGDEF_STATUS_BUFFER_TOO_SMALL` and leaves `buf` untouched.
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` doubles.
 */
enum AggdefStatus aggdef_simulation_positions(const struct AggdefSimulation *sim,
                                              double *buf,
                                              uintptr_t len);

/**
 * Dynamic regret accumulated so far (NaN when the oracle is off).
 *
 * # Safety
 * `sim` must be a live handle and `regret` writable.
 */
enum AggdefStatus aggdef_simulation_regret(const struct AggdefSimulation *sim, double *regret);

/**
 * Writes trace, metrics, summary and run file into `dir`.
 *
 * # Safety
 * `sim` must be a live handle and `dir` a NUL-terminated path.
 */
enum AggdefStatus aggdef_simulation_write_outputs(const struct AggdefSimulation *sim,
                                                  const char *dir);

/**
 * Metropolis mixing matrix of the proximity graph of `n` points
 * (`positions` holds `3 n` doubles), written row-major into `weights`
 * (`n * n` doubles).
 *
 * # Safety
 * `positions` must hold `3 n` doubles and `weights` `weights_len` doubles.
 */
enum AggdefStatus aggdef_metropolis_weights(uintptr_t n,
                                            const double *positions,
                                            double radius,
                                            double *weights,
                                            uintptr_t weights_len);

/**
 * Euclidean projection of `x` onto the box `[lower, upper]`; all arrays hold 3 doubles.
 *
 * # Safety
 * Each pointer must reference 3 valid doubles.
 */
enum AggdefStatus aggdef_project_box(const double *x,
                                     const double *lower,
                                     const double *upper,
                                     double *out);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length plus one, so a caller
 * can size the buffer; 1 means no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
uintptr_t aggdef_last_error_message(char *buf, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AGGDEF_H */
