/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef ZEROSUM_PS_H
#define ZEROSUM_PS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ZSPS_AGENT_PS 0

#define ZSPS_AGENT_FP 1

#define ZSPS_AGENT_EQ 2

#define ZSPS_AGENT_RANDOM 3

// Dirichlet(1) per `(s, a, b)`, known rewards.
#define ZSPS_PRIOR_JOINT 0

// Dirichlet(1) per `(s, a, b)`, Beta(1, 1) on signed-Bernoulli rewards;
// the game must pay signed-Bernoulli rewards.
#define ZSPS_PRIOR_JOINT_BETA 1

// Per-player Dirichlet(1 / cells); predator-prey games only.
#define ZSPS_PRIOR_DECOUPLED 2

typedef enum ZspsStatus {
  ZSPS_STATUS_OK = 0,
  ZSPS_STATUS_NULL_POINTER = 1,
  ZSPS_STATUS_INVALID_ARGUMENT = 2,
  ZSPS_STATUS_NUMERICAL = 3,
  ZSPS_STATUS_IO = 4,
  ZSPS_STATUS_PANIC = 5,
} ZspsStatus;

// Opaque game handle.
typedef struct ZspsGame ZspsGame;

// Opaque handle to a finished match.
typedef struct ZspsRun ZspsRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The
// pointer stays valid until the next call into this library.
const char *zsps_last_error(void);

// Predator-prey game on a `width x height` torus.
enum ZspsStatus zsps_game_predator_prey(size_t width,
                                        size_t height,
                                        size_t horizon,
                                        struct ZspsGame **out);

// Random game with uniform-simplex transitions and uniform mean rewards.
enum ZspsStatus zsps_game_random(size_t num_states,
                                 size_t num_actions_p1,
                                 size_t num_actions_p2,
                                 size_t horizon,
                                 uint64_t seed,
                                 struct ZspsGame **out);

// Game from its JSON document.
//
// # Safety
// `json` must be a NUL-terminated string.
enum ZspsStatus zsps_game_from_json(const char *json, struct ZspsGame **out);

// # Safety
// `game` must come from a `zsps_game_*` constructor and not be used again.
void zsps_game_free(struct ZspsGame *game);

// # Safety
// `game` must be a live handle; each output must be writable.
enum ZspsStatus zsps_game_dims(const struct ZspsGame *game,
                               size_t *num_states,
                               size_t *num_actions_p1,
                               size_t *num_actions_p2,
                               size_t *horizon);

// Expected total reward to player 1 at equilibrium.
//
// # Safety
// `game` must be a live handle and `value` writable.
enum ZspsStatus zsps_game_equilibrium_value(const struct ZspsGame *game, double *value);

// Solves the `rows x cols` matrix game stored row-major in `payoff`.
// Either strategy pointer may be null.
//
// # Safety
// `payoff` must hold `rows * cols` doubles; non-null strategy buffers must
// hold `rows` and `cols` doubles.
enum ZspsStatus zsps_solve_matrix(const double *payoff,
                                  size_t rows,
                                  size_t cols,
                                  double *value,
                                  double *row_strategy,
                                  double *col_strategy);

// Plays `episodes` episodes between agents `p1` and `p2` (`ZSPS_AGENT_*`)
// with posterior samplers using prior `prior` (`ZSPS_PRIOR_*`).
//
// # Safety
// `game` must be a live handle and `out` writable.
enum ZspsStatus zsps_run_match(const struct ZspsGame *game,
                               uint32_t p1,
                               uint32_t p2,
                               uint32_t prior,
                               size_t episodes,
                               uint64_t seed,
                               struct ZspsRun **out);

// # Safety
// `run` must come from [`zsps_run_match`] and not be used again.
void zsps_run_free(struct ZspsRun *run);

// Number of episodes in the run.
//
// # Safety
// `run` must be a live handle and `episodes` writable.
enum ZspsStatus zsps_run_episodes(const struct ZspsRun *run, size_t *episodes);

// Copies the cumulative regret after each episode into `out`, which must
// hold at least the run's episode count.
//
// # Safety
// `run` must be a live handle; `out` must hold `len` doubles.
enum ZspsStatus zsps_run_cumulative_regret(const struct ZspsRun *run, double *out, size_t len);

// Writes the run as the per-episode regret CSV.
//
// # Safety
// `run` must be a live handle and `path` NUL-terminated.
enum ZspsStatus zsps_run_write_csv(const struct ZspsRun *run, const char *path);

// `min(37 H S sqrt(A B K H ln(S A B K H)), 2 K H)`.
double zsps_theorem1_bound(size_t num_states,
                           size_t num_actions_p1,
                           size_t num_actions_p2,
                           size_t horizon,
                           size_t episodes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZEROSUM_PS_H */
