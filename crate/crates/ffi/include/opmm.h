#ifndef OPMM_H
#define OPMM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum OpmmStatus {
  OPMM_STATUS_OK = 0,
  // A required pointer argument was null.
  OPMM_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  OPMM_STATUS_INVALID_UTF8 = 2,
  // The configuration failed to parse or validate.
  OPMM_STATUS_CONFIG = 3,
  // A buffer length does not match the problem dimension.
  OPMM_STATUS_DIMENSION = 4,
  // Invalid set, constant or strategy.
  OPMM_STATUS_INVALID_INPUT = 5,
  // The inner solver failed in strict mode.
  OPMM_STATUS_SOLVER = 6,
  OPMM_STATUS_IO = 7,
  // The session already played all `T` rounds.
  OPMM_STATUS_DONE = 8,
  // An internal panic was caught.
  OPMM_STATUS_PANIC = 9,
} OpmmStatus;

// Opaque run state.
typedef struct OpmmSession OpmmSession;

// Averaged regrets after the rounds played so far.
typedef struct OpmmRegrets {
  size_t rounds;
  double lagrangian;
  double max_violation;
  double complementarity;
  double objective;
} OpmmRegrets;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread. The pointer stays valid
// until the next failing call on the same thread. Never null.
const char *opmm_last_error(void);

// Library version as a static NUL-terminated string.
const char *opmm_version(void);

// Euclidean projection of `x` onto the box `[lower, upper]`, all of length `n`.
//
// # Safety
// Every pointer must reference `n` readable (or, for `out`, writable) doubles.
enum OpmmStatus opmm_project_box(const double *lower,
                                 const double *upper,
                                 const double *x,
                                 size_t n,
                                 double *out);

// Euclidean projection of `x` onto the ball of `radius` around `center`.
//
// # Safety
// `center`, `x` and `out` must reference `n` doubles.
enum OpmmStatus opmm_project_ball(const double *center,
                                  double radius,
                                  const double *x,
                                  size_t n,
                                  double *out);

// Euclidean projection of `x` onto the probability simplex of dimension `n`.
//
// # Safety
// `x` and `out` must reference `n` doubles.
enum OpmmStatus opmm_project_simplex(const double *x, size_t n, double *out);

// Creates a session from a TOML configuration. On success `*out` owns the
// session; on failure it is set to null.
//
// # Safety
// `config_toml` must be a NUL-terminated string and `out` a valid pointer.
enum OpmmStatus opmm_session_new(const char *config_toml, struct OpmmSession **out);

// Releases a session. Null is a no-op.
//
// # Safety
// `s` must come from [`opmm_session_new`] and not be used afterwards.
void opmm_session_free(struct OpmmSession *s);

// Plays one round. Returns `Done` once all rounds are played.
//
// # Safety
// `s` must be a live session.
enum OpmmStatus opmm_session_step(struct OpmmSession *s);

// Plays every remaining round.
//
// # Safety
// `s` must be a live session.
enum OpmmStatus opmm_session_run(struct OpmmSession *s);

// Decision dimension `n`, constraint count `p` and rounds played so far.
//
// # Safety
// `s` must be a live session; output pointers may be null to skip them.
enum OpmmStatus opmm_session_shape(struct OpmmSession *s, size_t *n, size_t *p, size_t *rounds);

// Copies the current decision `x^t` into `out` (length `n`).
//
// # Safety
// `s` must be a live session and `out` must reference `len` doubles.
enum OpmmStatus opmm_session_x(struct OpmmSession *s, double *out, size_t len);

// Copies the current multipliers `λ^t` into `out` (length `p`).
//
// # Safety
// `s` must be a live session and `out` must reference `len` doubles.
enum OpmmStatus opmm_session_lambda(struct OpmmSession *s, double *out, size_t len);

// Averaged regrets over the rounds played. Fails before the first round.
//
// # Safety
// `s` must be a live session and `out` a valid pointer.
enum OpmmStatus opmm_session_regrets(struct OpmmSession *s, struct OpmmRegrets *out);

// Writes the per-round CSV of the rounds played so far to `path`.
//
// # Safety
// `s` must be a live session and `path` a NUL-terminated string.
enum OpmmStatus opmm_session_write_csv(struct OpmmSession *s, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPMM_H */
