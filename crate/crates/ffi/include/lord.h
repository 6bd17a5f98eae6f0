#ifndef LORD_H
#define LORD_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bytes in one rendered 224×224 RGB frame.
 */
#define LORD_FRAME_BYTES 150528

#define LORD_ACTION_COUNT 5

#define LORD_TTC_THRESHOLD 5.0

typedef enum LordStatus {
  LORD_STATUS_OK = 0,
  LORD_STATUS_NULL_POINTER = 1,
  LORD_STATUS_INVALID_ARGUMENT = 2,
  LORD_STATUS_CONFIG = 3,
  LORD_STATUS_SPAWN = 4,
  LORD_STATUS_LIFECYCLE = 5,
  LORD_STATUS_EMBEDDING = 6,
  LORD_STATUS_UNAVAILABLE = 7,
  LORD_STATUS_PERSISTENCE = 8,
  LORD_STATUS_NUMERICAL = 9,
  LORD_STATUS_BUFFER_TOO_SMALL = 10,
  LORD_STATUS_PANIC = 11,
} LordStatus;

/**
 * Simulator instance with an optional reward.
 */
typedef struct LordEnv LordEnv;

/**
 * Trained policy with its own sampling stream.
 */
typedef struct LordPolicy LordPolicy;

typedef struct LordStepResult {
  /**
   * Reward of the attached spec, NaN when none is attached.
   */
  double reward;
  double ego_x;
  double ego_speed;
  uint32_t step_index;
  bool collided;
  bool terminated;
  bool truncated;
} LordStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated name of a status code.
 */
const char *lord_status_name(enum LordStatus status);

const char *lord_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message size
 * including the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t lord_last_error(char *buf, size_t len);

/**
 * Creates an environment from a TOML `key = value` config, or the default
 * config when `config_toml` is null. The world is empty until reset.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be valid.
 */
enum LordStatus lord_env_new(const char *config_toml, struct LordEnv **out);

/**
 * Creates an evaluation environment for a setting name such as
 * `lane-4-density-2`.
 *
 * # Safety
 * `setting` must be a NUL-terminated string; `out` must be valid.
 */
enum LordStatus lord_env_new_setting(const char *setting, struct LordEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from `lord_env_new*` not yet freed.
 */
void lord_env_free(struct LordEnv *env);

/**
 * Attaches a reward spec given as TOML (e.g. `kind = "grad"`). A non-null
 * `endpoint` selects the remote embedding service instead of the
 * reference backends. Takes effect from the next reset.
 *
 * # Safety
 * `env` must be a live handle; strings must be NUL-terminated or null
 * where allowed.
 */
enum LordStatus lord_env_set_reward(struct LordEnv *env,
                                    const char *spec_toml,
                                    const char *endpoint);

/**
 * Starts a new episode from `seed`.
 *
 * # Safety
 * `env` must be a live handle.
 */
enum LordStatus lord_env_reset(struct LordEnv *env, uint64_t seed);

/**
 * Advances one policy step with meta-action `action` (0 lane left, 1 idle,
 * 2 lane right, 3 faster, 4 slower).
 *
 * # Safety
 * `env` must be a live handle and `out` valid.
 */
enum LordStatus lord_env_step(struct LordEnv *env, uint32_t action, struct LordStepResult *out);

/**
 * Number of reals in a kinematics observation (rows × 8).
 *
 * # Safety
 * `env` must be null or a live handle; null gives 0.
 */
size_t lord_env_observation_len(const struct LordEnv *env);

/**
 * Writes the row-major kinematics observation of the current state.
 *
 * # Safety
 * `env` must be a live handle; `buf` valid for `len` doubles.
 */
enum LordStatus lord_env_observation(struct LordEnv *env, double *buf, size_t len);

/**
 * Writes the text observation of the current state as a C string.
 * `needed` (nullable) receives the required size including the NUL, also
 * on `BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `env` must be a live handle; `buf` valid for `len` bytes.
 */
enum LordStatus lord_env_text(struct LordEnv *env, char *buf, size_t len, size_t *needed);

/**
 * Writes the 224×224 RGB frame (row-major, `LORD_FRAME_BYTES` bytes).
 *
 * # Safety
 * `env` must be a live handle; `buf` valid for `len` bytes.
 */
enum LordStatus lord_env_render(struct LordEnv *env, uint8_t *buf, size_t len);

/**
 * Loads a policy checkpoint; `seed` starts its action-sampling stream.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid.
 */
enum LordStatus lord_policy_load(const char *path, uint64_t seed, struct LordPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle from `lord_policy_load` not yet freed.
 */
void lord_policy_free(struct LordPolicy *policy);

/**
 * Action probabilities and state value for a raw kinematics observation.
 *
 * # Safety
 * `obs` valid for `len` doubles, `probs` for `LORD_ACTION_COUNT` doubles,
 * `value` nullable.
 */
enum LordStatus lord_policy_evaluate(struct LordPolicy *policy,
                                     const double *obs,
                                     size_t len,
                                     double *probs,
                                     double *value);

/**
 * Samples an action for the environment's current state.
 *
 * # Safety
 * Both handles must be live; `action` must be valid.
 */
enum LordStatus lord_policy_act(struct LordPolicy *policy, struct LordEnv *env, uint32_t *action);

/**
 * Cosine similarity of two `dim`-long vectors.
 *
 * # Safety
 * `a` and `b` valid for `dim` doubles; `out` valid.
 */
enum LordStatus lord_cosine_similarity(const double *a, const double *b, size_t dim, double *out);

/**
 * Opposite-goal reward `1 - cos(obs, goal)`.
 *
 * # Safety
 * `obs` and `goal` valid for `dim` doubles; `out` valid.
 */
enum LordStatus lord_opposite_reward(const double *obs,
                                     const double *goal,
                                     size_t dim,
                                     double *out);

double lord_grad_reward(double ego_speed, bool crashed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LORD_H */
