#ifndef PROBE_ARENA_H
#define PROBE_ARENA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PaBackend {
  PaBackend_Tabular = 0,
  PaBackend_Neural = 1,
} PaBackend;

typedef enum PaLearnerKind {
  PaLearnerKind_Q = 0,
  PaLearnerKind_HyperQ = 1,
} PaLearnerKind;

/**
 * Result of every fallible call.
 */
typedef enum PaStatus {
  PaStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  PaStatus_NullPointer = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  PaStatus_InvalidUtf8 = 2,
  /**
   * An argument was out of range or named an unknown kind.
   */
  PaStatus_InvalidArgument = 3,
  /**
   * A configuration failed to parse or validate.
   */
  PaStatus_Validation = 4,
  /**
   * An experiment or learner failed while running.
   */
  PaStatus_Runtime = 5,
  /**
   * A numerical self-check did not pass.
   */
  PaStatus_CheckFailed = 6,
  /**
   * The engine panicked; the handle involved should be freed.
   */
  PaStatus_Panic = 7,
} PaStatus;

/**
 * A parsed and validated experiment configuration.
 */
typedef struct PaConfig PaConfig;

/**
 * A Q or Hyper-Q learner.
 */
typedef struct PaLearner PaLearner;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes, into `buf`. Returns the buffer size the full
 * message needs, or 0 if there is no message. `buf` may be null to query
 * the size.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes of writes.
 */
uintptr_t pa_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pa_version(void);

/**
 * Stage payoffs of the default matrix. Actions: 0 = cooperate, 1 = defect.
 *
 * # Safety
 * `out_self` and `out_opp` must be valid for writes.
 */
enum PaStatus pa_payoff(uint32_t a_self, uint32_t a_opp, int32_t *out_self, int32_t *out_opp);

/**
 * Parses and validates a TOML experiment configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PaStatus pa_config_parse(const char *text, struct PaConfig **out);

/**
 * Number of seeds in the configuration, or 0 for a null handle.
 *
 * # Safety
 * `cfg` must be null or a live handle from [`pa_config_parse`].
 */
uintptr_t pa_config_seed_count(const struct PaConfig *cfg);

/**
 * # Safety
 * `cfg` must be null or a handle from [`pa_config_parse`] not yet freed.
 */
void pa_config_free(struct PaConfig *cfg);

/**
 * Runs every seed of the configuration, writing artifacts under `out_dir`.
 *
 * # Safety
 * `cfg` must be a live handle; `out_dir` a NUL-terminated path.
 */
enum PaStatus pa_run(const struct PaConfig *cfg, const char *out_dir, uint32_t parallel);

/**
 * Creates a learner with default hyperparameters. The tabular backend uses
 * learning rate 0.1 and is only available to plain Q. `planned_steps` sizes the exploration schedule.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PaStatus pa_learner_new(enum PaLearnerKind kind,
                             enum PaBackend backend,
                             uint64_t planned_steps,
                             uint64_t seed,
                             struct PaLearner **out);

/**
 * Trains the learner for `matches` matches of `steps` rounds against a
 * static strategy named as in configuration files (`tft`, `sneaky`, ...).
 *
 * # Safety
 * `learner` must be a live handle; `strategy` a NUL-terminated string.
 */
enum PaStatus pa_learner_train(struct PaLearner *learner,
                               const char *strategy,
                               uint32_t matches,
                               uint32_t steps,
                               uint64_t seed);

/**
 * Writes `Q(state, cooperate)` and `Q(state, defect)` to `out[0..2]`.
 *
 * # Safety
 * `learner` must be a live handle; `out` valid for two writes.
 */
enum PaStatus pa_learner_q_values(const struct PaLearner *learner, uint8_t state, double *out);

/**
 * Mean greedy score over `matches` matches of `steps` rounds against a
 * static strategy. The learner does not learn during evaluation.
 *
 * # Safety
 * `learner` must be a live handle; `strategy` a NUL-terminated string;
 * `out_score` valid for writes.
 */
enum PaStatus pa_learner_evaluate(struct PaLearner *learner,
                                  const char *strategy,
                                  uint32_t steps,
                                  uint32_t matches,
                                  uint64_t seed,
                                  double *out_score);

/**
 * # Safety
 * `learner` must be null or a handle from [`pa_learner_new`] not yet freed.
 */
void pa_learner_free(struct PaLearner *learner);

/**
 * Finite-difference check of the network gradients over `probes` random
 * probes. Writes the largest relative error seen.
 *
 * # Safety
 * `out_max_rel_error` must be null or valid for writes.
 */
enum PaStatus pa_gradcheck(uint32_t probes, double *out_max_rel_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROBE_ARENA_H */
