#ifndef SRA_H
#define SRA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SraStatus {
  SRA_STATUS_OK = 0,
  SRA_STATUS_NULL_POINTER = 1,
  SRA_STATUS_INVALID_ARGUMENT = 2,
  SRA_STATUS_DIMENSION_MISMATCH = 3,
  SRA_STATUS_NUMERIC = 4,
  SRA_STATUS_PANIC = 5,
} SraStatus;

typedef enum SraAlgorithmKind {
  SRA_ALGORITHM_KIND_SRA = 0,
  SRA_ALGORITHM_KIND_SEM = 1,
  SRA_ALGORITHM_KIND_IEM = 2,
  SRA_ALGORITHM_KIND_SDEM = 3,
} SraAlgorithmKind;

/*
 Opaque learner handle.
 */
typedef struct SraLearner SraLearner;

/*
 Learner hyperparameters. SRA uses `gamma` (may be infinite) and `rho`
 when positive, otherwise the step-size rule from `beta` and `m`.
 sEM and SDEM use `r`; iEM uses nothing.
 */
typedef struct SraAlgorithm {
  enum SraAlgorithmKind kind;
  double gamma;
  double rho;
  double beta;
  double m;
  double r;
} SraAlgorithm;

typedef struct SraStepReport {
  /*
   Negative log density of the observation before the update.
   */
  double score;
  /*
   Nonzero when the update was dropped by the threshold.
   */
  uint8_t truncated;
  double delta_norm;
} SraStepReport;

/*
 Inputs of the truncated-scheme bound with a constant step `rho`.
 */
typedef struct SraBoundInputs {
  double c0;
  double c1;
  double d0;
  double d1;
  double sigma0_sq;
  double sigma1_sq;
  double l;
  double alpha;
  double u;
  uint32_t d;
  double v0n;
  uint64_t n;
  double rho;
  double gamma;
  double m;
} SraBoundInputs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or NULL. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *sra_last_error_message(void);

/*
 Create a learner with `k` components, initialized by moment matching on
 `n_points` row-major points of dimension `dim`.

 # Safety
 `config` must point to a valid `SraAlgorithm`, `window` to
 `n_points * dim` doubles and `out` to writable storage for a pointer.
 */
enum SraStatus sra_learner_new(const struct SraAlgorithm *config,
                               const double *window,
                               uintptr_t n_points,
                               uintptr_t dim,
                               uintptr_t k,
                               struct SraLearner **out);

/*
 Score `y` under the current model, then update. On failure the learner
 is unchanged.

 # Safety
 `learner` must come from `sra_learner_new`, `y` must point to `dim`
 doubles and `report` may be NULL or writable.
 */
enum SraStatus sra_learner_step(struct SraLearner *learner,
                                const double *y,
                                uintptr_t dim,
                                struct SraStepReport *report);

/*
 Dimension and number of components.

 # Safety
 `learner` must be a live handle; `dim` and `k` may be NULL.
 */
enum SraStatus sra_learner_shape(const struct SraLearner *learner, uintptr_t *dim, uintptr_t *k);

/*
 Steps taken so far (including the initialization window) and updates
 dropped by the threshold.

 # Safety
 `learner` must be a live handle; the outputs may be NULL.
 */
enum SraStatus sra_learner_counts(const struct SraLearner *learner,
                                  uint64_t *steps,
                                  uint64_t *dropped);

/*
 Copy the current mixture: `k` weights, `k*dim` means and `k*dim*dim`
 row-major covariances. Any output may be NULL to skip it.

 # Safety
 `learner` must be a live handle and each non-NULL output must have room
 for the number of doubles above.
 */
enum SraStatus sra_learner_params(const struct SraLearner *learner,
                                  double *weights,
                                  double *means,
                                  double *covariances);

/*
 # Safety
 `learner` must be NULL or a handle not yet freed.
 */
void sra_learner_free(struct SraLearner *learner);

/*
 Constant step size β·exp(−γ²/M²)/(2γ); NaN for invalid inputs.
 */
double sra_corollary1_rho(double gamma, double beta, double m);

/*
 ∫_γ^∞ exp(−z²/M²) dz.
 */
double sra_gaussian_tail(double gamma, double m);

/*
 Truncated-scheme bound; `warning` (may be NULL) is set to 1 when ρ
 exceeds the admissibility limit.

 # Safety
 `inputs` must be valid; `out` writable; `warning` NULL or writable.
 */
enum SraStatus sra_theorem2_bound(const struct SraBoundInputs *inputs,
                                  double *out,
                                  uint8_t *warning);

/*
 Mann–Whitney ROC AUC; labels are nonzero for positives.

 # Safety
 `scores` and `labels` must point to `n` elements; `out` writable.
 */
enum SraStatus sra_roc_auc(const double *scores, const uint8_t *labels, uintptr_t n, double *out);

/*
 Area under the benefit/false-alarm curve of `scores` (step t at index
 t−1) over the 1-based range [t_start, t_end].

 # Safety
 `scores` must point to `n` doubles, `change_points` to `n_change_points`
 values (or be NULL when that is 0); `out` writable.
 */
enum SraStatus sra_alarm_auc(const double *scores,
                             uintptr_t n,
                             const uintptr_t *change_points,
                             uintptr_t n_change_points,
                             uintptr_t tau,
                             uintptr_t t_start,
                             uintptr_t t_end,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRA_H */
