#ifndef NOMA_SAT_H
#define NOMA_SAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NomaStatus {
  NOMA_STATUS_OK = 0,
  NOMA_STATUS_NULL_POINTER = 1,
  NOMA_STATUS_INVALID_ARGUMENT = 2,
  NOMA_STATUS_TRAINING = 3,
  NOMA_STATUS_CONFIG = 4,
  NOMA_STATUS_IO = 5,
  NOMA_STATUS_SERIALIZATION = 6,
  NOMA_STATUS_PANIC = 7,
} NomaStatus;

// Trained classifier handle.
typedef struct NomaSvmModel NomaSvmModel;

typedef struct NomaSrParams {
  double b;
  double m;
  double omega;
} NomaSrParams;

typedef struct NomaLinkBudget {
  // Power share of the near user, in (0, 1).
  double alpha;
  // Linear transmit power.
  double p_s;
  double noise_var;
  uint32_t pilots;
} NomaLinkBudget;

typedef struct NomaRateReport {
  double rate_near;
  double rate_far;
  double sum_rate;
  bool sic_ok;
} NomaRateReport;

typedef struct NomaGaResult {
  double best_c;
  double best_width;
  double best_mse;
  size_t generations_run;
  size_t evaluations;
} NomaGaResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL if none.
// The pointer stays valid until the next failing call on the same thread.
const char *noma_last_error_message(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void noma_string_free(char *s);

// Shadowed-Rician parameters at elevation `theta_deg` (20 to 80 degrees).
//
// # Safety
// `out` must point to writable memory for one `NomaSrParams`.
enum NomaStatus noma_sr_params(double theta_deg, struct NomaSrParams *out);

// SINR of the far message at a receiver with channel gain `gain`.
//
// # Safety
// `budget` must be readable and `out` writable.
enum NomaStatus noma_sinr_far(const struct NomaLinkBudget *budget, double gain, double *out);

// SINR of the near message after successive interference cancellation.
//
// # Safety
// `budget` must be readable and `out` writable.
enum NomaStatus noma_sinr_near(const struct NomaLinkBudget *budget, double gain, double *out);

// NOMA rates with the SIC role at the `near_gain` receiver.
//
// # Safety
// `budget` must be readable and `out` writable.
enum NomaStatus noma_pair_rates(const struct NomaLinkBudget *budget,
                                double near_gain,
                                double far_gain,
                                struct NomaRateReport *out);

// Equal-time TDMA rates of the same two users.
//
// # Safety
// `budget` must be readable and `out` writable.
enum NomaStatus noma_tdma_rates(const struct NomaLinkBudget *budget,
                                double near_gain,
                                double far_gain,
                                struct NomaRateReport *out);

// Trains a Gaussian-kernel SVM on `n` rows of `features` (row-major,
// two columns) with labels in {-1, +1}. Features are standardized.
//
// # Safety
// `features` must hold `2 * n` doubles, `labels` `n` doubles, and `out`
// must be writable. The handle written to `out` is released with
// `noma_svm_free`.
enum NomaStatus noma_svm_train(const double *features,
                               const double *labels,
                               size_t n,
                               double c_reg,
                               double width,
                               struct NomaSvmModel **out);

// Releases a model handle. NULL is ignored.
//
// # Safety
// `model` must come from `noma_svm_train` and not have been freed.
void noma_svm_free(struct NomaSvmModel *model);

// Decision value `g(x)` at the point `(x0, x1)`.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum NomaStatus noma_svm_decision_value(const struct NomaSvmModel *model,
                                        double x0,
                                        double x1,
                                        double *out);

// Predicted label at `(x0, x1)`: +1 near, -1 far.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum NomaStatus noma_svm_classify(const struct NomaSvmModel *model,
                                  double x0,
                                  double x1,
                                  int32_t *out);

// Number of support vectors.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum NomaStatus noma_svm_support_count(const struct NomaSvmModel *model, size_t *out);

// JSON document of the model. The string is released with `noma_string_free`.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum NomaStatus noma_svm_to_json(const struct NomaSvmModel *model, char **out);

// Genetic search for `(C, width)` with the default population, operators
// and search intervals, scored by stratified cross-validation.
//
// # Safety
// Same layout rules as `noma_svm_train`; `out` must be writable.
enum NomaStatus noma_ga_optimize(const double *features,
                                 const double *labels,
                                 size_t n,
                                 uint64_t seed,
                                 size_t max_generations,
                                 struct NomaGaResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NOMA_SAT_H */
