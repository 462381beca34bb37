#ifndef CEVPOLAR_H
#define CEVPOLAR_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CevStatus {
  CEV_STATUS_OK = 0,
  CEV_STATUS_NULL_POINTER = 1,
  /**
   * Out-of-domain argument or an invalid model.
   */
  CEV_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed or unreadable configuration.
   */
  CEV_STATUS_CONFIG = 3,
  /**
   * Quadrature failure, non-finite integrand or degenerate weights.
   */
  CEV_STATUS_NUMERIC = 4,
  CEV_STATUS_PANIC = 5,
} CevStatus;

/**
 * A limit law `H_{eta,zeta}`.
 */
typedef struct CevLimitLaw CevLimitLaw;

/**
 * A polar model.
 */
typedef struct CevModel CevModel;

/**
 * Weighted draws of `(X, Y)` given `X > t`.
 */
typedef struct CevWeightedSample CevWeightedSample;

/**
 * Normalization at a threshold: `X` is centred at `t` and scaled by `psi_t`,
 * `Y` is centred at `m_t` and scaled by `a_t`.
 */
typedef struct CevFrame {
  double t;
  double m_t;
  double psi_t;
  double a_t;
} CevFrame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *cev_version(void);

/**
 * Message of the last failure on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *cev_last_error(void);

/**
 * Builds a model from JSON: `{"polar": {...}}` or `{"density": {...}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum CevStatus cev_model_from_json(const char *json, struct CevModel **out);

/**
 * # Safety
 * `model` must come from [`cev_model_from_json`] and not be used afterwards.
 */
void cev_model_free(struct CevModel *model);

/**
 * Normalization of the model at threshold `t`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CevStatus cev_model_frame(const struct CevModel *model, double t, struct CevFrame *out);

/**
 * `P(X ≤ t + psi_t x_std, Y ≤ m_t + a_t y_std | X > t)` by quadrature.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CevStatus cev_model_conditional_cdf(const struct CevModel *model,
                                         double t,
                                         double x_std,
                                         double y_std,
                                         double *out);

/**
 * `P(X > x)` by quadrature.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CevStatus cev_model_survival_x(const struct CevModel *model, double x, double *out);

/**
 * The limit law of the model.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CevStatus cev_model_limit_law(const struct CevModel *model, struct CevLimitLaw **out);

/**
 * Draws `n` weighted pairs given `X > t`, seeded by `seed`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CevStatus cev_model_sample_conditional(const struct CevModel *model,
                                            double t,
                                            size_t n,
                                            uint64_t seed,
                                            struct CevWeightedSample **out);

/**
 * Symmetric law with `eta > 1`, `zeta > 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CevStatus cev_limit_law_new(double eta, double zeta, struct CevLimitLaw **out);

/**
 * # Safety
 * `law` must be a live handle that is not used afterwards.
 */
void cev_limit_law_free(struct CevLimitLaw *law);

/**
 * # Safety
 * `law` must be a live handle; `eta` and `zeta` writable.
 */
enum CevStatus cev_limit_law_params(const struct CevLimitLaw *law, double *eta, double *zeta);

/**
 * # Safety
 * `law` must be a live handle and `out` writable.
 */
enum CevStatus cev_limit_law_cdf(const struct CevLimitLaw *law, double y, double *out);

/**
 * # Safety
 * `law` must be a live handle and `out` writable.
 */
enum CevStatus cev_limit_law_pdf(const struct CevLimitLaw *law, double y, double *out);

/**
 * # Safety
 * `law` must be a live handle and `out` writable.
 */
enum CevStatus cev_limit_law_quantile(const struct CevLimitLaw *law, double p, double *out);

/**
 * # Safety
 * `sample` must be a live handle that is not used afterwards.
 */
void cev_sample_free(struct CevWeightedSample *sample);

/**
 * Number of draws; 0 for a null handle.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t cev_sample_len(const struct CevWeightedSample *sample);

/**
 * Kish effective sample size; NaN for a null handle.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
double cev_sample_effective_size(const struct CevWeightedSample *sample);

/**
 * Copies the draws into caller arrays of length `len`, which must be at
 * least [`cev_sample_len`]. Weights are normalized to sum to one.
 *
 * # Safety
 * `sample` must be a live handle; `x`, `y` and `weight` valid for `len` writes.
 */
enum CevStatus cev_sample_copy(const struct CevWeightedSample *sample,
                               double *x,
                               double *y,
                               double *weight,
                               size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CEVPOLAR_H */
