#pragma once

#include "climex/gevr.hpp"
#include "climex/rng.hpp"
#include "climex/types.hpp"

namespace climex {

struct NhgrParams {
  double alpha0 = 0, alpha1 = 0;  // mean: base-year value and total change
  double beta0 = 1, beta1 = 0;    // sd: base-year value and total change
};

// Exact Gaussian log density; beta <= 0 throws.
double nhgr_log_density(double x, double alpha, double beta);

// Sum of per-year log densities via param_at. Returns -inf if any year has
// beta_t <= 0, or alpha_t <= 0 while positive means are required (the
// default; the relax switch exists for synthetic data on arbitrary scales).
double nhgr_log_likelihood(const AnnualSeries& s, const NhgrParams& theta,
                           const TrendWindow& w, bool require_positive_mean = true);

// One draw of M_t ~ N(alpha_t, beta_t^2). Invalid when extrapolated
// beta_t <= 0, or alpha_t <= 0 under required positivity.
Extrapolated predict_mean_draw(const NhgrParams& theta, int t, const TrendWindow& w,
                               SplitMix64& rng, bool require_positive_mean = true);

// Deterministic mean change alpha_{t1} - alpha_{t0} = ((t1-t0)/(span-1))*alpha1.
// Evaluated as (alpha1*(t1-t0))/(span-1) so e.g. 8.5*100/85 is exactly 10.
double delta_m_parametric(const NhgrParams& theta, const TrendWindow& w,
                          int t0 = 2025, int t1 = 2125);

// One draw of M_{t1} - M_{t0} with independent draws per year; distributed
// N(((t1-t0)/(span-1))*alpha1, beta_{t0}^2 + beta_{t1}^2).
Extrapolated delta_m_predictive(const NhgrParams& theta, const TrendWindow& w,
                                SplitMix64& rng, int t0 = 2025, int t1 = 2125,
                                bool require_positive_mean = true);

// alpha_t > 0 (unless relaxed) and beta_t > 0 at both window endpoints.
bool nhgr_in_prior_support(const NhgrParams& theta, const TrendWindow& w,
                           bool require_positive_mean = true);

}  // namespace climex
