#include "climex/nhgr.hpp"

#include <cmath>
#include <limits>

namespace climex {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454836;
}  // namespace

double nhgr_log_density(double x, double alpha, double beta) {
  if (!(beta > 0.0)) throw numeric_error("nhgr_log_density: beta must be positive");
  const double s = (x - alpha) / beta;
  return -0.5 * kLogTwoPi - std::log(beta) - 0.5 * s * s;
}

double nhgr_log_likelihood(const AnnualSeries& s, const NhgrParams& theta,
                           const TrendWindow& w, bool require_positive_mean) {
  const double inv_span = 1.0 / static_cast<double>(w.span - 1);
  double total = 0.0;
  for (int i = 0; i < s.span(); ++i) {
    const double f = static_cast<double>(s.year(i) - w.base_year) * inv_span;
    const double beta_t = theta.beta0 + f * theta.beta1;
    if (!(beta_t > 0.0)) return kNegInf;
    const double alpha_t = theta.alpha0 + f * theta.alpha1;
    if (require_positive_mean && !(alpha_t > 0.0)) return kNegInf;
    const double z = (s.values[i] - alpha_t) / beta_t;
    total += -0.5 * kLogTwoPi - std::log(beta_t) - 0.5 * z * z;
  }
  return total;
}

namespace {

Extrapolated checked_params(const NhgrParams& theta, int t, const TrendWindow& w,
                            bool require_positive_mean, double& alpha_t,
                            double& beta_t) {
  Extrapolated out;
  out.year = t;
  beta_t = param_at(theta.beta0, theta.beta1, t, w);
  if (!(beta_t > 0.0)) {
    out.valid = false;
    out.param = 'b';
    return out;
  }
  alpha_t = param_at(theta.alpha0, theta.alpha1, t, w);
  if (require_positive_mean && !(alpha_t > 0.0)) {
    out.valid = false;
    out.param = 'a';
    return out;
  }
  return out;
}

}  // namespace

Extrapolated predict_mean_draw(const NhgrParams& theta, int t, const TrendWindow& w,
                               SplitMix64& rng, bool require_positive_mean) {
  double alpha_t = 0, beta_t = 0;
  Extrapolated out = checked_params(theta, t, w, require_positive_mean, alpha_t, beta_t);
  if (!out.valid) return out;
  out.value = alpha_t + beta_t * rng.normal();
  return out;
}

double delta_m_parametric(const NhgrParams& theta, const TrendWindow& w, int t0,
                          int t1) {
  return (theta.alpha1 * static_cast<double>(t1 - t0)) /
         static_cast<double>(w.span - 1);
}

Extrapolated delta_m_predictive(const NhgrParams& theta, const TrendWindow& w,
                                SplitMix64& rng, int t0, int t1,
                                bool require_positive_mean) {
  Extrapolated a = predict_mean_draw(theta, t0, w, rng, require_positive_mean);
  if (!a.valid) return a;
  Extrapolated b = predict_mean_draw(theta, t1, w, rng, require_positive_mean);
  if (!b.valid) return b;
  Extrapolated out;
  out.value = b.value - a.value;
  out.year = t1;
  return out;
}

bool nhgr_in_prior_support(const NhgrParams& theta, const TrendWindow& w,
                           bool require_positive_mean) {
  const int t_end = w.base_year + w.span - 1;
  for (int t : {w.base_year, t_end}) {
    if (!(param_at(theta.beta0, theta.beta1, t, w) > 0.0)) return false;
    if (require_positive_mean && !(param_at(theta.alpha0, theta.alpha1, t, w) > 0.0))
      return false;
  }
  return true;
}

}  // namespace climex
