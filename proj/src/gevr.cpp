#include "climex/gevr.hpp"

#include <cmath>
#include <limits>

namespace climex {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double param_at(double eta0, double eta1, int t, const TrendWindow& w) {
  return eta0 + w.frac(t) * eta1;
}

double gev_log_density(double x, double mu, double sigma, double xi) {
  if (!(sigma > 0.0)) throw numeric_error("gev_log_density: sigma must be positive");
  const double s = (x - mu) / sigma;
  if (std::abs(xi) < kXiZeroTol) {
    return -std::log(sigma) - s - std::exp(-s);
  }
  const double z = 1.0 + xi * s;
  if (!(z > 0.0)) return kNegInf;
  const double log_z = std::log(z);
  // z^(-1/xi) shares the log with the (1 + 1/xi) log z term.
  return -std::log(sigma) - (1.0 + 1.0 / xi) * log_z - std::exp(-log_z / xi);
}

double gev_cdf(double x, double mu, double sigma, double xi) {
  if (!(sigma > 0.0)) throw numeric_error("gev_cdf: sigma must be positive");
  const double s = (x - mu) / sigma;
  if (std::abs(xi) < kXiZeroTol) return std::exp(-std::exp(-s));
  const double z = 1.0 + xi * s;
  if (z <= 0.0) return xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::pow(z, -1.0 / xi));
}

double gev_quantile(double p, double mu, double sigma, double xi) {
  if (!(sigma > 0.0)) throw numeric_error("gev_quantile: sigma must be positive");
  if (!(p > 0.0 && p < 1.0)) throw numeric_error("gev_quantile: p must be in (0,1)");
  const double L = -std::log(p);
  if (std::abs(xi) < kXiZeroTol) return mu - sigma * std::log(L);
  return mu + (sigma / xi) * (std::pow(L, -xi) - 1.0);
}

double return_value(double mu, double sigma, double xi, const ReturnSpec& spec) {
  return gev_quantile(spec.p(), mu, sigma, xi);
}

double gevr_log_likelihood(const AnnualSeries& s, const GevrParams& theta,
                           const TrendWindow& w) {
  const double inv_span = 1.0 / static_cast<double>(w.span - 1);
  double total = 0.0;
  for (int i = 0; i < s.span(); ++i) {
    const double f = static_cast<double>(s.year(i) - w.base_year) * inv_span;
    const double sigma_t = theta.sigma0 + f * theta.sigma1;
    if (!(sigma_t > 0.0)) return kNegInf;
    const double mu_t = theta.mu0 + f * theta.mu1;
    const double xi_t = theta.xi0 + f * theta.xi1;
    const double ld = gev_log_density(s.values[i], mu_t, sigma_t, xi_t);
    if (ld == kNegInf) return kNegInf;
    total += ld;
  }
  return total;
}

Extrapolated return_value_at_year(const GevrParams& theta, int t,
                                  const TrendWindow& w, const ReturnSpec& spec) {
  Extrapolated out;
  out.year = t;
  const double sigma_t = param_at(theta.sigma0, theta.sigma1, t, w);
  if (!(sigma_t > 0.0)) {
    out.valid = false;
    out.param = 's';
    return out;
  }
  const double xi_t = param_at(theta.xi0, theta.xi1, t, w);
  if (xi_t <= -1.0) {
    out.valid = false;
    out.param = 'x';
    return out;
  }
  const double mu_t = param_at(theta.mu0, theta.mu1, t, w);
  out.value = return_value(mu_t, sigma_t, xi_t, spec);
  return out;
}

Extrapolated delta_q(const GevrParams& theta, const TrendWindow& w,
                     const ReturnSpec& spec, int t0, int t1) {
  Extrapolated a = return_value_at_year(theta, t0, w, spec);
  if (!a.valid) return a;
  Extrapolated b = return_value_at_year(theta, t1, w, spec);
  if (!b.valid) return b;
  Extrapolated out;
  out.value = b.value - a.value;
  out.year = t1;
  return out;
}

bool gevr_in_prior_support(const GevrParams& theta, const TrendWindow& w) {
  const int t_end = w.base_year + w.span - 1;
  for (int t : {w.base_year, t_end}) {
    const double sigma_t = param_at(theta.sigma0, theta.sigma1, t, w);
    if (!(sigma_t > 0.0)) return false;
    const double xi_t = param_at(theta.xi0, theta.xi1, t, w);
    if (!(xi_t > kXiLower && xi_t < kXiUpper)) return false;
  }
  return true;
}

}  // namespace climex
