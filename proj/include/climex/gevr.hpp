#pragma once

#include "climex/types.hpp"

namespace climex {

// Linear parameter trend: eta_t = eta0 + ((t - base_year)/(span - 1)) * eta1.
// eta0 is the base-year value, eta1 the total change over the window; t may
// lie beyond the window (extrapolation to 2125 is intended).
struct TrendWindow {
  int base_year = 2015;
  int span = 86;

  double frac(int t) const {
    return static_cast<double>(t - base_year) / static_cast<double>(span - 1);
  }
};

double param_at(double eta0, double eta1, int t, const TrendWindow& w);

struct GevrParams {
  double mu0 = 0, mu1 = 0;
  double sigma0 = 1, sigma1 = 0;
  double xi0 = 0, xi1 = 0;
};

struct ReturnSpec {
  double T = 100.0;  // return period in years
  double p() const { return 1.0 - 1.0 / T; }
};

// Shape values inside this tolerance of zero use the Gumbel branch.
inline constexpr double kXiZeroTol = 1e-8;

// Bounds of the shape prior; sigma prior is (0, inf), mu unconstrained.
inline constexpr double kXiLower = -1.0;
inline constexpr double kXiUpper = 0.2;

// Complete GEV log density. Outside the support (z = 1 + xi(x-mu)/sigma <= 0)
// returns -inf so samplers can treat such candidates as zero likelihood.
// sigma <= 0 throws.
double gev_log_density(double x, double mu, double sigma, double xi);

// Closed-form GEV CDF on the same branch convention.
double gev_cdf(double x, double mu, double sigma, double xi);

// p-quantile of the GEV; return_value is this at p = 1 - 1/T.
double gev_quantile(double p, double mu, double sigma, double xi);

double return_value(double mu, double sigma, double xi, const ReturnSpec& spec);

// Sum of per-year log densities with parameters from param_at. Returns -inf
// if any year has sigma_t <= 0 or falls outside the support.
double gevr_log_likelihood(const AnnualSeries& s, const GevrParams& theta,
                           const TrendWindow& w);

// Result of evaluating a functional that can leave the valid parameter
// region under extrapolation; invalid draws are excluded and counted.
struct Extrapolated {
  double value = 0;
  bool valid = true;
  int year = 0;        // offending year when invalid
  char param = 0;      // 's' sigma, 'x' xi, 'b' beta, 'a' alpha
};

// Q_t = return_value(mu_t, sigma_t, xi_t). Invalid when the extrapolated
// sigma_t <= 0 or xi_t <= -1.
Extrapolated return_value_at_year(const GevrParams& theta, int t,
                                  const TrendWindow& w, const ReturnSpec& spec);

// Q_{t1} - Q_{t0}; default window 2025 -> 2125.
Extrapolated delta_q(const GevrParams& theta, const TrendWindow& w,
                     const ReturnSpec& spec, int t0 = 2025, int t1 = 2125);

// True iff sigma_t > 0 and xi_t in (kXiLower, kXiUpper) at both window
// endpoints; the sampler's prior support check.
bool gevr_in_prior_support(const GevrParams& theta, const TrendWindow& w);

}  // namespace climex
