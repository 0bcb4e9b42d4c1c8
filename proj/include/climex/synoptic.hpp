#pragma once

#include <utility>

#include "climex/types.hpp"

namespace climex {

enum class DeltaKind { Q, M };

// Posterior draws of a change functional for one (gcm, ensemble, scenario)
// chain, with the count of invalid-extrapolation draws that were dropped.
struct DeltaDraws {
  DatasetKey key;
  DeltaKind kind = DeltaKind::Q;
  std::vector<double> draws;
  int excluded = 0;
};

struct WeightedDraws {
  std::vector<double> values;
  std::vector<double> weights;  // parallel to values; sums to 1
};

// Pools draws for one (variable, zone, scenario): every GCM gets total mass
// 1/#GCMs, split equally over its ensembles, then over each chain's draws;
// deterministic weighting, no resampling.
WeightedDraws pool_equal_weight(const std::vector<DeltaDraws>& groups);

double expected_change(const WeightedDraws& pooled);

// Weighted fraction strictly greater than zero.
double prob_positive(const WeightedDraws& pooled);

// Weighted quantile that reduces to type-7 interpolation at equal weights.
double weighted_quantile(const WeightedDraws& pooled, double p);

QuantileSummary quantile_summary(const WeightedDraws& pooled);

// One observation for the mixed model: scenario j in {1,2,3} (fixed effect,
// j=1 reference), model and ensemble labels (random effects, ensemble
// nested in model), and the response draw.
struct LmmObs {
  int scenario = 1;
  int model = 0;
  int ensemble = 0;
  double value = 0;
};

struct LmmFit {
  double iota_plus_g1 = 0;
  double g2_minus_g1 = 0;  // NaN when scenario 2 absent
  double g3_minus_g1 = 0;  // NaN when scenario 3 absent
  double se_iota_plus_g1 = 0, se_g2_minus_g1 = 0, se_g3_minus_g1 = 0;
  double tau_delta = 0, tau_zeta = 0, tau_eps = 0;
  double tau_r = 0, tau_fe = 0;
  double r2_fe = 0, r2_me = 0;  // NaN when tau_r == 0
  double log_likelihood = 0;
  bool reml = false;
  long n_obs = 0;
};

// Maximum-likelihood mixed model fit (REML via switch): fixed effects
// profiled out by GLS, likelihood profiled over the two variance ratios,
// boundary zeros admitted. Observations are collapsed to per-cell
// sufficient statistics, so cost is O(N) + O(#cells * evaluations).
LmmFit lmm_fit(const std::vector<LmmObs>& obs, bool reml = false);

struct FeFit {
  double iota_plus_g1 = 0;
  double g2_minus_g1 = 0;
  double g3_minus_g1 = 0;
  double tau_fe = 0;
  double log_likelihood = 0;
  long n_obs = 0;
};

// Ordinary least squares on scenario indicators only.
FeFit fe_only_fit(const std::vector<LmmObs>& obs);

// (1 - (tau_fe/tau_r)^2, 1 - (tau_eps/tau_r)^2); tau_r must be positive.
std::pair<double, double> r_squared(double tau_r, double tau_fe, double tau_eps);

}  // namespace climex
