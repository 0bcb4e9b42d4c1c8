#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "climex/rng.hpp"
#include "climex/synoptic.hpp"

using namespace climex;

namespace {
DeltaDraws make_draws(const std::string& gcm, int realization,
                      std::vector<double> v) {
  DeltaDraws d;
  d.key.gcm = gcm;
  d.key.ensemble.r = realization;
  d.draws = std::move(v);
  return d;
}

std::vector<LmmObs> scenario_shift_data() {
  // 2 models x 2 ensembles x 3 scenarios, pure scenario effects, no noise
  std::vector<LmmObs> obs;
  const double level[3] = {1.0, 3.0, 6.0};
  for (int j = 1; j <= 3; ++j)
    for (int k = 1; k <= 2; ++k)
      for (int l = 1; l <= 2; ++l)
        for (int i = 0; i < 5; ++i)
          obs.push_back({j, k, l, level[j - 1]});
  return obs;
}
}  // namespace

TEST_CASE("pooling one chain yields uniform weights") {
  const WeightedDraws w = pool_equal_weight({make_draws("A", 1, {1, 2, 3, 4})});
  REQUIRE(w.values.size() == 4);
  for (double wt : w.weights) CHECK(wt == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(std::accumulate(w.weights.begin(), w.weights.end(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("each model gets equal mass regardless of ensemble count") {
  // model A: 4 ensembles of 1 draw; model B: 1 ensemble of 4 draws
  std::vector<DeltaDraws> groups;
  for (int r = 1; r <= 4; ++r) groups.push_back(make_draws("A", r, {double(r)}));
  groups.push_back(make_draws("B", 1, {10, 20, 30, 40}));
  const WeightedDraws w = pool_equal_weight(groups);
  REQUIRE(w.values.size() == 8);
  // A draws carry (1/2)(1/4)/1 = 1/8 each; B draws (1/2)(1/1)/4 = 1/8 each
  for (double wt : w.weights) CHECK(wt == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(expected_change(w) ==
        doctest::Approx((1 + 2 + 3 + 4 + 10 + 20 + 30 + 40) / 8.0).epsilon(1e-14));
}

TEST_CASE("unequal draw counts rebalance within an ensemble") {
  // one model, two ensembles: 1 draw vs 3 draws
  const WeightedDraws w = pool_equal_weight(
      {make_draws("A", 1, {6.0}), make_draws("A", 2, {0.0, 0.0, 3.0})});
  REQUIRE(w.values.size() == 4);
  CHECK(w.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
  for (int i = 1; i < 4; ++i)
    CHECK(w.weights[i] == doctest::Approx(0.5 / 3).epsilon(1e-14));
  CHECK(expected_change(w) == doctest::Approx(3.0 + 0.5).epsilon(1e-14));
}

TEST_CASE("duplicating one model's chains leaves the expectation unchanged") {
  std::vector<DeltaDraws> base{make_draws("A", 1, {1, 2}),
                               make_draws("B", 1, {10, 30})};
  const double e0 = expected_change(pool_equal_weight(base));
  // duplicate model B as a second ensemble with the same draws
  base.push_back(make_draws("B", 2, {10, 30}));
  const double e1 = expected_change(pool_equal_weight(base));
  CHECK(e0 == doctest::Approx(e1).epsilon(1e-14));
}

TEST_CASE("invalid pooling inputs are rejected") {
  CHECK_THROWS_AS(pool_equal_weight({}), user_error);
  DeltaDraws empty = make_draws("A", 1, {});
  CHECK_THROWS_AS(pool_equal_weight({empty}), validation_error);
}

TEST_CASE("probability of a positive change counts strictly positive draws") {
  const WeightedDraws w =
      pool_equal_weight({make_draws("A", 1, {-1.0, 0.0, 2.0, 3.0})});
  CHECK(prob_positive(w) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("equal-weight quantiles match the classic interpolation rule") {
  // values 1..1000 shuffled; frozen references for n=1000, equal weights
  std::vector<double> v(1000);
  for (int i = 0; i < 1000; ++i) v[i] = i + 1.0;
  SplitMix64 rng(8);
  for (int i = 999; i > 0; --i) {
    const int j = int(rng.uniform() * (i + 1));
    std::swap(v[i], v[j]);
  }
  const WeightedDraws w = pool_equal_weight({make_draws("A", 1, v)});
  CHECK(weighted_quantile(w, 0.025) == doctest::Approx(25.975).epsilon(1e-12));
  CHECK(weighted_quantile(w, 0.25) == doctest::Approx(250.75).epsilon(1e-12));
  CHECK(weighted_quantile(w, 0.5) == doctest::Approx(500.5).epsilon(1e-12));
  CHECK(weighted_quantile(w, 0.75) == doctest::Approx(750.25).epsilon(1e-12));
  CHECK(weighted_quantile(w, 0.975) == doctest::Approx(975.025).epsilon(1e-12));
  CHECK(weighted_quantile(w, 0.0) == 1.0);
  CHECK(weighted_quantile(w, 1.0) == 1000.0);
  CHECK_THROWS_AS(weighted_quantile(w, -0.1), user_error);
  CHECK_THROWS_AS(weighted_quantile(w, 1.1), user_error);
}

TEST_CASE("equal weights reduce to the unweighted estimator on random data") {
  SplitMix64 rng(44);
  std::vector<double> v(257);
  for (double& x : v) x = rng.normal() * 3.0 + 1.0;
  const WeightedDraws w = pool_equal_weight({make_draws("A", 1, v)});
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (double p : {0.025, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975}) {
    // classic type-7: index p*(n-1), linear interpolation
    const double t = p * (sorted.size() - 1);
    const size_t k = size_t(t);
    const double frac = t - double(k);
    const double want = k + 1 < sorted.size()
                            ? sorted[k] + frac * (sorted[k + 1] - sorted[k])
                            : sorted[k];
    CHECK(weighted_quantile(w, p) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("summary quantiles are ordered and exact on constants") {
  const WeightedDraws c = pool_equal_weight({make_draws("A", 1, {5, 5, 5, 5})});
  const QuantileSummary qc = quantile_summary(c);
  CHECK(qc.mean == 5.0);
  CHECK(qc.median == 5.0);
  CHECK(qc.q025 == 5.0);
  CHECK(qc.q975 == 5.0);

  SplitMix64 rng(3);
  std::vector<double> v(100000);
  for (double& x : v) x = rng.normal();
  const WeightedDraws w = pool_equal_weight({make_draws("A", 1, v)});
  const QuantileSummary q = quantile_summary(w);
  CHECK(q.q025 <= q.q25);
  CHECK(q.q25 <= q.median);
  CHECK(q.median <= q.q75);
  CHECK(q.q75 <= q.q975);
  CHECK(std::abs(q.median) < 0.02);
  CHECK(std::abs(q.q975 - 1.96) < 0.05);
  CHECK(std::abs(q.q025 + 1.96) < 0.05);
}

TEST_CASE("constant data collapses the mixed model to its intercept") {
  std::vector<LmmObs> obs;
  for (int k = 1; k <= 3; ++k)
    for (int l = 1; l <= 2; ++l)
      for (int i = 0; i < 4; ++i) obs.push_back({1, k, l, 2.5});
  const LmmFit fit = lmm_fit(obs);
  CHECK(fit.iota_plus_g1 == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(std::isnan(fit.g2_minus_g1));
  CHECK(std::isnan(fit.g3_minus_g1));
  CHECK(fit.tau_delta == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(fit.tau_zeta == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(fit.tau_eps == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(fit.tau_r == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
  CHECK(std::isnan(fit.r2_fe));
  CHECK(std::isnan(fit.r2_me));
  CHECK(fit.n_obs == 24);
}

TEST_CASE("pure scenario shifts are absorbed entirely by the fixed effects") {
  const LmmFit fit = lmm_fit(scenario_shift_data());
  CHECK(fit.iota_plus_g1 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fit.g2_minus_g1 == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(fit.g3_minus_g1 == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(fit.tau_delta == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
  CHECK(fit.tau_zeta == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
  CHECK(fit.tau_eps == doctest::Approx(0.0).scale(1.0).epsilon(1e-8));
  // the scenario spread is real signal, so tau_r > 0 and R2 is defined
  CHECK(fit.tau_r > 1.0);
  CHECK(fit.r2_fe == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(fit.r2_me == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("identifiability preconditions raise typed errors") {
  std::vector<LmmObs> single;
  for (int i = 0; i < 10; ++i) single.push_back({1, 1, 1, double(i)});
  CHECK_THROWS_AS(lmm_fit(single), validation_error);

  std::vector<LmmObs> no_ref;
  for (int k = 1; k <= 3; ++k)
    for (int l = 1; l <= 2; ++l) no_ref.push_back({2, k, l, 1.0});
  CHECK_THROWS_AS(lmm_fit(no_ref), validation_error);

  CHECK_THROWS_AS(lmm_fit({}), validation_error);

  std::vector<LmmObs> bad_scen;
  for (int k = 1; k <= 2; ++k)
    for (int l = 1; l <= 2; ++l) bad_scen.push_back({4, k, l, 1.0});
  CHECK_THROWS_AS(lmm_fit(bad_scen), validation_error);
}

TEST_CASE("scenario-only regression recovers exact cell means") {
  const FeFit fe = fe_only_fit(scenario_shift_data());
  CHECK(fe.iota_plus_g1 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(fe.g2_minus_g1 == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(fe.g3_minus_g1 == doctest::Approx(5.0).epsilon(1e-13));
  CHECK(fe.tau_fe == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(fe.n_obs == 60);

  // single scenario: intercept only, contrasts undefined
  std::vector<LmmObs> one;
  for (int i = 0; i < 8; ++i) one.push_back({1, 1, 1, 3.0 + (i % 2)});
  const FeFit fe1 = fe_only_fit(one);
  CHECK(fe1.iota_plus_g1 == doctest::Approx(3.5).epsilon(1e-13));
  CHECK(std::isnan(fe1.g2_minus_g1));
  CHECK(std::isnan(fe1.g3_minus_g1));
  CHECK(fe1.tau_fe == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("residual scale estimates concentrate on the truth") {
  SplitMix64 rng(12);
  std::vector<LmmObs> obs;
  for (int i = 0; i < 10000; ++i) obs.push_back({1, 1, 1, rng.normal()});
  const FeFit fe = fe_only_fit(obs);
  CHECK(std::abs(fe.tau_fe - 1.0) < 0.05);
}

TEST_CASE("variance decomposition reproduces the two R-squared values") {
  const auto [r2_fe, r2_me] = r_squared(7.62, 6.93, 6.25);
  // frozen two-decimal targets
  CHECK(std::round(r2_fe * 100) / 100 == doctest::Approx(0.17));
  CHECK(std::round(r2_me * 100) / 100 == doctest::Approx(0.33));

  const auto [a, b] = r_squared(2.0, 2.0, 2.0);
  CHECK(a == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  CHECK(b == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  const auto [c, d] = r_squared(2.0, 0.0, 0.0);
  CHECK(c == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(r_squared(0.0, 1.0, 1.0), numeric_error);
}

TEST_CASE("the mixed model never fits worse than the fixed-effects model") {
  SplitMix64 rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<LmmObs> obs;
    for (int k = 1; k <= 4; ++k) {
      const double dk = 1.5 * rng.normal();
      for (int l = 1; l <= 2; ++l) {
        const double zl = 0.7 * rng.normal();
        for (int j = 1; j <= 3; ++j)
          for (int i = 0; i < 10; ++i)
            obs.push_back({j, k, l, 2.0 * j + dk + zl + 0.5 * rng.normal()});
      }
    }
    const LmmFit me = lmm_fit(obs);
    const FeFit fe = fe_only_fit(obs);
    CHECK(me.log_likelihood >= fe.log_likelihood - 1e-8);
    // scale decomposition ordering holds on every fit
    CHECK(me.tau_eps <= me.tau_fe + 1e-8);
    CHECK(me.tau_fe <= me.tau_r + 1e-8);
    CHECK(me.tau_fe == doctest::Approx(fe.tau_fe).epsilon(1e-10));
  }
}

TEST_CASE("restricted-likelihood switch changes the objective only") {
  SplitMix64 rng(55);
  std::vector<LmmObs> obs;
  for (int k = 1; k <= 3; ++k) {
    const double dk = rng.normal();
    for (int l = 1; l <= 2; ++l) {
      const double zl = 0.5 * rng.normal();
      for (int j = 1; j <= 2; ++j)
        for (int i = 0; i < 8; ++i)
          obs.push_back({j, k, l, j + dk + zl + 0.3 * rng.normal()});
    }
  }
  const LmmFit ml = lmm_fit(obs, false);
  const LmmFit reml = lmm_fit(obs, true);
  CHECK(!ml.reml);
  CHECK(reml.reml);
  // both report the ordering invariant and finite results
  CHECK(reml.tau_eps <= reml.tau_fe + 1e-8);
  CHECK(reml.tau_fe <= reml.tau_r + 1e-8);
  CHECK(std::isfinite(reml.log_likelihood));
  // restricted selection shrinks less, so its variance components are >= ML
  CHECK(reml.tau_delta >= ml.tau_delta - 1e-8);
}

TEST_CASE("moderate simulated datasets recover the generating parameters") {
  // tau_delta=2, tau_zeta=1, tau_eps=0.5; large cells keep this tight enough
  SplitMix64 rng(77);
  std::vector<LmmObs> obs;
  const double gamma[3] = {5.0, 7.0, 10.0};
  for (int k = 1; k <= 8; ++k) {
    const double dk = 2.0 * rng.normal();
    for (int l = 1; l <= 4; ++l) {
      const double zl = 1.0 * rng.normal();
      for (int j = 1; j <= 3; ++j)
        for (int i = 0; i < 30; ++i)
          obs.push_back({j, k, l, gamma[j - 1] + dk + zl + 0.5 * rng.normal()});
    }
  }
  const LmmFit fit = lmm_fit(obs);
  CHECK(std::abs(fit.g2_minus_g1 - 2.0) < 3.0 * fit.se_g2_minus_g1 + 0.05);
  CHECK(std::abs(fit.g3_minus_g1 - 5.0) < 3.0 * fit.se_g3_minus_g1 + 0.05);
  CHECK(fit.tau_eps == doctest::Approx(0.5).epsilon(0.10));
  CHECK(fit.tau_delta > 0.8);   // 8 models is a small sample for tau_delta
  CHECK(fit.tau_zeta > 0.4);
  CHECK(fit.se_iota_plus_g1 > 0.0);
}
