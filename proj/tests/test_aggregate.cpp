#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "climex/aggregate.hpp"
#include "climex/rng.hpp"

using namespace climex;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

GridSeries toy_grid() {
  // two years, three locations: tropical, temperate north, arctic
  GridSeries g;
  g.years = {2015, 2016};
  g.lat = {0.0, 45.0, 80.0};
  g.lon = {10.0, 20.0, 30.0};
  g.values = {1.0, 5.0, 3.0,   // 2015
              2.0, 4.0, 9.0};  // 2016
  return g;
}
}  // namespace

TEST_CASE("latitude band assignment honors the half-open boundaries") {
  CHECK(zone_of(-90.0) == Zone::antarctic);
  CHECK(zone_of(-70.0) == Zone::antarctic);
  CHECK(zone_of(-66.5) == Zone::temperate_south);
  CHECK(zone_of(-30.0) == Zone::temperate_south);
  CHECK(zone_of(-23.5) == Zone::tropical);
  CHECK(zone_of(0.0) == Zone::tropical);
  CHECK(zone_of(23.5) == Zone::temperate_north);
  CHECK(zone_of(45.0) == Zone::temperate_north);
  CHECK(zone_of(66.5) == Zone::arctic);
  CHECK(zone_of(90.0) == Zone::arctic);
  CHECK_THROWS_AS(zone_of(90.0001), validation_error);
  CHECK_THROWS_AS(zone_of(-90.0001), validation_error);
}

TEST_CASE("zone area fractions are spherical caps that sum to one") {
  const ZoneWeights w = zone_area_fractions();
  double sum = 0;
  for (double f : w.fraction) sum += f;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w.fraction[size_t(Zone::arctic)] ==
        doctest::Approx(0.041469962807438).epsilon(1e-13));
  CHECK(w.fraction[size_t(Zone::antarctic)] ==
        doctest::Approx(0.041469962807438).epsilon(1e-13));
  CHECK(w.fraction[size_t(Zone::tropical)] ==
        doctest::Approx(0.398749068925246).epsilon(1e-13));
  CHECK(w.fraction[size_t(Zone::temperate_north)] ==
        w.fraction[size_t(Zone::temperate_south)]);
  CHECK(w.fraction[size_t(Zone::temperate_north)] ==
        doctest::Approx(0.259155502729939).epsilon(1e-13));
}

TEST_CASE("spatial extremes pick per-year max or min over the zone") {
  const GridSeries g = toy_grid();
  const AnnualSeries mx = spatial_extreme(g, Zone::global_all, Statistic::max);
  CHECK(mx.base_year == 2015);
  CHECK(mx.values == std::vector<double>{5.0, 9.0});
  CHECK(mx.key.statistic == Statistic::max);

  const AnnualSeries mn = spatial_extreme(g, Zone::global_all, Statistic::min);
  CHECK(mn.values == std::vector<double>{1.0, 2.0});

  const AnnualSeries north = spatial_extreme(g, Zone::temperate_north, Statistic::max);
  CHECK(north.values == std::vector<double>{5.0, 4.0});
  CHECK(north.key.zone == Zone::temperate_north);

  CHECK_THROWS_AS(spatial_extreme(g, Zone::global_all, Statistic::mean),
                  user_error);
  CHECK_THROWS_AS(spatial_extreme(g, Zone::temperate_south, Statistic::max),
                  validation_error);  // no locations in that band
}

TEST_CASE("missing cells are an error unless explicitly skipped") {
  GridSeries g = toy_grid();
  g.values[1] = kNaN;  // 2015, temperate north
  CHECK_THROWS_AS(spatial_extreme(g, Zone::global_all, Statistic::max),
                  validation_error);
  AggregateOptions opts;
  opts.skip_missing = true;
  const AnnualSeries mx = spatial_extreme(g, Zone::global_all, Statistic::max, opts);
  CHECK(mx.values == std::vector<double>{3.0, 9.0});
  // a year with nothing left is still an error
  g.values[0] = kNaN;
  g.values[2] = kNaN;
  CHECK_THROWS_AS(spatial_extreme(g, Zone::global_all, Statistic::max, opts),
                  validation_error);
}

TEST_CASE("zone means average in-zone locations, optionally by cos latitude") {
  GridSeries g;
  g.years = {2015};
  g.lat = {0.0, 10.0};
  g.lon = {0.0, 0.0};
  g.values = {2.0, 4.0};
  const AnnualSeries plain = zone_mean(g, Zone::tropical);
  CHECK(plain.values[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(plain.key.statistic == Statistic::mean);

  AggregateOptions opts;
  opts.cos_lat_weights = true;
  const AnnualSeries weighted = zone_mean(g, Zone::tropical, opts);
  const double w0 = std::cos(0.0), w1 = std::cos(10.0 * M_PI / 180.0);
  CHECK(weighted.values[0] ==
        doctest::Approx((2.0 * w0 + 4.0 * w1) / (w0 + w1)).epsilon(1e-14));
}

TEST_CASE("global mean is the area-weighted combination of zone means") {
  std::array<AnnualSeries, 5> zs;
  for (auto& z : zs) {
    z.base_year = 2015;
    z.values = {7.0};
  }
  const AnnualSeries g = global_mean(zs, zone_area_fractions());
  CHECK(g.values[0] == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(g.key.zone == Zone::global_all);

  zs[0].values = {1.0};  // antarctic only differs
  const AnnualSeries g2 = global_mean(zs, zone_area_fractions());
  const double fa = zone_area_fractions().fraction[0];
  CHECK(g2.values[0] == doctest::Approx(7.0 - 6.0 * fa).epsilon(1e-13));
}

TEST_CASE("random grids agree with direct per-year reductions") {
  SplitMix64 rng(321);
  GridSeries g;
  const int ny = 10, nl = 20;
  for (int y = 0; y < ny; ++y) g.years.push_back(2015 + y);
  for (int l = 0; l < nl; ++l) {
    g.lat.push_back(-90.0 + 180.0 * rng.uniform());
    g.lon.push_back(360.0 * rng.uniform() - 180.0);
  }
  for (int i = 0; i < ny * nl; ++i) g.values.push_back(rng.normal() * 10.0);

  const AnnualSeries mx = spatial_extreme(g, Zone::global_all, Statistic::max);
  const AnnualSeries mn = spatial_extreme(g, Zone::global_all, Statistic::min);
  for (int y = 0; y < ny; ++y) {
    double lo = g.at(y, 0), hi = g.at(y, 0);
    for (int l = 1; l < nl; ++l) {
      lo = std::min(lo, g.at(y, l));
      hi = std::max(hi, g.at(y, l));
    }
    CHECK(mx.values[y] == hi);
    CHECK(mn.values[y] == lo);
  }

  // zone mean vs direct average for whichever band has points
  for (Zone z : {Zone::tropical, Zone::temperate_north, Zone::temperate_south}) {
    double sum = 0;
    int cnt = 0;
    for (int l = 0; l < nl; ++l)
      if (zone_of(g.lat[l]) == z) ++cnt;
    if (cnt == 0) continue;
    const AnnualSeries zm = zone_mean(g, z);
    for (int y = 0; y < ny; ++y) {
      sum = 0;
      for (int l = 0; l < nl; ++l)
        if (zone_of(g.lat[l]) == z) sum += g.at(y, l);
      CHECK(zm.values[y] == doctest::Approx(sum / cnt).epsilon(1e-13));
    }
  }
}

TEST_CASE("moving median smooths with shrinking edge windows") {
  const std::vector<double> v{1.0, 2.0, 100.0, 3.0, 4.0};
  const std::vector<double> sm = moving_median_smooth(v, 1);
  // windows: [1,2], [1,2,100], [2,100,3], [100,3,4], [3,4]
  CHECK(sm[0] == doctest::Approx(1.5));
  CHECK(sm[1] == doctest::Approx(2.0));
  CHECK(sm[2] == doctest::Approx(3.0));
  CHECK(sm[3] == doctest::Approx(4.0));
  CHECK(sm[4] == doctest::Approx(3.5));
  CHECK(moving_median_smooth({}, 3).empty());
  // half_window 0 is the identity
  CHECK(moving_median_smooth(v, 0) == v);
  CHECK_THROWS_AS(moving_median_smooth(v, -1), user_error);
}

TEST_CASE("least-squares slope is exact on a straight line") {
  AnnualSeries s;
  s.base_year = 2015;
  for (int i = 0; i < 30; ++i) s.values.push_back(4.0 + 0.25 * i);
  CHECK(ols_slope(s) == doctest::Approx(0.25).epsilon(1e-13));
  s.values = {3.0};
  CHECK_THROWS_AS(ols_slope(s), validation_error);  // slope needs two points
}

TEST_CASE("negation flips values and swaps min and max") {
  AnnualSeries s;
  s.key.statistic = Statistic::min;
  s.base_year = 2015;
  s.values = {1.0, -2.0, 3.0};
  const AnnualSeries n = negate(s);
  CHECK(n.key.statistic == Statistic::max);
  CHECK(n.values == std::vector<double>{-1.0, 2.0, -3.0});
  const AnnualSeries back = negate(n);
  CHECK(back.key.statistic == Statistic::min);
  CHECK(back.values == s.values);

  AnnualSeries m;
  m.key.statistic = Statistic::mean;
  m.values = {1.0};
  CHECK_THROWS_AS(negate(m), user_error);
}
