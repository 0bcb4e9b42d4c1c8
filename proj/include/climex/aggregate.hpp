#pragma once

#include <array>

#include "climex/types.hpp"

namespace climex {

// Annualized gridded values, year-major. Missing cells are NaN.
struct GridSeries {
  std::vector<int> years;            // strictly increasing by 1
  std::vector<double> lat, lon;      // one per location, |lat| <= 90
  std::vector<double> values;        // size years.size() * lat.size()

  size_t n_years() const { return years.size(); }
  size_t n_locations() const { return lat.size(); }
  double at(size_t year_idx, size_t loc_idx) const {
    return values[year_idx * lat.size() + loc_idx];
  }
};

struct ZoneWeights {
  std::array<double, 5> fraction;  // indexed by Zone enum order, sums to 1
};

// Latitude bands: [-90,-66.5), [-66.5,-23.5), [-23.5,23.5), [23.5,66.5),
// [66.5,90]. Half-open at shared boundaries, Arctic closed at +90.
Zone zone_of(double lat_degrees);

// Spherical-Earth area fractions (sin(upper) - sin(lower)) / 2.
ZoneWeights zone_area_fractions();

struct AggregateOptions {
  bool skip_missing = false;     // otherwise any in-zone NaN is an error
  bool cos_lat_weights = false;  // zone_mean only; off per the source model
};

// Per-year max or min over the zone's locations; Zone::global_all uses all.
AnnualSeries spatial_extreme(const GridSeries& g, Zone zone, Statistic kind,
                             const AggregateOptions& opts = {});

// Per-year arithmetic mean over in-zone locations (optionally cos-lat weighted).
AnnualSeries zone_mean(const GridSeries& g, Zone zone,
                       const AggregateOptions& opts = {});

// Area-weighted average of the five per-zone mean series (zone enum order).
AnnualSeries global_mean(const std::array<AnnualSeries, 5>& zone_means,
                         const ZoneWeights& w);

// Median over [t-h, t+h] intersected with the series; windows shrink at the
// edges so the output has the input's length.
std::vector<double> moving_median_smooth(const std::vector<double>& values,
                                         int half_window = 10);

// Least-squares slope of value on calendar year (units: value per year).
double ols_slope(const AnnualSeries& s);

// Values * -1 with statistic min <-> max; an involution. Means cannot be
// negated (the min/max duality does not apply).
AnnualSeries negate(const AnnualSeries& s);

}  // namespace climex
