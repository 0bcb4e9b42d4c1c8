#include "climex/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace climex {

Zone zone_of(double lat) {
  if (!(lat >= -90.0 && lat <= 90.0))
    throw validation_error("latitude " + std::to_string(lat) + " outside [-90, 90]");
  if (lat < -66.5) return Zone::antarctic;
  if (lat < -23.5) return Zone::temperate_south;
  if (lat < 23.5) return Zone::tropical;
  if (lat < 66.5) return Zone::temperate_north;
  return Zone::arctic;
}

ZoneWeights zone_area_fractions() {
  constexpr double bounds[6] = {-90.0, -66.5, -23.5, 23.5, 66.5, 90.0};
  ZoneWeights w{};
  for (int k = 0; k < 5; ++k) {
    const double lo = bounds[k] * std::numbers::pi / 180.0;
    const double hi = bounds[k + 1] * std::numbers::pi / 180.0;
    w.fraction[k] = (std::sin(hi) - std::sin(lo)) / 2.0;
  }
  return w;
}

namespace {

std::vector<size_t> zone_locations(const GridSeries& g, Zone zone) {
  std::vector<size_t> idx;
  for (size_t j = 0; j < g.n_locations(); ++j) {
    if (zone == Zone::global_all || zone_of(g.lat[j]) == zone) idx.push_back(j);
  }
  if (idx.empty())
    throw validation_error(std::string("zone '") + to_string(zone) +
                           "' contains no grid locations");
  return idx;
}

}  // namespace

AnnualSeries spatial_extreme(const GridSeries& g, Zone zone, Statistic kind,
                             const AggregateOptions& opts) {
  if (kind != Statistic::max && kind != Statistic::min)
    throw user_error("spatial_extreme: kind must be max or min");
  const auto idx = zone_locations(g, zone);
  AnnualSeries out;
  out.key.zone = zone;
  out.key.statistic = kind;
  out.base_year = g.years.empty() ? 0 : g.years.front();
  out.values.reserve(g.n_years());
  for (size_t i = 0; i < g.n_years(); ++i) {
    bool seen = false;
    double acc = 0.0;
    for (size_t j : idx) {
      const double v = g.at(i, j);
      if (std::isnan(v)) {
        if (!opts.skip_missing)
          throw validation_error("missing value in zone '" +
                                 std::string(to_string(zone)) + "' year " +
                                 std::to_string(g.years[i]));
        continue;
      }
      if (!seen) {
        acc = v;
        seen = true;
      } else {
        acc = (kind == Statistic::max) ? std::max(acc, v) : std::min(acc, v);
      }
    }
    if (!seen)
      throw validation_error("all values missing in zone '" +
                             std::string(to_string(zone)) + "' year " +
                             std::to_string(g.years[i]));
    out.values.push_back(acc);
  }
  return out;
}

AnnualSeries zone_mean(const GridSeries& g, Zone zone, const AggregateOptions& opts) {
  const auto idx = zone_locations(g, zone);
  AnnualSeries out;
  out.key.zone = zone;
  out.key.statistic = Statistic::mean;
  out.base_year = g.years.empty() ? 0 : g.years.front();
  out.values.reserve(g.n_years());
  for (size_t i = 0; i < g.n_years(); ++i) {
    double sum = 0.0, wsum = 0.0;
    for (size_t j : idx) {
      const double v = g.at(i, j);
      if (std::isnan(v)) {
        if (!opts.skip_missing)
          throw validation_error("missing value in zone '" +
                                 std::string(to_string(zone)) + "' year " +
                                 std::to_string(g.years[i]));
        continue;
      }
      const double w =
          opts.cos_lat_weights ? std::cos(g.lat[j] * std::numbers::pi / 180.0) : 1.0;
      sum += w * v;
      wsum += w;
    }
    if (!(wsum > 0.0))
      throw validation_error("all values missing in zone '" +
                             std::string(to_string(zone)) + "' year " +
                             std::to_string(g.years[i]));
    out.values.push_back(sum / wsum);
  }
  return out;
}

AnnualSeries global_mean(const std::array<AnnualSeries, 5>& zone_means,
                         const ZoneWeights& w) {
  const AnnualSeries& first = zone_means[0];
  for (const auto& s : zone_means) {
    if (s.base_year != first.base_year || s.span() != first.span())
      throw validation_error("global_mean: zone series years do not match");
  }
  double wsum = 0.0;
  for (double f : w.fraction) wsum += f;
  AnnualSeries out;
  out.key = first.key;
  out.key.zone = Zone::global_all;
  out.key.statistic = Statistic::mean;
  out.base_year = first.base_year;
  out.values.resize(first.values.size(), 0.0);
  for (int k = 0; k < 5; ++k) {
    const double wk = w.fraction[k] / wsum;
    for (size_t i = 0; i < out.values.size(); ++i)
      out.values[i] += wk * zone_means[k].values[i];
  }
  return out;
}

std::vector<double> moving_median_smooth(const std::vector<double>& values,
                                         int half_window) {
  if (half_window < 0) throw user_error("half_window must be >= 0");
  const int n = static_cast<int>(values.size());
  std::vector<double> out(values.size());
  std::vector<double> window;
  for (int t = 0; t < n; ++t) {
    const int lo = std::max(0, t - half_window);
    const int hi = std::min(n - 1, t + half_window);
    window.assign(values.begin() + lo, values.begin() + hi + 1);
    std::sort(window.begin(), window.end());
    const size_t m = window.size();
    out[t] = (m % 2 == 1) ? window[m / 2]
                          : 0.5 * (window[m / 2 - 1] + window[m / 2]);
  }
  return out;
}

double ols_slope(const AnnualSeries& s) {
  const int n = s.span();
  if (n < 2) throw validation_error("ols_slope: need at least 2 points");
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    sx += s.year(i);
    sy += s.values[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double dx = s.year(i) - mx;
    sxx += dx * dx;
    sxy += dx * (s.values[i] - my);
  }
  return sxy / sxx;
}

AnnualSeries negate(const AnnualSeries& s) {
  if (s.key.statistic == Statistic::mean)
    throw user_error("negate: mean series cannot be negated");
  AnnualSeries out = s;
  out.key.statistic =
      (s.key.statistic == Statistic::min) ? Statistic::max : Statistic::min;
  for (double& v : out.values) v = -v;
  return out;
}

}  // namespace climex
