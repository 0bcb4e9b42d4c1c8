#include "climex/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace climex {

const char* to_string(Variable v) {
  switch (v) {
    case Variable::rsds: return "rsds";
    case Variable::sfcWind: return "sfcWind";
    case Variable::sfcWindmax: return "sfcWindmax";
    case Variable::tas: return "tas";
  }
  throw user_error("unknown variable enum");
}

const char* units(Variable v) {
  switch (v) {
    case Variable::rsds: return "W m-2";
    case Variable::sfcWind: return "m s-1";
    case Variable::sfcWindmax: return "m s-1";
    case Variable::tas: return "K";
  }
  throw user_error("unknown variable enum");
}

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::ssp126: return "ssp126";
    case Scenario::ssp245: return "ssp245";
    case Scenario::ssp585: return "ssp585";
  }
  throw user_error("unknown scenario enum");
}

const char* to_string(Statistic s) {
  switch (s) {
    case Statistic::max: return "max";
    case Statistic::min: return "min";
    case Statistic::mean: return "mean";
  }
  throw user_error("unknown statistic enum");
}

const char* to_string(Zone z) {
  switch (z) {
    case Zone::antarctic: return "antarctic";
    case Zone::temperate_south: return "temperate_south";
    case Zone::tropical: return "tropical";
    case Zone::temperate_north: return "temperate_north";
    case Zone::arctic: return "arctic";
    case Zone::global_all: return "global";
  }
  throw user_error("unknown zone enum");
}

Variable variable_from_string(std::string_view t) {
  if (t == "rsds") return Variable::rsds;
  if (t == "sfcWind") return Variable::sfcWind;
  if (t == "sfcWindmax") return Variable::sfcWindmax;
  if (t == "tas") return Variable::tas;
  throw validation_error("unknown variable token '" + std::string(t) + "'");
}

Scenario scenario_from_string(std::string_view t) {
  if (t == "ssp126" || t == "SSP126") return Scenario::ssp126;
  if (t == "ssp245" || t == "SSP245") return Scenario::ssp245;
  if (t == "ssp585" || t == "SSP585") return Scenario::ssp585;
  throw validation_error("unknown scenario token '" + std::string(t) + "'");
}

Statistic statistic_from_string(std::string_view t) {
  if (t == "max") return Statistic::max;
  if (t == "min") return Statistic::min;
  if (t == "mean") return Statistic::mean;
  throw validation_error("unknown statistic token '" + std::string(t) + "'");
}

Zone zone_from_string(std::string_view t) {
  if (t == "antarctic") return Zone::antarctic;
  if (t == "temperate_south") return Zone::temperate_south;
  if (t == "tropical") return Zone::tropical;
  if (t == "temperate_north") return Zone::temperate_north;
  if (t == "arctic") return Zone::arctic;
  if (t == "global") return Zone::global_all;
  throw validation_error("unknown zone token '" + std::string(t) + "'");
}

int scenario_index(Scenario s) {
  switch (s) {
    case Scenario::ssp126: return 1;
    case Scenario::ssp245: return 2;
    case Scenario::ssp585: return 3;
  }
  throw user_error("unknown scenario enum");
}

namespace {

// Parses one "<tag><positive integer>" field of an ensemble id.
int take_field(std::string_view& rest, char tag, std::string_view whole) {
  if (rest.empty() || rest.front() != tag)
    throw validation_error("malformed ensemble id '" + std::string(whole) +
                           "': expected '" + std::string(1, tag) + "' at '" +
                           std::string(rest) + "'");
  rest.remove_prefix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
  if (ec != std::errc() || ptr == rest.data() || value <= 0)
    throw validation_error("malformed ensemble id '" + std::string(whole) +
                           "': bad integer after '" + std::string(1, tag) + "'");
  rest.remove_prefix(static_cast<size_t>(ptr - rest.data()));
  return value;
}

}  // namespace

EnsembleId parse_ensemble_id(std::string_view text) {
  std::string_view rest = text;
  EnsembleId e;
  e.r = take_field(rest, 'r', text);
  e.i = take_field(rest, 'i', text);
  e.p = take_field(rest, 'p', text);
  e.f = take_field(rest, 'f', text);
  if (!rest.empty())
    throw validation_error("malformed ensemble id '" + std::string(text) +
                           "': trailing '" + std::string(rest) + "'");
  return e;
}

std::string format_ensemble_id(const EnsembleId& e) {
  return "r" + std::to_string(e.r) + "i" + std::to_string(e.i) + "p" +
         std::to_string(e.p) + "f" + std::to_string(e.f);
}

std::string encode_key(const DatasetKey& k) {
  return k.gcm + "_" + to_string(k.variable) + "_" + to_string(k.scenario) +
         "_" + format_ensemble_id(k.ensemble) + "_" + to_string(k.statistic) +
         "_" + to_string(k.zone);
}

DatasetKey decode_key(std::string_view token) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t pos = token.find('_', start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(token.substr(start));
      break;
    }
    parts.emplace_back(token.substr(start, pos - start));
    start = pos + 1;
  }
  // zone may itself contain one underscore (temperate_south/_north)
  if (parts.size() == 7) {
    parts[5] += "_" + parts[6];
    parts.pop_back();
  }
  if (parts.size() != 6)
    throw validation_error("cannot decode dataset key '" + std::string(token) + "'");
  DatasetKey k;
  k.gcm = parts[0];
  k.variable = variable_from_string(parts[1]);
  k.scenario = scenario_from_string(parts[2]);
  k.ensemble = parse_ensemble_id(parts[3]);
  k.statistic = statistic_from_string(parts[4]);
  k.zone = zone_from_string(parts[5]);
  return k;
}

namespace {

// Type-7 quantile of already-sorted values.
double sorted_quantile(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  double h = (static_cast<double>(n) - 1.0) * p;
  size_t lo = static_cast<size_t>(h);
  if (lo >= n - 1) return sorted[n - 1];
  double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

ValidationReport validate_series(const AnnualSeries& s, int expected_span,
                                 double outlier_k) {
  ValidationReport report;
  if (s.span() != expected_span)
    report.issues.push_back({SeriesIssue::length_mismatch, -1,
                             static_cast<double>(s.span()),
                             "expected " + std::to_string(expected_span) +
                                 " values, got " + std::to_string(s.span())});
  std::vector<double> finite;
  finite.reserve(s.values.size());
  for (int i = 0; i < s.span(); ++i) {
    double v = s.values[i];
    if (!std::isfinite(v)) {
      report.issues.push_back({SeriesIssue::nonfinite_value, i, v,
                               "non-finite value at year " + std::to_string(s.year(i))});
      continue;
    }
    finite.push_back(v);
    if (s.key.variable == Variable::tas && v <= 0.0)
      report.issues.push_back({SeriesIssue::nonpositive_kelvin, i, v,
                               "tas value not positive at year " + std::to_string(s.year(i))});
  }
  if (finite.size() >= 4) {
    std::sort(finite.begin(), finite.end());
    double median = sorted_quantile(finite, 0.5);
    double iqr = sorted_quantile(finite, 0.75) - sorted_quantile(finite, 0.25);
    if (iqr > 0.0) {
      for (int i = 0; i < s.span(); ++i) {
        double v = s.values[i];
        if (std::isfinite(v) && std::abs(v - median) > outlier_k * iqr)
          report.issues.push_back({SeriesIssue::outlier, i, v,
                                   "value beyond " + std::to_string(outlier_k) +
                                       " IQR of median at year " + std::to_string(s.year(i))});
      }
    }
  }
  return report;
}

}  // namespace climex
