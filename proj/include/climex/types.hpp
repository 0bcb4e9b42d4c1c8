#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace climex {

// Error taxonomy mapped to process exit codes by the CLI:
// user_error -> 1, validation_error -> 2, numeric_error -> 3.
struct user_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Variable { rsds, sfcWind, sfcWindmax, tas };
enum class Scenario { ssp126, ssp245, ssp585 };
enum class Statistic { max, min, mean };
enum class Zone { antarctic, temperate_south, tropical, temperate_north, arctic, global_all };

const char* to_string(Variable v);
const char* to_string(Scenario s);
const char* to_string(Statistic s);
const char* to_string(Zone z);
const char* units(Variable v);

Variable variable_from_string(std::string_view text);
Scenario scenario_from_string(std::string_view text);
Statistic statistic_from_string(std::string_view text);
Zone zone_from_string(std::string_view text);

// 1-based factor index used by the mixed model; ssp126 is the reference level.
int scenario_index(Scenario s);

struct EnsembleId {
  int r = 1, i = 1, p = 1, f = 1;
  bool operator==(const EnsembleId&) const = default;
};

// Canonical text form "r{r}i{i}p{p}f{f}"; parse/format round-trip exactly.
EnsembleId parse_ensemble_id(std::string_view text);
std::string format_ensemble_id(const EnsembleId& e);

struct DatasetKey {
  std::string gcm;
  Variable variable = Variable::tas;
  Scenario scenario = Scenario::ssp126;
  EnsembleId ensemble;
  Statistic statistic = Statistic::max;
  Zone zone = Zone::global_all;
  bool operator==(const DatasetKey&) const = default;
};

// Filename-safe encoding "gcm_variable_scenario_ensemble_statistic_zone";
// decode_key inverts it. Used so downstream grouping needs no manifest.
std::string encode_key(const DatasetKey& k);
DatasetKey decode_key(std::string_view token);

struct AnnualSeries {
  DatasetKey key;
  int base_year = 2015;
  std::vector<double> values;  // one per calendar year, year(i) = base_year + i

  int span() const { return static_cast<int>(values.size()); }
  int year(int i) const { return base_year + i; }
};

struct SeriesIssue {
  enum Kind { length_mismatch, nonfinite_value, outlier, nonpositive_kelvin };
  Kind kind;
  int index;     // offending value index, -1 for series-level issues
  double value;  // offending value where applicable
  std::string detail;
};

struct ValidationReport {
  std::vector<SeriesIssue> issues;
  bool ok() const { return issues.empty(); }
};

// Report-only: length vs expected span, non-finite entries, entries beyond
// outlier_k * IQR of the series median, and (tas only) non-positive Kelvin.
ValidationReport validate_series(const AnnualSeries& s, int expected_span = 86,
                                 double outlier_k = 10.0);

struct QuantileSummary {
  double mean = 0, median = 0, q025 = 0, q25 = 0, q75 = 0, q975 = 0;
};

}  // namespace climex
