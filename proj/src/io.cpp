#include "climex/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace climex {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw user_error("cannot open " + path.string());
  std::ostringstream body;
  body << in.rdbuf();
  char buf[40];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(body.str())));
  return buf;
}

namespace {

std::string location(const fs::path& path, int line) {
  return path.string() + ":" + std::to_string(line);
}

double parse_double(std::string_view tok, const fs::path& path, int line) {
  double v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw validation_error(location(path, line) + ": bad number '" +
                           std::string(tok) + "'");
  return v;
}

int parse_int(std::string_view tok, const fs::path& path, int line) {
  int v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw validation_error(location(path, line) + ": bad integer '" +
                           std::string(tok) + "'");
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Reads lines stripped of trailing \r; returns false at EOF.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw user_error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw user_error("cannot write " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw user_error("failed writing " + path.string());
}

void expect_header(const std::string& got, const std::string& want,
                   const fs::path& path) {
  if (got != want)
    throw validation_error(path.string() + ": expected header '" + want +
                           "', got '" + got + "'");
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const fs::path& path) {
  std::ifstream in = open_input(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(path.string() + ": " + e.what());
  }
  if (!doc.is_array())
    throw validation_error(path.string() + ": manifest must be a JSON array");
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  int index = 0;
  for (const auto& item : doc) {
    const std::string where = path.string() + ": entry " + std::to_string(index);
    ++index;
    try {
      ManifestEntry e;
      e.key.gcm = item.at("gcm").get<std::string>();
      e.key.variable = variable_from_string(item.at("variable").get<std::string>());
      e.key.scenario = scenario_from_string(item.at("scenario").get<std::string>());
      e.key.ensemble = parse_ensemble_id(item.at("ensemble").get<std::string>());
      e.key.statistic = statistic_from_string(item.at("statistic").get<std::string>());
      e.key.zone = zone_from_string(item.at("zone").get<std::string>());
      fs::path p = item.at("path").get<std::string>();
      e.path = (p.is_absolute() ? p : base / p).lexically_normal().string();
      if (e.key.statistic == Statistic::min && e.key.variable != Variable::tas)
        throw validation_error("statistic 'min' is only defined for tas");
      if (!seen.insert(encode_key(e.key)).second)
        throw validation_error("duplicate dataset key " + encode_key(e.key));
      entries.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw validation_error(where + ": " + e.what());
    }
  }
  return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const fs::path& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& e : entries) {
    doc.push_back({{"gcm", e.key.gcm},
                   {"variable", to_string(e.key.variable)},
                   {"scenario", to_string(e.key.scenario)},
                   {"ensemble", format_ensemble_id(e.key.ensemble)},
                   {"statistic", to_string(e.key.statistic)},
                   {"zone", to_string(e.key.zone)},
                   {"path", e.path}});
  }
  std::ofstream out = open_output(path);
  out << doc.dump(2) << "\n";
  finish_output(out, path);
}

AnnualSeries load_series_csv(const fs::path& path, const DatasetKey& key) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line))
    throw validation_error(path.string() + ": empty file");
  expect_header(line, "year,value", path);
  AnnualSeries s;
  s.key = key;
  int lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2)
      throw validation_error(location(path, lineno) + ": expected 2 fields");
    const int year = parse_int(fields[0], path, lineno);
    if (s.values.empty())
      s.base_year = year;
    else if (year != s.base_year + static_cast<int>(s.values.size()))
      throw validation_error(location(path, lineno) +
                             ": years must increase by exactly 1");
    s.values.push_back(parse_double(fields[1], path, lineno));
  }
  if (s.values.empty())
    throw validation_error(path.string() + ": no data rows");
  return s;
}

void save_series_csv(const AnnualSeries& s, const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "year,value\n";
  for (int i = 0; i < s.span(); ++i)
    out << s.year(i) << "," << format_double(s.values[i]) << "\n";
  finish_output(out, path);
}

GridSeries load_grid_csv(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line))
    throw validation_error(path.string() + ": empty file");
  expect_header(line, "year,lat,lon,value", path);
  GridSeries g;
  int lineno = 1;
  size_t block_pos = 0;  // location index inside the current year block
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 4)
      throw validation_error(location(path, lineno) + ": expected 4 fields");
    const int year = parse_int(fields[0], path, lineno);
    const double lat = parse_double(fields[1], path, lineno);
    const double lon = parse_double(fields[2], path, lineno);
    const double value = parse_double(fields[3], path, lineno);
    if (g.years.empty() || year != g.years.back()) {
      if (!g.years.empty() && block_pos != g.n_locations())
        throw validation_error(location(path, lineno) +
                               ": year block has a different location count");
      if (!g.years.empty() && year != g.years.back() + 1)
        throw validation_error(location(path, lineno) +
                               ": years must increase by exactly 1");
      g.years.push_back(year);
      block_pos = 0;
    }
    if (g.years.size() == 1) {
      g.lat.push_back(lat);
      g.lon.push_back(lon);
    } else {
      if (block_pos >= g.n_locations())
        throw validation_error(location(path, lineno) +
                               ": more locations than the first year block");
      if (lat != g.lat[block_pos] || lon != g.lon[block_pos])
        throw validation_error(location(path, lineno) +
                               ": location order differs from the first year");
    }
    g.values.push_back(value);
    ++block_pos;
  }
  if (g.years.empty())
    throw validation_error(path.string() + ": no data rows");
  if (block_pos != g.n_locations())
    throw validation_error(path.string() +
                           ": last year block has a different location count");
  return g;
}

void save_grid_csv(const GridSeries& g, const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "year,lat,lon,value\n";
  for (size_t yi = 0; yi < g.n_years(); ++yi)
    for (size_t li = 0; li < g.n_locations(); ++li)
      out << g.years[yi] << "," << format_double(g.lat[li]) << ","
          << format_double(g.lon[li]) << "," << format_double(g.at(yi, li))
          << "\n";
  finish_output(out, path);
}

void save_chain_csv(const PosteriorChain& chain, const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "draw";
  for (const auto& n : chain.names) out << "," << n;
  out << ",log_likelihood\n";
  for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) {
    out << (i + 1);
    for (Eigen::Index j = 0; j < chain.draws.cols(); ++j)
      out << "," << format_double(chain.draws(i, j));
    out << "," << format_double(chain.log_density[static_cast<size_t>(i)]) << "\n";
  }
  finish_output(out, path);
}

PosteriorChain load_chain_csv(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line))
    throw validation_error(path.string() + ": empty file");
  const auto header = split_csv(line);
  if (header.size() < 3 || header.front() != "draw" ||
      header.back() != "log_likelihood")
    throw validation_error(path.string() +
                           ": expected header 'draw,<params...>,log_likelihood'");
  PosteriorChain chain;
  for (size_t i = 1; i + 1 < header.size(); ++i)
    chain.names.emplace_back(header[i]);
  const size_t dim = chain.names.size();
  std::vector<double> flat;
  int lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != dim + 2)
      throw validation_error(location(path, lineno) + ": expected " +
                             std::to_string(dim + 2) + " fields");
    for (size_t j = 1; j <= dim; ++j)
      flat.push_back(parse_double(fields[j], path, lineno));
    chain.log_density.push_back(parse_double(fields[dim + 1], path, lineno));
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(chain.log_density.size());
  if (rows == 0) throw validation_error(path.string() + ": no draws");
  chain.draws.resize(rows, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(dim); ++j)
      chain.draws(i, j) = flat[static_cast<size_t>(i) * dim +
                               static_cast<size_t>(j)];
  return chain;
}

namespace {
const char* delta_suffix(DeltaKind kind) {
  return kind == DeltaKind::Q ? ".delta_q.csv" : ".delta_m.csv";
}
}  // namespace

fs::path save_delta_csv(const DeltaDraws& d, const fs::path& dir) {
  const fs::path path = dir / (encode_key(d.key) + delta_suffix(d.kind));
  std::ofstream out = open_output(path);
  out << "draw,value\n";
  for (size_t i = 0; i < d.draws.size(); ++i)
    out << (i + 1) << "," << format_double(d.draws[i]) << "\n";
  finish_output(out, path);
  return path;
}

DeltaDraws load_delta_csv(const fs::path& path) {
  const std::string name = path.filename().string();
  DeltaDraws d;
  std::string stem;
  if (name.size() > 12 && name.ends_with(".delta_q.csv")) {
    d.kind = DeltaKind::Q;
    stem = name.substr(0, name.size() - 12);
  } else if (name.size() > 12 && name.ends_with(".delta_m.csv")) {
    d.kind = DeltaKind::M;
    stem = name.substr(0, name.size() - 12);
  } else {
    throw user_error(path.string() +
                     ": expected a <key>.delta_q.csv or <key>.delta_m.csv name");
  }
  d.key = decode_key(stem);
  std::ifstream in = open_input(path);
  std::string line;
  if (!next_line(in, line))
    throw validation_error(path.string() + ": empty file");
  expect_header(line, "draw,value", path);
  int lineno = 1;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2)
      throw validation_error(location(path, lineno) + ": expected 2 fields");
    d.draws.push_back(parse_double(fields[1], path, lineno));
  }
  if (d.draws.empty())
    throw validation_error(path.string() + ": no draws");
  const fs::path sidecar = path.string() + ".meta.json";
  if (fs::exists(sidecar)) {
    std::ifstream meta(sidecar);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(meta);
      if (doc.contains("excluded")) d.excluded = doc["excluded"].get<int>();
    } catch (const nlohmann::json::exception&) {
      // sidecar is advisory; a malformed one only loses the exclusion count
    }
  }
  return d;
}

void save_pooled_table(const std::vector<PooledRow>& rows, const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "variable,zone,scenario,E_delta,P_positive\n";
  for (const auto& r : rows)
    out << to_string(r.variable) << "," << to_string(r.zone) << ","
        << to_string(r.scenario) << "," << format_double(r.e_delta) << ","
        << format_double(r.p_positive) << "\n";
  finish_output(out, path);
}

void save_mixed_model_table(const std::vector<MixedModelRow>& rows,
                            const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "variable,zone,iota_plus_g1,g2_minus_g1,g3_minus_g1,tau_R,tau_FE,"
         "tau_eps,tau_delta,tau_zeta,R2_FE,R2_ME\n";
  for (const auto& r : rows) {
    const LmmFit& f = r.fit;
    out << to_string(r.variable) << "," << to_string(r.zone) << ","
        << format_double(f.iota_plus_g1) << "," << format_double(f.g2_minus_g1)
        << "," << format_double(f.g3_minus_g1) << "," << format_double(f.tau_r)
        << "," << format_double(f.tau_fe) << "," << format_double(f.tau_eps)
        << "," << format_double(f.tau_delta) << ","
        << format_double(f.tau_zeta) << "," << format_double(f.r2_fe) << ","
        << format_double(f.r2_me) << "\n";
  }
  finish_output(out, path);
}

void save_box_whisker_table(const std::vector<BoxWhiskerRow>& rows,
                            const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "variable,zone,gcm,scenario,mean,q025,q25,median,q75,q975\n";
  for (const auto& r : rows)
    out << to_string(r.variable) << "," << to_string(r.zone) << "," << r.gcm
        << "," << to_string(r.scenario) << "," << format_double(r.q.mean)
        << "," << format_double(r.q.q025) << "," << format_double(r.q.q25)
        << "," << format_double(r.q.median) << "," << format_double(r.q.q75)
        << "," << format_double(r.q.q975) << "\n";
  finish_output(out, path);
}

void write_metadata_sidecar(const fs::path& output, const nlohmann::json& fields) {
  nlohmann::json doc = fields;
  doc["artifact_version"] = kArtifactVersion;
  const fs::path path = output.string() + ".meta.json";
  std::ofstream out = open_output(path);
  out << doc.dump(2) << "\n";
  finish_output(out, path);
}

nlohmann::json chain_config_json(const ChainConfig& cfg) {
  return {{"adapt_start", cfg.adapt_start},
          {"burn_in", cfg.burn_in},
          {"iterations", cfg.iterations},
          {"beta_mix", cfg.beta_mix},
          {"fixed_step_sd", cfg.fixed_step_sd},
          {"small_step_sd", cfg.small_step_sd},
          {"literal_proposal", cfg.literal_proposal},
          {"seed", cfg.seed},
          {"init_retries", cfg.init_retries}};
}

}  // namespace climex
