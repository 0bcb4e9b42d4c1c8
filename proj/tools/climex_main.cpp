// Command-line pipeline: aggregate -> fit -> delta -> summarize / lmm, plus
// synthetic-data generation (simulate) and coverage checking (verify).
// Every output directory gets metadata sidecars sufficient to reproduce it.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "climex/aggregate.hpp"
#include "climex/gevr.hpp"
#include "climex/io.hpp"
#include "climex/mcmc.hpp"
#include "climex/nhgr.hpp"
#include "climex/parallel.hpp"
#include "climex/rng.hpp"
#include "climex/simulator.hpp"
#include "climex/synoptic.hpp"
#include "climex/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_of(const std::exception& e) {
  if (dynamic_cast<const climex::user_error*>(&e)) return 1;
  if (dynamic_cast<const climex::validation_error*>(&e)) return 2;
  if (dynamic_cast<const climex::numeric_error*>(&e)) return 3;
  return 1;
}

const char* error_class_of(const std::exception& e) {
  if (dynamic_cast<const climex::validation_error*>(&e)) return "validation";
  if (dynamic_cast<const climex::numeric_error*>(&e)) return "numeric";
  return "user";
}

void report_error(const std::exception& e, bool json_errors) {
  if (json_errors) {
    json doc{{"error", error_class_of(e)}, {"message", e.what()}};
    std::cerr << doc.dump() << "\n";
  } else {
    std::cerr << "error: " << e.what() << "\n";
  }
}

json window_json(const climex::TrendWindow& w) {
  return {{"base_year", w.base_year}, {"span", w.span}};
}

// ---------------------------------------------------------------- aggregate

struct AggregateOpts {
  std::string grid;
  std::string statistic = "max";
  std::vector<std::string> zones;  // zone tokens, "global", or "all"
  std::string out = ".";
  std::string gcm = "SIM";
  std::string variable = "rsds";
  std::string scenario = "SSP126";
  std::string ensemble = "r1i1p1f1";
  bool skip_missing = false;
  bool cos_lat = false;
};

int run_aggregate(const AggregateOpts& o) {
  const climex::GridSeries grid = climex::load_grid_csv(o.grid);
  const climex::Statistic stat = climex::statistic_from_string(o.statistic);

  std::vector<climex::Zone> zones;
  bool want_global = false;
  std::vector<std::string> tokens = o.zones;
  if (tokens.empty()) tokens = {"global"};
  for (const auto& t : tokens) {
    if (t == "all") {
      zones = {climex::Zone::antarctic, climex::Zone::temperate_south,
               climex::Zone::tropical, climex::Zone::temperate_north,
               climex::Zone::arctic};
      want_global = true;
      break;
    }
    const climex::Zone z = climex::zone_from_string(t);
    if (z == climex::Zone::global_all)
      want_global = true;
    else
      zones.push_back(z);
  }

  climex::DatasetKey base;
  base.gcm = o.gcm;
  base.variable = climex::variable_from_string(o.variable);
  base.scenario = climex::scenario_from_string(o.scenario);
  base.ensemble = climex::parse_ensemble_id(o.ensemble);
  base.statistic = stat;

  climex::AggregateOptions agg;
  agg.skip_missing = o.skip_missing;
  agg.cos_lat_weights = o.cos_lat;

  const std::string grid_hash = climex::hash_file(o.grid);
  std::vector<climex::AnnualSeries> outputs;
  for (climex::Zone z : zones) {
    climex::AnnualSeries s = stat == climex::Statistic::mean
                                 ? climex::zone_mean(grid, z, agg)
                                 : climex::spatial_extreme(grid, z, stat, agg);
    s.key.gcm = base.gcm;
    s.key.variable = base.variable;
    s.key.scenario = base.scenario;
    s.key.ensemble = base.ensemble;
    outputs.push_back(std::move(s));
  }
  if (want_global) {
    climex::AnnualSeries s;
    if (stat == climex::Statistic::mean) {
      // Global mean is the area-weighted combination of all five zone means.
      std::array<climex::AnnualSeries, 5> zone_means;
      for (int z = 0; z < 5; ++z)
        zone_means[z] =
            climex::zone_mean(grid, static_cast<climex::Zone>(z), agg);
      s = climex::global_mean(zone_means, climex::zone_area_fractions());
    } else {
      s = climex::spatial_extreme(grid, climex::Zone::global_all, stat, agg);
    }
    s.key.gcm = base.gcm;
    s.key.variable = base.variable;
    s.key.scenario = base.scenario;
    s.key.ensemble = base.ensemble;
    outputs.push_back(std::move(s));
  }

  for (const auto& s : outputs) {
    const fs::path path = fs::path(o.out) / (climex::encode_key(s.key) + ".csv");
    climex::save_series_csv(s, path);
    climex::write_metadata_sidecar(
        path, {{"command", "aggregate"},
               {"inputs", {{o.grid, grid_hash}}},
               {"statistic", climex::to_string(s.key.statistic)},
               {"zone", climex::to_string(s.key.zone)}});
    std::cout << "wrote " << path.string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------- fit

struct ChainFlags {
  uint64_t seed = 0;
  int iterations = 10000;
  int burnin = 5000;
  int adapt_start = 2000;
  bool literal_proposal = false;
};

climex::ChainConfig make_chain_config(const ChainFlags& f) {
  climex::ChainConfig cfg;
  cfg.seed = f.seed;
  cfg.iterations = f.iterations;
  cfg.burn_in = f.burnin;
  cfg.adapt_start = f.adapt_start;
  cfg.literal_proposal = f.literal_proposal;
  return cfg;
}

struct FitOpts {
  std::vector<std::string> inputs;
  std::string manifest;
  std::string model = "auto";  // auto: max->gevr, min->negated gevr, mean->nhgr
  std::string out = ".";
  ChainFlags chain;
  int base_year = 2015;
  int span = 86;
  bool base_year_set = false;
  bool span_set = false;
  bool strict = false;
  bool allow_nonpositive_mean = false;
  int jobs = 1;
  bool json_errors = false;
};

struct FitTask {
  fs::path input;
  climex::DatasetKey key;
};

int run_fit(const FitOpts& o) {
  std::vector<FitTask> tasks;
  for (const auto& p : o.inputs) {
    FitTask t;
    t.input = p;
    t.key = climex::decode_key(fs::path(p).filename().stem().string());
    tasks.push_back(std::move(t));
  }
  if (!o.manifest.empty()) {
    for (const auto& e : climex::load_manifest(o.manifest))
      tasks.push_back({e.path, e.key});
  }
  if (tasks.empty())
    throw climex::user_error("fit: no input series (positional files or --manifest)");

  struct Result {
    bool ok = false;
    std::string message;
    int code = 0;
    const char* cls = "user";
  };
  std::vector<Result> results(tasks.size());

  climex::parallel_for(
      static_cast<int>(tasks.size()), o.jobs, [&](int i) {
        const FitTask& task = tasks[static_cast<size_t>(i)];
        Result& res = results[static_cast<size_t>(i)];
        try {
          climex::AnnualSeries s = climex::load_series_csv(task.input, task.key);
          climex::TrendWindow w{s.base_year, s.span()};
          if (o.base_year_set && o.base_year != w.base_year)
            throw climex::validation_error(
                task.input.string() + ": series starts " +
                std::to_string(w.base_year) + " but --base-year says " +
                std::to_string(o.base_year));
          if (o.span_set && o.span != w.span)
            throw climex::validation_error(
                task.input.string() + ": series spans " +
                std::to_string(w.span) + " years but --span says " +
                std::to_string(o.span));

          std::string model = o.model;
          if (model == "auto") {
            switch (s.key.statistic) {
              case climex::Statistic::max: model = "gevr"; break;
              case climex::Statistic::min: model = "gevr"; break;
              case climex::Statistic::mean: model = "nhgr"; break;
            }
          }
          bool negated = false;
          if (model == "gevr" && s.key.statistic == climex::Statistic::min) {
            s = climex::negate(s);  // block minima fit as negated maxima
            negated = true;
          }

          climex::ChainConfig cfg = make_chain_config(o.chain);
          cfg.seed = o.chain.seed ^ climex::fnv1a64(climex::encode_key(task.key));
          climex::Target target =
              model == "gevr"
                  ? climex::gevr_target(s, w)
                  : climex::nhgr_target(s, w, !o.allow_nonpositive_mean);
          const climex::PosteriorChain chain = climex::run_chain(target, cfg);

          const fs::path path =
              fs::path(o.out) / (climex::encode_key(task.key) + ".chain.csv");
          climex::save_chain_csv(chain, path);
          climex::write_metadata_sidecar(
              path,
              {{"command", "fit"},
               {"model", model},
               {"negated", negated},
               {"require_positive_mean", !o.allow_nonpositive_mean},
               {"window", window_json(w)},
               {"inputs", {{task.input.string(), climex::hash_file(task.input)}}},
               {"config", climex::chain_config_json(cfg)},
               {"acceptance",
                {{"fixed", climex::acceptance_rate(chain, climex::Phase::fixed)},
                 {"adaptive",
                  climex::acceptance_rate(chain, climex::Phase::adaptive)}}},
               {"excluded", 0}});
          res.ok = true;
          res.message = "wrote " + path.string();
        } catch (const std::exception& e) {
          res.ok = false;
          res.message = task.input.string() + ": " + e.what();
          res.code = exit_code_of(e);
          res.cls = error_class_of(e);
        }
      });

  int failures = 0;
  int first_code = 0;
  for (const auto& r : results) {
    if (r.ok) {
      std::cout << r.message << "\n";
    } else {
      if (o.json_errors) {
        json doc{{"error", r.cls}, {"message", r.message}};
        std::cerr << doc.dump() << "\n";
      } else {
        std::cerr << "error: " << r.message << "\n";
      }
      ++failures;
      if (first_code == 0) first_code = r.code;
    }
  }
  if (failures == static_cast<int>(results.size())) return first_code;
  if (failures > 0 && o.strict) return first_code;
  return 0;
}

// -------------------------------------------------------------------- delta

struct DeltaOpts {
  std::vector<std::string> chains;
  std::string kind = "q";
  std::string mode = "parametric";  // delta-m only: parametric|predictive|both
  double return_period = 100.0;
  uint64_t seed = 0;
  std::string out = ".";
};

struct ChainMeta {
  climex::TrendWindow window{};
  bool negated = false;
  bool require_positive_mean = true;
};

ChainMeta read_chain_meta(const fs::path& chain_path) {
  ChainMeta meta;
  const fs::path sidecar = chain_path.string() + ".meta.json";
  std::ifstream in(sidecar);
  if (!in)
    throw climex::user_error(chain_path.string() +
                             ": missing sidecar " + sidecar.string() +
                             " (needed for the fit window)");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw climex::validation_error(sidecar.string() + ": " + e.what());
  }
  try {
    meta.window.base_year = doc.at("window").at("base_year").get<int>();
    meta.window.span = doc.at("window").at("span").get<int>();
    meta.negated = doc.value("negated", false);
    meta.require_positive_mean = doc.value("require_positive_mean", true);
  } catch (const json::exception& e) {
    throw climex::validation_error(sidecar.string() + ": " + e.what());
  }
  return meta;
}

climex::DeltaDraws delta_of_chain(const climex::PosteriorChain& chain,
                                  const climex::DatasetKey& key,
                                  const ChainMeta& meta, climex::DeltaKind kind,
                                  bool predictive, double return_period,
                                  uint64_t seed) {
  static const std::vector<std::string> gevr_names{"mu0",    "mu1", "sigma0",
                                                   "sigma1", "xi0", "xi1"};
  static const std::vector<std::string> nhgr_names{"alpha0", "alpha1", "beta0",
                                                   "beta1"};
  climex::DeltaDraws d;
  d.key = key;
  d.kind = kind;
  const climex::TrendWindow w = meta.window;
  climex::FunctionalDraws fd;
  if (kind == climex::DeltaKind::Q) {
    if (chain.names != gevr_names)
      throw climex::validation_error(
          "delta Q needs a GEV regression chain (mu0..xi1 columns)");
    const climex::ReturnSpec rspec{return_period};
    fd = climex::posterior_functional(chain, [&](const double* t) {
      climex::GevrParams g{t[0], t[1], t[2], t[3], t[4], t[5]};
      return climex::delta_q(g, w, rspec);
    });
    if (meta.negated)  // chain modeled the negated minima; flip back
      for (double& v : fd.values) v = -v;
  } else {
    if (chain.names != nhgr_names)
      throw climex::validation_error(
          "delta M needs a Gaussian regression chain (alpha0..beta1 columns)");
    if (predictive) {
      climex::SplitMix64 rng =
          climex::stream(seed, climex::fnv1a64(climex::encode_key(key)));
      fd = climex::posterior_functional(chain, [&](const double* t) {
        climex::NhgrParams nh{t[0], t[1], t[2], t[3]};
        return climex::delta_m_predictive(nh, w, rng, 2025, 2125,
                                          meta.require_positive_mean);
      });
    } else {
      fd = climex::posterior_functional(chain, [&](const double* t) {
        climex::NhgrParams nh{t[0], t[1], t[2], t[3]};
        return climex::Extrapolated{climex::delta_m_parametric(nh, w), true, 0, 0};
      });
    }
  }
  d.draws = std::move(fd.values);
  d.excluded = fd.excluded;
  return d;
}

int run_delta(const DeltaOpts& o) {
  if (o.chains.empty()) throw climex::user_error("delta: no chain files given");
  const climex::DeltaKind kind =
      o.kind == "q" || o.kind == "Q"
          ? climex::DeltaKind::Q
          : (o.kind == "m" || o.kind == "M"
                 ? climex::DeltaKind::M
                 : throw climex::user_error("delta: --kind must be q or m"));
  if (o.mode != "parametric" && o.mode != "predictive" && o.mode != "both")
    throw climex::user_error(
        "delta: --delta-m-mode must be parametric, predictive or both");
  if (!(o.return_period > 1))
    throw climex::user_error("delta: --return-period must exceed 1");

  for (const auto& input : o.chains) {
    const fs::path chain_path = input;
    const std::string name = chain_path.filename().string();
    if (!name.ends_with(".chain.csv"))
      throw climex::user_error(input + ": expected a <key>.chain.csv name");
    const climex::DatasetKey key =
        climex::decode_key(name.substr(0, name.size() - 10));
    const climex::PosteriorChain chain = climex::load_chain_csv(chain_path);
    const ChainMeta meta = read_chain_meta(chain_path);

    std::vector<std::pair<bool, fs::path>> variants;  // (predictive, out dir)
    if (kind == climex::DeltaKind::Q) {
      variants.emplace_back(false, fs::path(o.out));
    } else if (o.mode == "both") {
      variants.emplace_back(false, fs::path(o.out) / "parametric");
      variants.emplace_back(true, fs::path(o.out) / "predictive");
    } else {
      variants.emplace_back(o.mode == "predictive", fs::path(o.out));
    }

    for (const auto& [predictive, dir] : variants) {
      const climex::DeltaDraws d = delta_of_chain(
          chain, key, meta, kind, predictive, o.return_period, o.seed);
      const fs::path path = climex::save_delta_csv(d, dir);
      json sidecar{{"command", "delta"},
                   {"kind", kind == climex::DeltaKind::Q ? "Q" : "M"},
                   {"inputs", {{input, climex::hash_file(input)}}},
                   {"window", window_json(meta.window)},
                   {"negated", meta.negated},
                   {"excluded", d.excluded}};
      if (kind == climex::DeltaKind::Q) {
        sidecar["return_period"] = o.return_period;
      } else {
        sidecar["mode"] = predictive ? "predictive" : "parametric";
        if (predictive) sidecar["seed"] = o.seed;
      }
      climex::write_metadata_sidecar(path, sidecar);
      std::cout << "wrote " << path.string() << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------- summarize / lmm

std::vector<climex::DeltaDraws> load_deltas(const std::vector<std::string>& files,
                                            const std::string& dir) {
  std::vector<std::string> paths = files;
  if (!dir.empty()) {
    if (!fs::is_directory(dir))
      throw climex::user_error(dir + " is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.ends_with(".delta_q.csv") || name.ends_with(".delta_m.csv"))
        paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty())
    throw climex::user_error("no delta files (positional or --dir)");
  std::vector<climex::DeltaDraws> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(climex::load_delta_csv(p));
  for (size_t i = 1; i < out.size(); ++i)
    if (out[i].kind != out[0].kind)
      throw climex::user_error(
          "inputs mix Q and M deltas; run once per functional kind");
  return out;
}

json input_hashes(const std::vector<std::string>& files, const std::string& dir) {
  std::vector<std::string> paths = files;
  if (!dir.empty())
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.ends_with(".delta_q.csv") || name.ends_with(".delta_m.csv"))
        paths.push_back(entry.path().string());
    }
  std::sort(paths.begin(), paths.end());
  json hashes = json::object();
  for (const auto& p : paths) hashes[p] = climex::hash_file(p);
  return hashes;
}

struct SummarizeOpts {
  std::vector<std::string> files;
  std::string dir;
  std::string out = ".";
};

int run_summarize(const SummarizeOpts& o) {
  const std::vector<climex::DeltaDraws> deltas = load_deltas(o.files, o.dir);

  using GroupKey = std::tuple<int, int, int>;  // variable, zone, scenario
  std::map<GroupKey, std::vector<climex::DeltaDraws>> groups;
  using CellKey = std::tuple<int, int, std::string, int>;  // + gcm
  std::map<CellKey, std::vector<climex::DeltaDraws>> cells;
  for (const auto& d : deltas) {
    const int v = static_cast<int>(d.key.variable);
    const int z = static_cast<int>(d.key.zone);
    const int s = climex::scenario_index(d.key.scenario);
    groups[{v, z, s}].push_back(d);
    cells[{v, z, d.key.gcm, s}].push_back(d);
  }

  std::vector<climex::PooledRow> pooled_rows;
  for (const auto& [gk, members] : groups) {
    const climex::WeightedDraws pooled = climex::pool_equal_weight(members);
    climex::PooledRow row;
    row.variable = members.front().key.variable;
    row.zone = members.front().key.zone;
    row.scenario = members.front().key.scenario;
    row.e_delta = climex::expected_change(pooled);
    row.p_positive = climex::prob_positive(pooled);
    pooled_rows.push_back(row);
  }
  std::vector<climex::BoxWhiskerRow> box_rows;
  for (const auto& [ck, members] : cells) {
    const climex::WeightedDraws pooled = climex::pool_equal_weight(members);
    climex::BoxWhiskerRow row;
    row.variable = members.front().key.variable;
    row.zone = members.front().key.zone;
    row.gcm = members.front().key.gcm;
    row.scenario = members.front().key.scenario;
    row.q = climex::quantile_summary(pooled);
    box_rows.push_back(row);
  }

  const fs::path pooled_path = fs::path(o.out) / "pooled.csv";
  const fs::path box_path = fs::path(o.out) / "box_whisker.csv";
  climex::save_pooled_table(pooled_rows, pooled_path);
  climex::save_box_whisker_table(box_rows, box_path);
  const json hashes = input_hashes(o.files, o.dir);
  climex::write_metadata_sidecar(pooled_path,
                                 {{"command", "summarize"}, {"inputs", hashes}});
  climex::write_metadata_sidecar(box_path,
                                 {{"command", "summarize"}, {"inputs", hashes}});
  std::cout << "wrote " << pooled_path.string() << "\n";
  std::cout << "wrote " << box_path.string() << "\n";
  return 0;
}

struct LmmOpts {
  std::vector<std::string> files;
  std::string dir;
  std::string out = ".";
  bool reml = false;
};

int run_lmm(const LmmOpts& o) {
  const std::vector<climex::DeltaDraws> deltas = load_deltas(o.files, o.dir);

  // Labels: models are GCM tags, ensembles full ensemble ids; both mapped to
  // dense indices in sorted order so runs are reproducible.
  std::set<std::string> gcms, ensembles;
  for (const auto& d : deltas) {
    gcms.insert(d.key.gcm);
    ensembles.insert(climex::format_ensemble_id(d.key.ensemble));
  }
  std::map<std::string, int> gcm_index, ens_index;
  int next = 1;
  for (const auto& g : gcms) gcm_index[g] = next++;
  next = 1;
  for (const auto& e : ensembles) ens_index[e] = next++;

  using GroupKey = std::pair<int, int>;  // variable, zone
  std::map<GroupKey, std::vector<climex::LmmObs>> groups;
  for (const auto& d : deltas) {
    auto& obs = groups[{static_cast<int>(d.key.variable),
                        static_cast<int>(d.key.zone)}];
    climex::LmmObs base;
    base.scenario = climex::scenario_index(d.key.scenario);
    base.model = gcm_index[d.key.gcm];
    base.ensemble = ens_index[climex::format_ensemble_id(d.key.ensemble)];
    for (double v : d.draws) {
      base.value = v;
      obs.push_back(base);
    }
  }

  std::vector<climex::MixedModelRow> rows;
  for (const auto& [gk, obs] : groups) {
    climex::MixedModelRow row;
    row.variable = static_cast<climex::Variable>(gk.first);
    row.zone = static_cast<climex::Zone>(gk.second);
    row.fit = climex::lmm_fit(obs, o.reml);
    rows.push_back(std::move(row));
  }

  const fs::path path = fs::path(o.out) / "mixed_model.csv";
  climex::save_mixed_model_table(rows, path);
  climex::write_metadata_sidecar(path, {{"command", "lmm"},
                                        {"reml", o.reml},
                                        {"inputs", input_hashes(o.files, o.dir)}});
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

// ----------------------------------------------------- simulate and verify

struct SimulateOpts {
  std::string spec;
  std::string out = ".";
  uint64_t seed = 0;
  bool seed_set = false;
};

climex::DatasetKey key_from_json(const json& doc) {
  climex::DatasetKey key;
  key.gcm = doc.value("gcm", "SIM");
  key.variable = climex::variable_from_string(doc.value("variable", "rsds"));
  key.scenario = climex::scenario_from_string(doc.value("scenario", "SSP126"));
  key.ensemble = climex::parse_ensemble_id(doc.value("ensemble", "r1i1p1f1"));
  key.statistic = climex::statistic_from_string(doc.value("statistic", "max"));
  key.zone = climex::zone_from_string(doc.value("zone", "global"));
  return key;
}

climex::SyntheticSpec series_spec_from_json(const json& doc) {
  climex::SyntheticSpec spec;
  const std::string model = doc.at("model").get<std::string>();
  spec.model = model == "gevr" ? climex::SimModel::gevr : climex::SimModel::nhgr;
  const json truth = doc.value("truth", json::object());
  if (spec.model == climex::SimModel::gevr) {
    spec.gevr_truth.mu0 = truth.value("mu0", 0.0);
    spec.gevr_truth.mu1 = truth.value("mu1", 0.0);
    spec.gevr_truth.sigma0 = truth.value("sigma0", 1.0);
    spec.gevr_truth.sigma1 = truth.value("sigma1", 0.0);
    spec.gevr_truth.xi0 = truth.value("xi0", 0.0);
    spec.gevr_truth.xi1 = truth.value("xi1", 0.0);
  } else {
    spec.nhgr_truth.alpha0 = truth.value("alpha0", 0.0);
    spec.nhgr_truth.alpha1 = truth.value("alpha1", 0.0);
    spec.nhgr_truth.beta0 = truth.value("beta0", 1.0);
    spec.nhgr_truth.beta1 = truth.value("beta1", 0.0);
  }
  spec.window.base_year = doc.value("base_year", 2015);
  spec.window.span = doc.value("span", 86);
  spec.n_replicates = doc.value("replicates", 1);
  spec.seed = doc.value("seed", uint64_t{0});
  spec.key = key_from_json(doc.value("key", json::object()));
  if (spec.model == climex::SimModel::nhgr && !doc.contains("key"))
    spec.key.statistic = climex::Statistic::mean;
  return spec;
}

int run_simulate(const SimulateOpts& o) {
  std::ifstream in(o.spec);
  if (!in) throw climex::user_error("cannot open " + o.spec);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw climex::validation_error(o.spec + ": " + e.what());
  }
  if (!doc.contains("model"))
    throw climex::validation_error(o.spec + ": spec needs a 'model' field");
  const std::string model = doc["model"].get<std::string>();
  const std::string spec_hash = climex::hash_file(o.spec);

  if (model == "lmm") {
    climex::LmmTruth truth;
    const json t = doc.value("truth", json::object());
    truth.iota = t.value("iota", 0.0);
    if (t.contains("gamma")) {
      const auto g = t["gamma"].get<std::vector<double>>();
      for (size_t i = 0; i < g.size() && i < 3; ++i) truth.gamma[i] = g[i];
    }
    truth.tau_delta = t.value("tau_delta", 0.0);
    truth.tau_zeta = t.value("tau_zeta", 0.0);
    truth.tau_eps = t.value("tau_eps", 0.0);
    climex::LmmDesign design;
    const json d = doc.value("design", json::object());
    design.n_scenarios = d.value("scenarios", 3);
    design.n_models = d.value("models", 5);
    design.n_ensembles = d.value("ensembles", 3);
    design.n_per_cell = d.value("per_cell", 50);
    const uint64_t seed = o.seed_set ? o.seed : doc.value("seed", uint64_t{0});

    const auto obs = climex::gen_lmm_dataset(truth, design, seed);
    const fs::path path = fs::path(o.out) / "lmm_observations.csv";
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw climex::user_error("cannot write " + path.string());
    out << "scenario,model,ensemble,value\n";
    for (const auto& ob : obs)
      out << ob.scenario << "," << ob.model << "," << ob.ensemble << ","
          << climex::format_double(ob.value) << "\n";
    out.flush();
    if (!out) throw climex::user_error("failed writing " + path.string());
    climex::write_metadata_sidecar(path, {{"command", "simulate"},
                                          {"inputs", {{o.spec, spec_hash}}},
                                          {"seed", seed}});
    std::cout << "wrote " << path.string() << "\n";
    return 0;
  }

  if (model != "gevr" && model != "nhgr")
    throw climex::validation_error(o.spec +
                                   ": model must be gevr, nhgr or lmm");
  climex::SyntheticSpec spec = series_spec_from_json(doc);
  if (o.seed_set) spec.seed = o.seed;

  const std::vector<climex::AnnualSeries> series = climex::gen_series(spec);
  std::vector<climex::ManifestEntry> entries;
  for (const auto& s : series) {
    const fs::path path = fs::path(o.out) / (climex::encode_key(s.key) + ".csv");
    climex::save_series_csv(s, path);
    climex::write_metadata_sidecar(path, {{"command", "simulate"},
                                          {"inputs", {{o.spec, spec_hash}}},
                                          {"seed", spec.seed}});
    entries.push_back({s.key, climex::encode_key(s.key) + ".csv"});
    std::cout << "wrote " << path.string() << "\n";
  }
  const fs::path manifest_path = fs::path(o.out) / "manifest.json";
  climex::save_manifest(entries, manifest_path);
  std::cout << "wrote " << manifest_path.string() << "\n";
  return 0;
}

struct VerifyOpts {
  std::string spec;
  std::string out = ".";
  ChainFlags chain;
  int datasets = 100;
  double level = 0.95;
  double return_period = 100.0;
  int jobs = 1;
};

int run_verify(const VerifyOpts& o) {
  std::ifstream in(o.spec);
  if (!in) throw climex::user_error("cannot open " + o.spec);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw climex::validation_error(o.spec + ": " + e.what());
  }
  const climex::SyntheticSpec spec = series_spec_from_json(doc);
  const climex::ChainConfig cfg = make_chain_config(o.chain);
  const climex::ReturnSpec rspec{o.return_period};

  const climex::CoverageReport report = climex::coverage_experiment(
      spec, cfg, o.datasets, rspec, o.level, o.jobs);

  const fs::path path = fs::path(o.out) / "coverage.csv";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw climex::user_error("cannot write " + path.string());
  out << "param,covered,evaluated,fraction,ci_lo,ci_hi\n";
  for (const auto& pc : report.params)
    out << pc.name << "," << pc.covered << "," << pc.evaluated << ","
        << climex::format_double(pc.ci.fraction) << ","
        << climex::format_double(pc.ci.lo) << ","
        << climex::format_double(pc.ci.hi) << "\n";
  out.flush();
  if (!out) throw climex::user_error("failed writing " + path.string());
  climex::write_metadata_sidecar(
      path, {{"command", "verify"},
             {"inputs", {{o.spec, climex::hash_file(o.spec)}}},
             {"config", climex::chain_config_json(cfg)},
             {"n_datasets", report.n_datasets},
             {"failed_fits", report.failed_fits},
             {"level", report.level}});
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Block-statistics pipeline: non-stationary extreme value and Gaussian "
      "regression over gridded annual climate output"};
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors,
               "machine-readable error JSON on stderr");
  // subcommand callbacks throw before the parser applies bound app flags,
  // so the reporting mode must be read straight from argv
  for (int i = 1; i < argc; ++i)
    if (std::string_view(argv[i]) == "--json-errors") json_errors = true;

  AggregateOpts agg;
  auto* cmd_agg = app.add_subcommand(
      "aggregate", "Grid CSV -> per-zone annual series (max/min/mean)");
  cmd_agg->add_option("--grid", agg.grid, "grid CSV (year,lat,lon,value)")
      ->required();
  cmd_agg->add_option("--statistic", agg.statistic, "max, min or mean")
      ->required();
  cmd_agg->add_option("--zone", agg.zones,
                      "zone token, 'global', or 'all' (repeatable; default "
                      "global)");
  cmd_agg->add_option("--out", agg.out, "output directory");
  cmd_agg->add_option("--gcm", agg.gcm, "GCM tag stamped on outputs");
  cmd_agg->add_option("--variable", agg.variable, "variable stamped on outputs");
  cmd_agg->add_option("--scenario", agg.scenario, "scenario stamped on outputs");
  cmd_agg->add_option("--ensemble", agg.ensemble, "ensemble id stamped on outputs");
  cmd_agg->add_flag("--skip-missing", agg.skip_missing,
                    "ignore NaN cells instead of failing");
  cmd_agg->add_flag("--cos-lat", agg.cos_lat,
                    "cosine-latitude weights for zone means");

  FitOpts fit;
  auto* cmd_fit = app.add_subcommand(
      "fit", "Series CSVs -> posterior chains (GEV or Gaussian regression)");
  cmd_fit->add_option("inputs", fit.inputs,
                      "series CSVs named <key>.csv (key decoded from name)");
  cmd_fit->add_option("--manifest", fit.manifest, "manifest JSON with keys+paths");
  cmd_fit->add_option("--model", fit.model, "auto, gevr or nhgr (auto: by statistic)");
  cmd_fit->add_option("--out", fit.out, "output directory");
  cmd_fit->add_option("--seed", fit.chain.seed, "master seed (xored per key)");
  cmd_fit->add_option("--iterations", fit.chain.iterations, "retained draws n_I");
  cmd_fit->add_option("--burnin", fit.chain.burnin, "burn-in n_B");
  cmd_fit->add_option("--adapt-start", fit.chain.adapt_start,
                      "fixed-proposal iterations n_S");
  cmd_fit->add_flag("--literal-proposal", fit.chain.literal_proposal,
                    "printed proposal form: 2.38^2 Sigma and 0.1^2/4 I");
  cmd_fit->add_option("--base-year", fit.base_year,
                      "expected series start (check only)");
  cmd_fit->add_option("--span", fit.span, "expected series length (check only)");
  cmd_fit->add_flag("--strict", fit.strict, "any per-file failure is fatal");
  cmd_fit->add_flag("--allow-nonpositive-mean", fit.allow_nonpositive_mean,
                    "drop the alpha_t > 0 likelihood constraint");
  cmd_fit->add_option("--jobs", fit.jobs, "parallel fits");

  DeltaOpts del;
  auto* cmd_delta = app.add_subcommand(
      "delta", "Chains -> change-functional draws (2025 to 2125)");
  cmd_delta->add_option("chains", del.chains, "chain CSVs named <key>.chain.csv");
  cmd_delta->add_option("--kind", del.kind, "q (return value) or m (mean)");
  cmd_delta->add_option("--delta-m-mode", del.mode,
                        "parametric, predictive or both (kind m)");
  cmd_delta->add_option("--return-period", del.return_period,
                        "return period T in years");
  cmd_delta->add_option("--seed", del.seed, "seed for predictive draws");
  cmd_delta->add_option("--out", del.out, "output directory");

  SummarizeOpts summ;
  auto* cmd_summ = app.add_subcommand(
      "summarize", "Delta files -> pooled expectations and box-whisker CSVs");
  cmd_summ->add_option("files", summ.files, "delta CSVs");
  cmd_summ->add_option("--dir", summ.dir, "directory scanned for delta CSVs");
  cmd_summ->add_option("--out", summ.out, "output directory");

  LmmOpts lmm;
  auto* cmd_lmm = app.add_subcommand(
      "lmm", "Delta files -> mixed-effects variance decomposition table");
  cmd_lmm->add_option("files", lmm.files, "delta CSVs");
  cmd_lmm->add_option("--dir", lmm.dir, "directory scanned for delta CSVs");
  cmd_lmm->add_option("--out", lmm.out, "output directory");
  cmd_lmm->add_flag("--reml", lmm.reml, "REML instead of ML for variance ratios");

  SimulateOpts sim;
  auto* cmd_sim = app.add_subcommand(
      "simulate", "Spec JSON -> synthetic series or mixed-model observations");
  cmd_sim->add_option("--spec", sim.spec, "synthetic spec JSON")->required();
  cmd_sim->add_option("--out", sim.out, "output directory");
  auto* sim_seed = cmd_sim->add_option("--seed", sim.seed,
                                       "overrides the spec's seed");

  VerifyOpts ver;
  auto* cmd_ver = app.add_subcommand(
      "verify", "Simulate+fit n times; credible-interval coverage report");
  cmd_ver->add_option("--spec", ver.spec, "synthetic spec JSON")->required();
  cmd_ver->add_option("--out", ver.out, "output directory");
  cmd_ver->add_option("--datasets", ver.datasets, "number of replicates");
  cmd_ver->add_option("--level", ver.level, "credible level (default 0.95)");
  cmd_ver->add_option("--return-period", ver.return_period,
                      "return period for the change functional");
  cmd_ver->add_option("--seed", ver.chain.seed, "chain master seed");
  cmd_ver->add_option("--iterations", ver.chain.iterations, "retained draws n_I");
  cmd_ver->add_option("--burnin", ver.chain.burnin, "burn-in n_B");
  cmd_ver->add_option("--adapt-start", ver.chain.adapt_start,
                      "fixed-proposal iterations n_S");
  cmd_ver->add_flag("--literal-proposal", ver.chain.literal_proposal,
                    "printed proposal form");
  cmd_ver->add_option("--jobs", ver.jobs, "parallel replicates");

  int rc = 0;
  cmd_agg->callback([&] { rc = run_aggregate(agg); });
  cmd_fit->callback([&] {
    fit.base_year_set = cmd_fit->count("--base-year") > 0;
    fit.span_set = cmd_fit->count("--span") > 0;
    fit.json_errors = json_errors;
    rc = run_fit(fit);
  });
  cmd_delta->callback([&] { rc = run_delta(del); });
  cmd_summ->callback([&] { rc = run_summarize(summ); });
  cmd_lmm->callback([&] { rc = run_lmm(lmm); });
  cmd_sim->callback([&] {
    sim.seed_set = sim_seed->count() > 0;
    rc = run_simulate(sim);
  });
  cmd_ver->callback([&] { rc = run_verify(ver); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    report_error(e, json_errors);
    return exit_code_of(e);
  }
  return rc;
}
