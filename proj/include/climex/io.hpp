#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "climex/aggregate.hpp"
#include "climex/mcmc.hpp"
#include "climex/synoptic.hpp"
#include "climex/types.hpp"

namespace climex {

inline constexpr const char* kArtifactVersion = "0.1.0";

// %.17g: round-trip-exact decimal rendering used for every written double,
// so rerunning a pipeline stage reproduces files bit for bit.
std::string format_double(double v);

// FNV-1a 64 of a file's bytes as "fnv1a64:<16 hex digits>".
std::string hash_file(const std::filesystem::path& path);

struct ManifestEntry {
  DatasetKey key;
  std::string path;  // resolved against the manifest's directory on load
};

// JSON array of {gcm, variable, scenario, ensemble, statistic, zone, path}.
// Rejects duplicate keys, unknown enum tokens, and statistic=min on any
// variable but tas.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::filesystem::path& path);

// CSV with header `year,value`, years strictly increasing by 1; the key is
// external (manifest entry or filename).
AnnualSeries load_series_csv(const std::filesystem::path& path,
                             const DatasetKey& key);
void save_series_csv(const AnnualSeries& s, const std::filesystem::path& path);

// CSV with header `year,lat,lon,value`: contiguous ascending year blocks,
// every block listing the same locations in the same order.
GridSeries load_grid_csv(const std::filesystem::path& path);
void save_grid_csv(const GridSeries& g, const std::filesystem::path& path);

// CSV with header `draw,<param names...>,log_likelihood`. Loading restores
// names, draws and per-draw log density; acceptance counts and config live
// in the metadata sidecar and are not read back.
void save_chain_csv(const PosteriorChain& chain,
                    const std::filesystem::path& path);
PosteriorChain load_chain_csv(const std::filesystem::path& path);

// Change-functional draws: `draw,value` CSV named <key>.delta_<q|m>.csv; the
// exclusion count travels in the sidecar. save returns the written path;
// load recovers key and kind from the filename.
std::filesystem::path save_delta_csv(const DeltaDraws& d,
                                     const std::filesystem::path& dir);
DeltaDraws load_delta_csv(const std::filesystem::path& path);

// Synoptic table writers. Pooled rows: variable,zone,scenario,E_delta,
// P_positive. Mixed-model rows: variable,zone,iota_plus_g1,g2_minus_g1,
// g3_minus_g1,tau_R,tau_FE,tau_eps,tau_delta,tau_zeta,R2_FE,R2_ME.
// Box-whisker rows: variable,zone,gcm,scenario + QuantileSummary fields.
struct PooledRow {
  Variable variable;
  Zone zone;
  Scenario scenario;
  double e_delta;
  double p_positive;
};
struct MixedModelRow {
  Variable variable;
  Zone zone;
  LmmFit fit;
};
struct BoxWhiskerRow {
  Variable variable;
  Zone zone;
  std::string gcm;
  Scenario scenario;
  QuantileSummary q;
};
void save_pooled_table(const std::vector<PooledRow>& rows,
                       const std::filesystem::path& path);
void save_mixed_model_table(const std::vector<MixedModelRow>& rows,
                            const std::filesystem::path& path);
void save_box_whisker_table(const std::vector<BoxWhiskerRow>& rows,
                            const std::filesystem::path& path);

// Writes <output>.meta.json: {artifact_version, ...fields}; every pipeline
// output gets one so it can be reproduced exactly (inputs hash, config,
// seed).
void write_metadata_sidecar(const std::filesystem::path& output,
                            const nlohmann::json& fields);
nlohmann::json chain_config_json(const ChainConfig& cfg);

}  // namespace climex
