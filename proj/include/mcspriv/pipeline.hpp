// Copyright 2026 The mcspriv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MCSPRIV_PIPELINE_HPP
#define MCSPRIV_PIPELINE_HPP

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcspriv/attack.hpp"
#include "mcspriv/ingest.hpp"
#include "mcspriv/lppm.hpp"
#include "mcspriv/metrics.hpp"
#include "mcspriv/parallel.hpp"
#include "mcspriv/poi.hpp"
#include "mcspriv/raster.hpp"
#include "mcspriv/region.hpp"
#include "mcspriv/synth.hpp"
#include "mcspriv/utility.hpp"

namespace mcspriv {

inline constexpr const char* kToolVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Run configuration. One JSON file drives the whole evaluation protocol;
// every random choice is pinned by explicit seeds.

struct DatasetConfig {
  enum class Kind { kSynth, kSafecast, kRadiocells } kind = Kind::kSynth;
  std::string path;            // safecast / radiocells CSV
  std::string exclusion_list;  // optional, safecast organization ids
  // synth
  SynthProfile profile;
  std::size_t users = 10;
  double spread_m = 0.0;
};

struct FilterConfig {
  bool enabled = false;
  std::size_t min_points = 100;
  double max_speed_kmh = 200.0;
};

struct AttackConfig {
  Schedule schedule = default_relaxation_schedule();
  std::size_t top_k = 5;
  bool temporal_filter = false;
  bool work_hours_only = false;
  double cell_size_m = 10.0;
};

struct LppmEntry {
  LppmSpec spec;
  std::string label;
  std::optional<std::uint64_t> seed;
};

struct PoiConfig {
  enum class Kind { kNone, kOffline, kOverpass } kind = Kind::kNone;
  std::string path;      // offline file
  std::string endpoint = "https://overpass-api.de/api/interpreter";
  std::string cache_dir; // empty -> MCSPRIV_CACHE_DIR env or <output>/overpass_cache
  double timeout_s = 30.0;
};

struct UtilityConfig {
  bool radiation_map = true;
  std::uint32_t grid_resolution = 1500;
  double window_days = 270.0;
  double hotspot_threshold_cpm = 100.0;
  bool antennas = false;
};

struct ColocationConfig {
  bool enabled = false;
  double d_max_m = 50.0;   // no published threshold exists; see README
  double t_max_s = 300.0;
};

struct RunConfig {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string output_dir = "out";
  RegionSpec region;
  DatasetConfig dataset;
  FilterConfig filters;
  AttackConfig attack;
  std::vector<LppmEntry> lppms;
  PoiConfig poi;
  UtilityConfig utility;
  ColocationConfig colocation;
  bool crop_to_region = true;

  nlohmann::json raw;  // canonical source for the config hash

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
};

namespace cfgdetail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline GeoPoint get_point(const nlohmann::json& j, const char* context) {
  if (!j.contains("lat") || !j.contains("lon")) {
    throw ConfigError(std::string(context) + ": needs lat and lon");
  }
  GeoPoint p{j.at("lat").get<double>(), j.at("lon").get<double>()};
  if (!is_valid(p)) throw ConfigError(std::string(context) + ": invalid coordinates");
  return p;
}

inline SynthProfile parse_profile(const nlohmann::json& j) {
  SynthProfile profile;
  if (!j.contains("anchors") || !j.at("anchors").is_array() ||
      j.at("anchors").empty()) {
    throw ConfigError("synth profile: anchors array required");
  }
  profile.anchors.clear();
  for (const auto& a : j.at("anchors")) {
    SynthAnchor anchor;
    anchor.point = get_point(a, "synth anchor");
    anchor.start_hour = get_or(a, "start_hour", 9.0);
    anchor.dwell_minutes = get_or(a, "dwell_minutes", 60.0);
    anchor.points_per_minute = get_or(a, "points_per_minute", 1.0);
    profile.anchors.push_back(anchor);
  }
  profile.jitter_m = get_or(j, "jitter_m", 10.0);
  profile.days = get_or(j, "days", 3);
  if (j.contains("field")) {
    const auto& f = j.at("field");
    const std::string kind = get_or<std::string>(f, "kind", "constant");
    if (kind == "constant") {
      profile.field.kind = ValueField::Kind::kConstant;
      profile.field.constant_cpm = get_or(f, "constant_cpm", 30.0);
    } else if (kind == "gaussian_bump") {
      profile.field.kind = ValueField::Kind::kGaussianBump;
      profile.field.bump_center = get_point(f.at("center"), "field center");
      profile.field.peak_cpm = get_or(f, "peak_cpm", 150.0);
      profile.field.sigma_m = get_or(f, "sigma_m", 50.0);
      profile.field.background_cpm = get_or(f, "background_cpm", 30.0);
    } else {
      throw ConfigError("synth field kind must be constant or gaussian_bump");
    }
  }
  return profile;
}

inline LppmSpec parse_lppm_spec(const nlohmann::json& j) {
  if (j.contains("preset")) {
    const auto presets = paper_presets();
    const std::string name = j.at("preset").get<std::string>();
    const auto it = presets.find(name);
    if (it == presets.end()) throw ConfigError("unknown lppm preset: " + name);
    return it->second;
  }
  const std::string name = get_or<std::string>(j, "name", "");
  LppmSpec spec;
  if (name == "identity") {
    spec.kind = LppmKind::kIdentity;
  } else if (name == "geoind") {
    spec.kind = LppmKind::kGeoInd;
  } else if (name == "release_geoind") {
    spec.kind = LppmKind::kReleaseGeoInd;
  } else if (name == "geoind_or") {
    spec.kind = LppmKind::kGeoIndOr;
  } else if (name == "random_hiding") {
    spec.kind = LppmKind::kRandomHiding;
  } else if (name == "release_hiding") {
    spec.kind = LppmKind::kReleaseHiding;
  } else if (name == "rounding") {
    spec.kind = LppmKind::kRounding;
  } else {
    throw ConfigError("lppm entry needs a known 'name' or a 'preset'");
  }
  spec.l = get_or(j, "l", 0.0);
  spec.r = get_or(j, "r", 50.0);
  spec.z = get_or(j, "z", 60.0);
  spec.keep_fraction = get_or(j, "keep_fraction", 0.6);
  spec.x = get_or(j, "x", 60.0);
  spec.decimals = get_or(j, "decimals", 2);
  spec.train_fraction = get_or(j, "train_fraction", 0.8);
  if (spec.kind == LppmKind::kRounding &&
      (spec.decimals < 2 || spec.decimals > 4)) {
    throw ConfigError("rounding decimals must be 2, 3 or 4");
  }
  if (spec.kind == LppmKind::kRandomHiding &&
      (!(spec.keep_fraction > 0.0) || spec.keep_fraction > 1.0)) {
    throw ConfigError("random_hiding keep_fraction must be in (0,1]");
  }
  return spec;
}

}  // namespace cfgdetail

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
  using cfgdetail::get_or;
  RunConfig cfg;
  cfg.raw = j;
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.workers = get_or<unsigned>(j, "workers", 1);
  cfg.output_dir = get_or<std::string>(j, "output_dir", "out");
  cfg.crop_to_region = get_or(j, "crop_to_region", true);

  if (!j.contains("region")) throw ConfigError("config: region required");
  const auto& r = j.at("region");
  cfg.region = {get_or<std::string>(r, "name", "region"),
                get_or(r, "lat_min", 0.0), get_or(r, "lat_max", 0.0),
                get_or(r, "lon_min", 0.0), get_or(r, "lon_max", 0.0),
                get_or(r, "tz_offset_hours", 0.0)};
  try {
    cfg.region.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (!j.contains("dataset")) throw ConfigError("config: dataset required");
  const auto& d = j.at("dataset");
  const std::string kind = get_or<std::string>(d, "kind", "synth");
  if (kind == "synth") {
    cfg.dataset.kind = DatasetConfig::Kind::kSynth;
    if (!d.contains("profile")) throw ConfigError("synth dataset: profile required");
    cfg.dataset.profile = cfgdetail::parse_profile(d.at("profile"));
    cfg.dataset.users = get_or<std::size_t>(d.at("profile"), "users", 10);
    cfg.dataset.spread_m = get_or(d.at("profile"), "spread_m", 0.0);
  } else if (kind == "safecast" || kind == "radiocells") {
    cfg.dataset.kind = kind == "safecast" ? DatasetConfig::Kind::kSafecast
                                          : DatasetConfig::Kind::kRadiocells;
    cfg.dataset.path = get_or<std::string>(d, "path", "");
    if (cfg.dataset.path.empty()) {
      throw ConfigError("dataset: path required for " + kind);
    }
    cfg.dataset.exclusion_list = get_or<std::string>(d, "exclusion_list", "");
  } else {
    throw ConfigError("dataset kind must be synth, safecast or radiocells");
  }

  if (j.contains("filters")) {
    const auto& f = j.at("filters");
    cfg.filters.enabled = get_or(f, "enabled", false);
    cfg.filters.min_points = get_or<std::size_t>(f, "min_points", 100);
    cfg.filters.max_speed_kmh = get_or(f, "max_speed_kmh", 200.0);
  }

  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    if (a.contains("schedule")) {
      cfg.attack.schedule.clear();
      for (const auto& entry : a.at("schedule")) {
        if (!entry.is_array() || entry.size() != 2) {
          throw ConfigError("attack schedule entries must be [min_pts, eps_m]");
        }
        cfg.attack.schedule.push_back(
            {entry[0].get<std::size_t>(), entry[1].get<double>()});
      }
    } else if (a.contains("preset")) {
      try {
        cfg.attack.schedule = schedule_preset(a.at("preset").get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    cfg.attack.top_k = get_or<std::size_t>(a, "top_k", 5);
    cfg.attack.temporal_filter = get_or(a, "temporal_filter", false);
    cfg.attack.work_hours_only = get_or(a, "work_hours_only", false);
    cfg.attack.cell_size_m = get_or(a, "cell_size_m", 10.0);
    if (!(cfg.attack.cell_size_m > 0.0)) {
      throw ConfigError("attack cell_size_m must be positive");
    }
  }

  if (!j.contains("lppms") || !j.at("lppms").is_array()) {
    throw ConfigError("config: lppms array required");
  }
  for (const auto& entry : j.at("lppms")) {
    LppmEntry e;
    e.spec = cfgdetail::parse_lppm_spec(entry);
    e.label = get_or<std::string>(entry, "label", e.spec.label());
    if (entry.contains("seed")) e.seed = entry.at("seed").get<std::uint64_t>();
    cfg.lppms.push_back(std::move(e));
  }

  if (j.contains("poi")) {
    const auto& p = j.at("poi");
    const std::string pk = get_or<std::string>(p, "kind", "none");
    if (pk == "none") {
      cfg.poi.kind = PoiConfig::Kind::kNone;
    } else if (pk == "offline") {
      cfg.poi.kind = PoiConfig::Kind::kOffline;
      cfg.poi.path = get_or<std::string>(p, "path", "");
      if (cfg.poi.path.empty()) throw ConfigError("offline poi: path required");
    } else if (pk == "overpass") {
      cfg.poi.kind = PoiConfig::Kind::kOverpass;
      cfg.poi.endpoint = get_or<std::string>(p, "endpoint", cfg.poi.endpoint);
      cfg.poi.cache_dir = get_or<std::string>(p, "cache_dir", "");
      cfg.poi.timeout_s = get_or(p, "timeout_s", 30.0);
    } else {
      throw ConfigError("poi kind must be none, offline or overpass");
    }
  }

  if (j.contains("utility")) {
    const auto& u = j.at("utility");
    cfg.utility.radiation_map = get_or(u, "radiation_map", true);
    cfg.utility.grid_resolution = get_or<std::uint32_t>(u, "grid_resolution", 1500);
    cfg.utility.window_days = get_or(u, "window_days", 270.0);
    cfg.utility.hotspot_threshold_cpm = get_or(u, "hotspot_threshold_cpm", 100.0);
    cfg.utility.antennas = get_or(u, "antennas", false);
    if (cfg.utility.grid_resolution == 0) {
      throw ConfigError("utility grid_resolution must be positive");
    }
  }

  if (j.contains("colocation")) {
    const auto& c = j.at("colocation");
    cfg.colocation.enabled = get_or(c, "enabled", false);
    cfg.colocation.d_max_m = get_or(c, "d_max_m", 50.0);
    cfg.colocation.t_max_s = get_or(c, "t_max_s", 300.0);
  }
  return cfg;
}

inline RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Run manifest.

struct StageRecord {
  std::string name;
  std::int64_t wall_ms = 0;
  nlohmann::json tallies = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();  // path -> digest
};

struct RunManifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  bool valid = false;
  std::string failed_stage;
  std::vector<StageRecord> stages;

  nlohmann::json to_json() const {
    nlohmann::json j{{"config_hash", config_hash},
                     {"tool_version", tool_version},
                     {"valid", valid}};
    if (!failed_stage.empty()) j["failed_stage"] = failed_stage;
    j["stages"] = nlohmann::json::array();
    for (const StageRecord& s : stages) {
      j["stages"].push_back({{"name", s.name},
                             {"wall_ms", s.wall_ms},
                             {"tallies", s.tallies},
                             {"outputs", s.outputs}});
    }
    return j;
  }
};

namespace rundetail {

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a64(buf.str()));
}

inline std::string config_hash(const nlohmann::json& raw) {
  return hex64(fnv1a64(raw.dump()));
}

class StageTimer {
 public:
  StageTimer(RunManifest& manifest, std::string name)
      : manifest_(manifest), start_(std::chrono::steady_clock::now()) {
    record_.name = std::move(name);
  }
  nlohmann::json& tallies() { return record_.tallies; }
  void add_output(const std::filesystem::path& path) {
    record_.outputs[path.filename().string()] = file_digest(path);
  }
  void finish() {
    record_.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start_)
                          .count();
    manifest_.stages.push_back(record_);
  }

 private:
  RunManifest& manifest_;
  StageRecord record_;
  std::chrono::steady_clock::time_point start_;
};

inline std::optional<double> round_metric(const std::optional<double>& v) {
  return v;
}

inline std::string opt_str(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string();
}

}  // namespace rundetail

// ---------------------------------------------------------------------------
// Pipeline stages, reused by the CLI subcommands.

struct IngestOutcome {
  std::vector<UserTrace> traces;
  nlohmann::json tallies = nlohmann::json::object();
};

/// Loads (or generates) the dataset, applies the exclusion list, region crop
/// and consistency filters. Synthetic data is round-tripped through the
/// Safecast CSV schema so the parser is always on the execution path.
inline IngestOutcome load_dataset(const RunConfig& cfg,
                                  const std::filesystem::path& output_dir) {
  IngestOutcome out;
  std::size_t malformed = 0, excluded = 0;

  switch (cfg.dataset.kind) {
    case DatasetConfig::Kind::kSynth: {
      SynthProfile profile = cfg.dataset.profile;
      profile.seed = cfg.seed;
      SynthCohort cohort = generate_cohort(cfg.dataset.users, profile, cfg.seed,
                                           cfg.dataset.spread_m);
      const std::filesystem::path csv_path = output_dir / "synthetic_data.csv";
      {
        std::ofstream csv_out(csv_path);
        write_safecast(csv_out, cohort.traces);
      }
      nlohmann::json truth = nlohmann::json::object();
      for (const GroundTruth& g : cohort.truth) {
        nlohmann::json anchors = nlohmann::json::array();
        for (const GeoPoint& a : g.anchors) {
          anchors.push_back({{"lat", a.lat}, {"lon", a.lon}});
        }
        truth[g.user_id] = anchors;
      }
      std::ofstream truth_out(output_dir / "ground_truth.json");
      truth_out << truth.dump(2) << "\n";

      std::ifstream csv_in(csv_path);
      ParseResult parsed = parse_safecast(csv_in, cfg.region.tz_offset_hours);
      malformed = parsed.malformed_rows;
      out.traces = std::move(parsed.traces);
      break;
    }
    case DatasetConfig::Kind::kSafecast: {
      std::set<std::string> exclusion;
      if (!cfg.dataset.exclusion_list.empty()) {
        std::ifstream ex(cfg.dataset.exclusion_list);
        if (!ex) throw DataError("cannot open exclusion list: " + cfg.dataset.exclusion_list);
        exclusion = parse_exclusion_list(ex);
      }
      std::ifstream in(cfg.dataset.path);
      if (!in) throw DataError("cannot open dataset: " + cfg.dataset.path);
      ParseResult parsed =
          parse_safecast(in, cfg.region.tz_offset_hours, exclusion);
      malformed = parsed.malformed_rows;
      excluded = parsed.excluded_rows;
      out.traces = std::move(parsed.traces);
      break;
    }
    case DatasetConfig::Kind::kRadiocells: {
      std::ifstream in(cfg.dataset.path);
      if (!in) throw DataError("cannot open dataset: " + cfg.dataset.path);
      RadiocellsParseResult parsed = parse_radiocells(in);
      malformed = parsed.malformed_rows;
      DeriveResult derived = derive_radiocells_users(std::move(parsed.records));
      out.tallies["unassignable_records"] = derived.unassignable;
      out.traces = std::move(derived.traces);
      break;
    }
  }

  std::size_t out_of_region = 0;
  if (cfg.crop_to_region) {
    std::vector<UserTrace> cropped;
    for (UserTrace& t : out.traces) {
      UserTrace kept;
      kept.user_id = t.user_id;
      for (Measurement& m : t.measurements) {
        if (cfg.region.contains(m.point)) {
          kept.measurements.push_back(std::move(m));
        } else {
          ++out_of_region;
        }
      }
      if (!kept.empty()) cropped.push_back(std::move(kept));
    }
    out.traces = std::move(cropped);
  }

  out.tallies["malformed_rows"] = malformed;
  out.tallies["excluded_rows"] = excluded;
  out.tallies["out_of_region_points"] = out_of_region;

  if (cfg.filters.enabled) {
    FilterResult filtered = filter_users(std::move(out.traces),
                                         cfg.filters.min_points,
                                         cfg.filters.max_speed_kmh);
    out.tallies["dropped_too_few_points"] = filtered.dropped_too_few_points;
    out.tallies["dropped_inconsistent_speed"] = filtered.dropped_inconsistent_speed;
    out.traces = std::move(filtered.traces);
  }
  out.tallies["users"] = out.traces.size();
  std::size_t total = 0;
  for (const UserTrace& t : out.traces) total += t.size();
  out.tallies["measurements"] = total;
  return out;
}

/// Runs the configured attack on one trace (after any work-hour restriction).
/// `rounding_decimals`, when set, routes 2- and 3-decimal traces through the
/// square heuristic instead of DBSCAN.
inline AttackResult run_attack(const UserTrace& trace, const AttackConfig& cfg,
                               const RasterSpec& raster, double tz_offset_hours,
                               std::optional<int> rounding_decimals = std::nullopt) {
  const UserTrace* subject = &trace;
  UserTrace windowed;
  if (cfg.work_hours_only) {
    windowed = split_work_hours(trace, tz_offset_hours);
    subject = &windowed;
  }
  AttackResult result =
      rounding_decimals && *rounding_decimals <= 3
          ? rounding_adversary_areas(*subject, *rounding_decimals, raster,
                                     cfg.schedule, cfg.top_k)
          : infer_areas(*subject, cfg.schedule, raster, cfg.top_k);
  if (cfg.temporal_filter && !result.used_square_adversary) {
    result = temporal_filter(result, *subject, tz_offset_hours);
  }
  return result;
}

inline std::unique_ptr<PoiProvider> make_poi_provider(
    const RunConfig& cfg, const std::filesystem::path& output_dir,
    OverpassPoiProvider::FetchFn fetch) {
  switch (cfg.poi.kind) {
    case PoiConfig::Kind::kNone:
      return nullptr;
    case PoiConfig::Kind::kOffline:
      return std::make_unique<OfflinePoiProvider>(
          OfflinePoiProvider::from_file(cfg.poi.path));
    case PoiConfig::Kind::kOverpass: {
      std::filesystem::path cache = cfg.poi.cache_dir;
      if (cache.empty()) {
        if (const char* env = std::getenv("MCSPRIV_CACHE_DIR")) {
          cache = env;
        } else {
          cache = output_dir / "overpass_cache";
        }
      }
      return std::make_unique<OverpassPoiProvider>(cfg.poi.endpoint, cache,
                                                   std::move(fetch));
    }
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// The full §-four-step protocol: ingest, baseline inference, per-LPPM
// application + re-inference, privacy gain, utility loss, reports.

struct RunResult {
  RunManifest manifest;
  std::filesystem::path output_dir;
};

namespace rundetail {

struct PerUserEval {
  bool evaluated = false;
  bool vulnerable_before = false;
  bool vulnerable_after = false;
  PrivacyGain spatial;
  std::optional<PrivacyGain> poi;
  double before_km2 = 0.0;
  double after_km2 = 0.0;
  int schedule_before = -1;
  int schedule_after = -1;
  std::size_t after_clusters = 0;
  bool square_adversary = false;
  DistanceErrorStats distance;
  std::size_t distinct_reported = 0;
  std::size_t reported_points = 0;
};

inline std::size_t distinct_coordinates(const UserTrace& t) {
  std::set<std::pair<double, double>> seen;
  for (const Measurement& m : t.measurements) {
    seen.insert({m.point.lat, m.point.lon});
  }
  return seen.size();
}

inline std::vector<Measurement> region_measurements(
    const std::vector<UserTrace>& traces, const RegionSpec& region,
    const std::vector<std::size_t>& subset) {
  std::vector<Measurement> ms;
  for (std::size_t idx : subset) {
    for (const Measurement& m : traces[idx].measurements) {
      if (region.contains(m.point)) ms.push_back(m);
    }
  }
  return ms;
}

}  // namespace rundetail

inline RunResult run_pipeline(const RunConfig& cfg,
                              OverpassPoiProvider::FetchFn overpass_fetch = nullptr) {
  namespace fs = std::filesystem;
  using rundetail::PerUserEval;
  using rundetail::StageTimer;

  RunResult result;
  result.output_dir = cfg.output_dir;
  fs::create_directories(result.output_dir);
  RunManifest& manifest = result.manifest;
  manifest.config_hash = rundetail::config_hash(cfg.raw);

  const auto write_manifest = [&] {
    std::ofstream out(result.output_dir / "manifest.json");
    out << manifest.to_json().dump(2) << "\n";
  };

  try {
    // -- Stage: ingest ------------------------------------------------------
    StageTimer ingest_stage(manifest, "ingest");
    IngestOutcome ingest = load_dataset(cfg, result.output_dir);
    ingest_stage.tallies() = ingest.tallies;
    if (cfg.dataset.kind == DatasetConfig::Kind::kSynth) {
      ingest_stage.add_output(result.output_dir / "synthetic_data.csv");
      ingest_stage.add_output(result.output_dir / "ground_truth.json");
    }
    ingest_stage.finish();
    const std::vector<UserTrace>& traces = ingest.traces;
    const double tz = cfg.region.tz_offset_hours;
    const RasterSpec raster(cfg.region, cfg.attack.cell_size_m);

    std::unique_ptr<PoiProvider> poi_provider =
        make_poi_provider(cfg, result.output_dir, overpass_fetch);

    // -- Stage: baseline attack --------------------------------------------
    StageTimer baseline_stage(manifest, "baseline_attack");
    std::vector<AttackResult> baseline(traces.size(), AttackResult(raster));
    std::vector<std::vector<PoiRecord>> baseline_pois(traces.size());
    parallel_for(traces.size(), cfg.workers, [&](std::size_t u) {
      baseline[u] = run_attack(traces[u], cfg.attack, raster, tz);
      if (poi_provider && baseline[u].vulnerable()) {
        baseline_pois[u] = query_pois(baseline[u].area, *poi_provider);
      }
    });
    std::size_t vulnerable_baseline = 0;
    for (const AttackResult& a : baseline) {
      vulnerable_baseline += a.vulnerable() ? 1 : 0;
    }
    baseline_stage.tallies()["vulnerable_users"] = vulnerable_baseline;
    baseline_stage.finish();

    // -- Per-LPPM evaluation -------------------------------------------------
    std::ostringstream gains_csv;
    gains_csv << "lppm,user_id,volume_bin,metric,tp,fp,fn,precision,recall\n";
    std::ostringstream areas_csv;
    areas_csv << "lppm,user_id,pass,vulnerable,clusters,area_km2,schedule_index,"
                 "square_adversary\n";
    std::ostringstream vuln_csv;
    vuln_csv << "lppm,users_total,vulnerable_before,vulnerable_after,reduction,"
                "degenerate\n";
    std::ostringstream dist_csv;
    dist_csv << "lppm,user_id,points,hidden,min_m,q1_m,median_m,q3_m,max_m,mean_m\n";
    nlohmann::json summary = nlohmann::json::object();
    summary["tool_version"] = kToolVersion;
    summary["lppms"] = nlohmann::json::object();

    std::vector<std::size_t> all_users(traces.size());
    for (std::size_t i = 0; i < all_users.size(); ++i) all_users[i] = i;

    for (const LppmEntry& entry : cfg.lppms) {
      StageTimer lppm_stage(manifest, "lppm:" + entry.label);
      const std::uint64_t lppm_seed =
          entry.seed ? *entry.seed : derive_seed(cfg.seed, entry.label);

      // GeoInd-OR: deterministic train/eval split over sorted user ids; the
      // evaluated user's own data never enters the prior.
      std::vector<std::size_t> eval_users = all_users;
      std::unique_ptr<Prior> prior;
      if (entry.spec.kind == LppmKind::kGeoIndOr) {
        if (traces.size() < 2) {
          throw ConfigError("geoind_or needs at least 2 users for the prior split");
        }
        auto n_train = static_cast<std::size_t>(
            std::llround(entry.spec.train_fraction * static_cast<double>(traces.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, traces.size() - 1);
        std::vector<UserTrace> training(traces.begin(),
                                        traces.begin() + static_cast<std::ptrdiff_t>(n_train));
        prior = std::make_unique<Prior>(build_prior(training));
        eval_users.assign(all_users.begin() + static_cast<std::ptrdiff_t>(n_train),
                          all_users.end());
        lppm_stage.tallies()["prior_users"] = n_train;
        lppm_stage.tallies()["prior_cells"] = prior->cells().size();
      }

      std::vector<PerUserEval> evals(traces.size());
      parallel_for(eval_users.size(), cfg.workers, [&](std::size_t i) {
        const std::size_t u = eval_users[i];
        const UserTrace& original = traces[u];
        PerUserEval& ev = evals[u];
        ev.evaluated = true;

        const std::uint64_t user_seed = derive_seed(lppm_seed, original.user_id);
        LppmOutcome outcome =
            apply_lppm(original, entry.spec, user_seed, tz, prior.get());

        std::optional<int> rounding;
        if (entry.spec.kind == LppmKind::kRounding) rounding = entry.spec.decimals;
        const AttackResult after =
            run_attack(outcome.trace, cfg.attack, raster, tz, rounding);

        ev.vulnerable_before = baseline[u].vulnerable();
        ev.vulnerable_after = after.vulnerable();
        ev.spatial = spatial_gain(baseline[u].area, after.area);
        ev.before_km2 = baseline[u].area.area_km2();
        ev.after_km2 = after.area.area_km2();
        ev.schedule_before = baseline[u].schedule_index;
        ev.schedule_after = after.schedule_index;
        ev.after_clusters = after.clusters.size();
        ev.square_adversary = after.used_square_adversary;
        if (poi_provider) {
          const std::vector<PoiRecord> after_pois =
              after.vulnerable() ? query_pois(after.area, *poi_provider)
                                 : std::vector<PoiRecord>{};
          ev.poi = poi_gain(baseline_pois[u], after_pois);
        }
        ev.distance = outcome.kept
                          ? haversine_error_stats(original, outcome.trace, *outcome.kept)
                          : haversine_error_stats(original, outcome.trace);
        ev.distinct_reported = rundetail::distinct_coordinates(outcome.trace);
        ev.reported_points = outcome.trace.size();
      });

      // Gain and distance rows, in user order.
      std::vector<bool> vuln_before, vuln_after;
      for (std::size_t u : eval_users) {
        const PerUserEval& ev = evals[u];
        const UserTrace& original = traces[u];
        const std::string bin = volume_bin(original.size());
        vuln_before.push_back(ev.vulnerable_before);
        vuln_after.push_back(ev.vulnerable_after);

        gains_csv << entry.label << ',' << csv::quote(original.user_id) << ','
                  << bin << ",spatial," << csv::format_double(ev.spatial.tp)
                  << ',' << csv::format_double(ev.spatial.fp) << ','
                  << csv::format_double(ev.spatial.fn) << ','
                  << rundetail::opt_str(ev.spatial.precision()) << ','
                  << rundetail::opt_str(ev.spatial.recall()) << '\n';
        if (ev.poi) {
          gains_csv << entry.label << ',' << csv::quote(original.user_id) << ','
                    << bin << ",poi," << csv::format_double(ev.poi->tp) << ','
                    << csv::format_double(ev.poi->fp) << ','
                    << csv::format_double(ev.poi->fn) << ','
                    << rundetail::opt_str(ev.poi->precision()) << ','
                    << rundetail::opt_str(ev.poi->recall()) << '\n';
        }
        areas_csv << entry.label << ',' << csv::quote(original.user_id)
                  << ",before," << (ev.vulnerable_before ? 1 : 0) << ','
                  << baseline[u].clusters.size() << ','
                  << csv::format_double(ev.before_km2) << ','
                  << ev.schedule_before << ",0\n";
        areas_csv << entry.label << ',' << csv::quote(original.user_id)
                  << ",after," << (ev.vulnerable_after ? 1 : 0) << ','
                  << ev.after_clusters << ','
                  << csv::format_double(ev.after_km2) << ',' << ev.schedule_after
                  << ',' << (ev.square_adversary ? 1 : 0) << '\n';

        const SummaryStats& ds = ev.distance.summary;
        dist_csv << entry.label << ',' << csv::quote(original.user_id) << ','
                 << ds.count << ',' << ev.distance.hidden_points << ','
                 << csv::format_double(ds.min) << ',' << csv::format_double(ds.q1)
                 << ',' << csv::format_double(ds.median) << ','
                 << csv::format_double(ds.q3) << ',' << csv::format_double(ds.max)
                 << ',' << csv::format_double(ds.mean) << '\n';
      }

      const VulnerabilityStats vuln = vulnerability_stats(vuln_before, vuln_after);
      vuln_csv << entry.label << ',' << vuln.users_total << ','
               << vuln.vulnerable_before << ',' << vuln.vulnerable_after << ','
               << csv::format_double(vuln.reduction) << ','
               << (vuln.degenerate ? 1 : 0) << '\n';

      nlohmann::json lppm_summary{
          {"label", entry.label},
          {"seed", lppm_seed},
          {"users_total", vuln.users_total},
          {"vulnerable_before", vuln.vulnerable_before},
          {"vulnerable_after", vuln.vulnerable_after},
          {"reduction", vuln.reduction},
          {"degenerate", vuln.degenerate}};

      // Parameters, echoed verbatim into the manifest and summary.
      nlohmann::json params{{"kind", entry.spec.label()}};
      switch (entry.spec.kind) {
        case LppmKind::kGeoInd:
        case LppmKind::kGeoIndOr:
          params["l"] = entry.spec.privacy_ratio();
          params["r"] = entry.spec.r;
          params["epsilon"] = entry.spec.geoind().epsilon();
          if (entry.spec.kind == LppmKind::kGeoIndOr) {
            params["train_fraction"] = entry.spec.train_fraction;
          }
          break;
        case LppmKind::kReleaseGeoInd:
          params["l"] = entry.spec.privacy_ratio();
          params["r"] = entry.spec.r;
          params["epsilon"] = entry.spec.geoind().epsilon();
          params["z"] = entry.spec.z;
          break;
        case LppmKind::kRandomHiding:
          params["keep_fraction"] = entry.spec.keep_fraction;
          break;
        case LppmKind::kReleaseHiding:
          params["x"] = entry.spec.x;
          break;
        case LppmKind::kRounding:
          params["decimals"] = entry.spec.decimals;
          break;
        case LppmKind::kIdentity:
          break;
      }
      lppm_summary["params"] = params;
      lppm_stage.tallies()["params"] = params;
      lppm_stage.tallies()["seed"] = lppm_seed;

      // Utility: evaluated over the same users the privacy metrics cover.
      // Mechanisms are re-applied with the same derived seeds; traces are
      // cheap at desk scale and this keeps attack and utility decoupled.
      if (cfg.utility.radiation_map || cfg.utility.antennas) {
        const std::vector<Measurement> before_ms =
            rundetail::region_measurements(traces, cfg.region, eval_users);
        std::vector<UserTrace> after_traces;
        after_traces.reserve(eval_users.size());
        for (std::size_t u : eval_users) {
          const std::uint64_t user_seed = derive_seed(lppm_seed, traces[u].user_id);
          after_traces.push_back(
              apply_lppm(traces[u], entry.spec, user_seed, tz, prior.get()).trace);
        }
        std::vector<std::size_t> all_after(after_traces.size());
        for (std::size_t i = 0; i < all_after.size(); ++i) all_after[i] = i;
        const std::vector<Measurement> after_ms =
            rundetail::region_measurements(after_traces, cfg.region, all_after);

        if (cfg.utility.radiation_map && !before_ms.empty() && !after_ms.empty()) {
          const std::int64_t anchor = max_timestamp(before_ms);
          const auto avg_before =
              average_recent(before_ms, anchor, cfg.utility.window_days);
          const auto avg_after =
              average_recent(after_ms, anchor, cfg.utility.window_days);
          const RadiationGrid grid_before = build_radiation_map(
              avg_before, cfg.region, cfg.utility.grid_resolution, cfg.workers);
          const RadiationGrid grid_after = build_radiation_map(
              avg_after, cfg.region, cfg.utility.grid_resolution, cfg.workers);
          const MapDiff diff = map_diff(grid_before, grid_after);
          const TransitionMatrix tm = transition_matrix(grid_before, grid_after);

          lppm_summary["map_diff"] = {
              {"count", diff.summary.count},   {"mean", diff.summary.mean},
              {"min", diff.summary.min},       {"q1", diff.summary.q1},
              {"median", diff.summary.median}, {"q3", diff.summary.q3},
              {"max", diff.summary.max}};

          std::ostringstream tm_csv;
          tm_csv << "before_category,count_1,count_2,count_3,count_4,count_5,"
                    "pct_1,pct_2,pct_3,pct_4,pct_5,row_total\n";
          for (int b = 0; b < 5; ++b) {
            tm_csv << (b + 1);
            for (int a = 0; a < 5; ++a) tm_csv << ',' << tm.counts[b][a];
            for (int a = 0; a < 5; ++a) {
              tm_csv << ',' << csv::format_double(tm.row_percent[b][a]);
            }
            tm_csv << ',' << tm.row_totals[b] << '\n';
          }
          const fs::path tm_path =
              result.output_dir / ("transition_" + entry.label + ".csv");
          std::ofstream(tm_path) << tm_csv.str();
          lppm_stage.add_output(tm_path);

          const auto hot_before =
              detect_hotspots(avg_before, cfg.utility.hotspot_threshold_cpm);
          const auto hot_after =
              detect_hotspots(avg_after, cfg.utility.hotspot_threshold_cpm);
          std::size_t overlap = 0;
          for (const GeoPoint& h : hot_after) {
            if (std::binary_search(hot_before.begin(), hot_before.end(), h)) {
              ++overlap;
            }
          }
          lppm_summary["hotspots"] = {{"before", hot_before.size()},
                                      {"after", hot_after.size()},
                                      {"overlap", overlap}};
          std::ostringstream hs_csv;
          hs_csv << "pass,latitude,longitude\n";
          for (const GeoPoint& h : hot_before) {
            hs_csv << "before," << csv::format_double(h.lat) << ','
                   << csv::format_double(h.lon) << '\n';
          }
          for (const GeoPoint& h : hot_after) {
            hs_csv << "after," << csv::format_double(h.lat) << ','
                   << csv::format_double(h.lon) << '\n';
          }
          const fs::path hs_path =
              result.output_dir / ("hotspots_" + entry.label + ".csv");
          std::ofstream(hs_path) << hs_csv.str();
          lppm_stage.add_output(hs_path);
        } else if (cfg.utility.radiation_map) {
          lppm_summary["map_diff"] = nullptr;
        }

        if (cfg.utility.antennas) {
          const auto before_est = locate_antennas(before_ms);
          const auto after_est = locate_antennas(after_ms);
          const AntennaErrorReport rep = antenna_error(before_est, after_est);
          lppm_summary["antennas"] = {{"before", before_est.size()},
                                      {"after", after_est.size()},
                                      {"lost", rep.lost},
                                      {"spurious", rep.spurious},
                                      {"median_error_m", rep.summary.median},
                                      {"max_error_m", rep.summary.max}};
          std::ostringstream ant_csv;
          ant_csv << "antenna_id,error_m\n";
          for (const auto& e : rep.errors) {
            ant_csv << csv::quote(e.antenna_id) << ','
                    << csv::format_double(e.error_m) << '\n';
          }
          const fs::path ant_path =
              result.output_dir / ("antennas_" + entry.label + ".csv");
          std::ofstream(ant_path) << ant_csv.str();
          lppm_stage.add_output(ant_path);
        }
      }

      // Remapping concentrates reports onto popular cells; surface the
      // pollution directly as distinct-coordinate counts.
      std::size_t distinct_before = 0, distinct_after = 0, points_after = 0;
      for (std::size_t u : eval_users) {
        distinct_before += rundetail::distinct_coordinates(traces[u]);
        distinct_after += evals[u].distinct_reported;
        points_after += evals[u].reported_points;
      }
      lppm_summary["reported_coordinates"] = {
          {"distinct_before", distinct_before},
          {"distinct_after", distinct_after},
          {"points_after", points_after}};

      summary["lppms"][entry.label] = lppm_summary;
      lppm_stage.finish();
    }

    // -- Stage: co-location --------------------------------------------------
    if (cfg.colocation.enabled) {
      StageTimer coloc_stage(manifest, "colocation");
      const auto pairs = detect_colocations(traces, cfg.colocation.d_max_m,
                                            cfg.colocation.t_max_s);
      std::ostringstream coloc_csv;
      coloc_csv << "user_a,user_b,events,first_distance_m,first_dt_s\n";
      for (const ColocationPair& p : pairs) {
        coloc_csv << csv::quote(p.user_a) << ',' << csv::quote(p.user_b) << ','
                  << p.events.size() << ','
                  << csv::format_double(p.events.front().distance_m) << ','
                  << p.events.front().dt_s << '\n';
      }
      const fs::path coloc_path = result.output_dir / "colocations.csv";
      std::ofstream(coloc_path) << coloc_csv.str();
      coloc_stage.add_output(coloc_path);
      coloc_stage.tallies()["pairs"] = pairs.size();
      coloc_stage.finish();
    }

    // -- Stage: reports ------------------------------------------------------
    StageTimer report_stage(manifest, "report");
    const auto write_text = [&](const char* name, const std::string& content) {
      const fs::path path = result.output_dir / name;
      std::ofstream(path) << content;
      report_stage.add_output(path);
    };
    write_text("gains.csv", gains_csv.str());
    write_text("areas.csv", areas_csv.str());
    write_text("vulnerability.csv", vuln_csv.str());
    write_text("distance_error.csv", dist_csv.str());
    write_text("summary.json", summary.dump(2) + "\n");
    report_stage.finish();

    manifest.valid = true;
    write_manifest();
  } catch (...) {
    manifest.valid = false;
    if (manifest.failed_stage.empty() && !manifest.stages.empty()) {
      manifest.failed_stage = "after:" + manifest.stages.back().name;
    }
    write_manifest();
    throw;
  }
  return result;
}

}  // namespace mcspriv

#endif  // MCSPRIV_PIPELINE_HPP
