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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "mcspriv/attack.hpp"
#include "mcspriv/ingest.hpp"
#include "mcspriv/lppm.hpp"
#include "mcspriv/metrics.hpp"
#include "mcspriv/pipeline.hpp"
#include "mcspriv/synth.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mcspriv;

// Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

OverpassPoiProvider::FetchFn make_http_fetch(const std::string& endpoint,
                                             double timeout_s) {
  return [endpoint, timeout_s](const std::string& query) -> std::string {
    std::string scheme_host = endpoint;
    std::string path = "/api/interpreter";
    const auto scheme_end = endpoint.find("://");
    if (scheme_end != std::string::npos) {
      const auto path_start = endpoint.find('/', scheme_end + 3);
      if (path_start != std::string::npos) {
        scheme_host = endpoint.substr(0, path_start);
        path = endpoint.substr(path_start);
      }
    }
    httplib::Client client(scheme_host);
    client.set_connection_timeout(static_cast<int>(timeout_s), 0);
    client.set_read_timeout(static_cast<int>(timeout_s), 0);
    auto res = client.Post(path, "data=" + query,
                           "application/x-www-form-urlencoded");
    if (!res) {
      throw NetworkError("overpass request failed: " +
                         httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw NetworkError("overpass returned HTTP " + std::to_string(res->status));
    }
    return res->body;
  };
}

std::vector<UserTrace> read_traces(const std::string& path, double tz) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file: " + path);
  return parse_safecast(in, tz).traces;
}

void write_traces(const std::string& path, const std::vector<UserTrace>& traces) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  write_safecast(out, traces);
}

int cmd_run(const std::string& config_path, const std::string& output_override) {
  RunConfig cfg = RunConfig::load(config_path);
  if (!output_override.empty()) cfg.output_dir = output_override;
  OverpassPoiProvider::FetchFn fetch;
  if (cfg.poi.kind == PoiConfig::Kind::kOverpass) {
    fetch = make_http_fetch(cfg.poi.endpoint, cfg.poi.timeout_s);
  }
  const RunResult result = run_pipeline(cfg, fetch);
  std::cout << "run complete: " << result.output_dir.string() << "\n";
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  RunConfig cfg = RunConfig::load(config_path);
  if (cfg.dataset.kind != DatasetConfig::Kind::kSynth) {
    throw ConfigError("synth subcommand requires a synth dataset in the config");
  }
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  fs::create_directories(cfg.output_dir);
  const IngestOutcome out = load_dataset(cfg, cfg.output_dir);
  std::cout << "wrote " << (fs::path(cfg.output_dir) / "synthetic_data.csv").string()
            << " (" << out.tallies.at("users") << " users, "
            << out.tallies.at("measurements") << " measurements)\n";
  return 0;
}

int cmd_ingest(const std::string& config_path, const std::string& out_dir) {
  RunConfig cfg = RunConfig::load(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  fs::create_directories(cfg.output_dir);
  const IngestOutcome out = load_dataset(cfg, cfg.output_dir);
  write_traces((fs::path(cfg.output_dir) / "traces.csv").string(), out.traces);
  std::ofstream report(fs::path(cfg.output_dir) / "ingest_report.json");
  report << out.tallies.dump(2) << "\n";
  std::cout << "ingested " << out.traces.size() << " users\n";
  return 0;
}

int cmd_protect(const std::string& config_path, const std::string& in_path,
                const std::string& lppm_label, const std::string& out_path) {
  RunConfig cfg = RunConfig::load(config_path);
  const LppmEntry* entry = nullptr;
  for (const LppmEntry& e : cfg.lppms) {
    if (e.label == lppm_label) entry = &e;
  }
  if (entry == nullptr) {
    throw ConfigError("no lppm with label '" + lppm_label + "' in config");
  }
  std::vector<UserTrace> traces = read_traces(in_path, cfg.region.tz_offset_hours);
  std::unique_ptr<Prior> prior;
  if (entry->spec.kind == LppmKind::kGeoIndOr) {
    if (traces.size() < 2) {
      throw ConfigError("geoind_or needs at least 2 users for the prior split");
    }
    auto n_train = static_cast<std::size_t>(std::llround(
        entry->spec.train_fraction * static_cast<double>(traces.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, traces.size() - 1);
    prior = std::make_unique<Prior>(build_prior(
        {traces.begin(), traces.begin() + static_cast<std::ptrdiff_t>(n_train)}));
  }
  const std::uint64_t lppm_seed =
      entry->seed ? *entry->seed : derive_seed(cfg.seed, entry->label);
  std::vector<UserTrace> protected_traces;
  for (const UserTrace& t : traces) {
    protected_traces.push_back(
        apply_lppm(t, entry->spec, derive_seed(lppm_seed, t.user_id),
                   cfg.region.tz_offset_hours, prior.get())
            .trace);
  }
  write_traces(out_path, protected_traces);
  std::cout << "applied " << entry->label << " to " << traces.size()
            << " users -> " << out_path << "\n";
  return 0;
}

int cmd_attack(const std::string& config_path, const std::string& in_path,
               const std::string& out_path, bool colocations) {
  RunConfig cfg = RunConfig::load(config_path);
  const std::vector<UserTrace> traces =
      read_traces(in_path, cfg.region.tz_offset_hours);
  const RasterSpec raster(cfg.region, cfg.attack.cell_size_m);

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot open output file: " + out_path);
  out << "user_id,vulnerable,clusters,area_km2,schedule_index\n";
  for (const UserTrace& t : traces) {
    const AttackResult r =
        run_attack(t, cfg.attack, raster, cfg.region.tz_offset_hours);
    out << csv::quote(t.user_id) << ',' << (r.vulnerable() ? 1 : 0) << ','
        << r.clusters.size() << ',' << csv::format_double(r.area.area_km2())
        << ',' << r.schedule_index << '\n';
  }
  if (colocations) {
    const auto pairs =
        detect_colocations(traces, cfg.colocation.d_max_m, cfg.colocation.t_max_s);
    const fs::path coloc_path =
        fs::path(out_path).parent_path() / "colocations.csv";
    std::ofstream coloc(coloc_path);
    coloc << "user_a,user_b,events\n";
    for (const ColocationPair& p : pairs) {
      coloc << csv::quote(p.user_a) << ',' << csv::quote(p.user_b) << ','
            << p.events.size() << '\n';
    }
    std::cout << "colocations: " << pairs.size() << " pairs -> "
              << coloc_path.string() << "\n";
  }
  std::cout << "attacked " << traces.size() << " users -> " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& before_path,
                 const std::string& after_path, const std::string& label,
                 const std::string& out_path) {
  RunConfig cfg = RunConfig::load(config_path);
  const double tz = cfg.region.tz_offset_hours;
  const std::vector<UserTrace> before = read_traces(before_path, tz);
  const std::vector<UserTrace> after = read_traces(after_path, tz);
  const RasterSpec raster(cfg.region, cfg.attack.cell_size_m);

  std::map<std::string, const UserTrace*> after_by_user;
  for (const UserTrace& t : after) after_by_user[t.user_id] = &t;

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot open output file: " + out_path);
  out << "lppm,user_id,volume_bin,metric,tp,fp,fn,precision,recall\n";
  for (const UserTrace& t : before) {
    const auto it = after_by_user.find(t.user_id);
    if (it == after_by_user.end()) continue;
    const AttackResult rb = run_attack(t, cfg.attack, raster, tz);
    const AttackResult ra = run_attack(*it->second, cfg.attack, raster, tz);
    const PrivacyGain g = spatial_gain(rb.area, ra.area);
    const auto p = g.precision();
    const auto r = g.recall();
    out << label << ',' << csv::quote(t.user_id) << ',' << volume_bin(t.size())
        << ",spatial," << csv::format_double(g.tp) << ','
        << csv::format_double(g.fp) << ',' << csv::format_double(g.fn) << ','
        << (p ? csv::format_double(*p) : "") << ','
        << (r ? csv::format_double(*r) : "") << '\n';
  }
  std::cout << "evaluated " << before.size() << " users -> " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LPPM evaluation for mobile-crowdsourcing traces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config_path, out_dir, in_path, out_path, lppm_label;
  std::string before_path, after_path, label = "lppm";
  bool colocations = false;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration (JSON)")
        ->required();
  };

  CLI::App* run = app.add_subcommand("run", "execute the full evaluation pipeline");
  add_config(run);
  run->add_option("--output-dir", out_dir, "override the configured output directory");

  CLI::App* synth = app.add_subcommand("synth", "generate synthetic traces");
  add_config(synth);
  synth->add_option("--out", out_dir, "output directory");

  CLI::App* ingest = app.add_subcommand("ingest", "parse and normalize a dataset");
  add_config(ingest);
  ingest->add_option("--out", out_dir, "output directory");

  CLI::App* protect = app.add_subcommand("protect", "apply one LPPM to traces");
  add_config(protect);
  protect->add_option("--in", in_path, "input trace CSV")->required();
  protect->add_option("--lppm", lppm_label, "label of an lppm from the config")
      ->required();
  protect->add_option("--out", out_path, "output trace CSV")->required();

  CLI::App* attack = app.add_subcommand("attack", "run the inference attack");
  add_config(attack);
  attack->add_option("--in", in_path, "input trace CSV")->required();
  attack->add_option("--out", out_path, "per-user attack report CSV")->required();
  attack->add_flag("--colocations", colocations, "also detect co-located user pairs");

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "privacy gain between two trace files");
  add_config(evaluate);
  evaluate->add_option("--before", before_path, "original traces CSV")->required();
  evaluate->add_option("--after", after_path, "protected traces CSV")->required();
  evaluate->add_option("--label", label, "lppm label for the report");
  evaluate->add_option("--out", out_path, "gains CSV")->required();

  try {
    app.parse(argc, argv);
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (synth->parsed()) return cmd_synth(config_path, out_dir);
    if (ingest->parsed()) return cmd_ingest(config_path, out_dir);
    if (protect->parsed()) return cmd_protect(config_path, in_path, lppm_label, out_path);
    if (attack->parsed()) return cmd_attack(config_path, in_path, out_path, colocations);
    if (evaluate->parsed()) {
      return cmd_evaluate(config_path, before_path, after_path, label, out_path);
    }
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NetworkError& e) {
    std::cerr << "network error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
