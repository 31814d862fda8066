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

#ifndef MCSPRIV_UTILITY_HPP
#define MCSPRIV_UTILITY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcspriv/geo.hpp"
#include "mcspriv/ingest.hpp"
#include "mcspriv/kdtree.hpp"
#include "mcspriv/parallel.hpp"
#include "mcspriv/region.hpp"
#include "mcspriv/trace.hpp"

namespace mcspriv {

// ---------------------------------------------------------------------------
// Summary statistics for boxplot-style outputs. Quartiles use linear
// interpolation between order statistics at rank (n-1)*p.

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  return s;
}

// ---------------------------------------------------------------------------
// Distance-based (LBS-style) utility.

struct DistanceErrorStats {
  std::vector<double> distances_m;  // one per aligned pair
  SummaryStats summary;
  std::size_t hidden_points = 0;  // original points with no surviving pair
};

/// Per-point haversine error between original and obfuscated locations.
/// Equal-length traces align index-wise.
inline DistanceErrorStats haversine_error_stats(const UserTrace& original,
                                                const UserTrace& obfuscated) {
  if (original.size() != obfuscated.size()) {
    throw std::invalid_argument(
        "haversine_error_stats: length mismatch without an alignment map");
  }
  DistanceErrorStats s;
  s.distances_m.reserve(original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    s.distances_m.push_back(haversine_m(original.measurements[i].point,
                                        obfuscated.measurements[i].point));
  }
  s.summary = summarize(s.distances_m);
  return s;
}

/// Hiding-mechanism alignment: kept[i] is the source index of obfuscated
/// point i. Distances cover released points only; the hidden count is
/// reported alongside.
inline DistanceErrorStats haversine_error_stats(
    const UserTrace& original, const UserTrace& obfuscated,
    const std::vector<std::size_t>& kept) {
  if (obfuscated.size() != kept.size()) {
    throw std::invalid_argument("haversine_error_stats: bad alignment map");
  }
  DistanceErrorStats s;
  s.distances_m.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] >= original.size()) {
      throw std::invalid_argument("haversine_error_stats: alignment out of range");
    }
    s.distances_m.push_back(haversine_m(original.measurements[kept[i]].point,
                                        obfuscated.measurements[i].point));
  }
  s.summary = summarize(s.distances_m);
  s.hidden_points = original.size() - kept.size();
  return s;
}

// ---------------------------------------------------------------------------
// Safecast radiation-map pipeline.

struct AveragedPoint {
  GeoPoint point;
  double value = 0.0;  // cpm
  std::size_t sample_count = 0;
};

/// Mean value per exact coordinate over the window [anchor - window, anchor]
/// (closed on both ends). Output sorted by (lat, lon).
inline std::vector<AveragedPoint> average_recent(
    const std::vector<Measurement>& measurements, std::int64_t anchor_t,
    double window_days = 270.0) {
  const std::int64_t window_s =
      static_cast<std::int64_t>(std::llround(window_days * 86400.0));
  std::map<std::pair<double, double>, std::pair<double, std::size_t>> cells;
  for (const Measurement& m : measurements) {
    if (m.t < anchor_t - window_s || m.t > anchor_t) continue;
    auto& [sum, count] = cells[{m.point.lat, m.point.lon}];
    sum += m.value;
    ++count;
  }
  std::vector<AveragedPoint> out;
  out.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    out.push_back({{key.first, key.second},
                   acc.first / static_cast<double>(acc.second),
                   acc.second});
  }
  return out;
}

inline std::int64_t max_timestamp(const std::vector<Measurement>& measurements) {
  std::int64_t anchor = std::numeric_limits<std::int64_t>::min();
  for (const Measurement& m : measurements) anchor = std::max(anchor, m.t);
  return anchor;
}

/// The interactive radiation map: a resolution x resolution grid over the
/// region (uniform in degrees, cell-center sampling), each grid point taking
/// the value of its nearest averaged measurement.
struct RadiationGrid {
  RegionSpec region;
  std::uint32_t resolution = 1500;
  std::vector<float> values;  // row-major, rows over latitude from lat_min

  std::size_t index(std::size_t row, std::size_t col) const {
    return row * resolution + col;
  }
  GeoPoint grid_point(std::size_t row, std::size_t col) const {
    const double dlat = (region.lat_max - region.lat_min) / resolution;
    const double dlon = (region.lon_max - region.lon_min) / resolution;
    return {region.lat_min + (row + 0.5) * dlat,
            region.lon_min + (col + 0.5) * dlon};
  }
};

/// Nearest-neighbor interpolation of the averaged points onto the grid.
/// Distances are planar in the region's local frame; exact distance ties
/// resolve to the lexicographically smaller (lat, lon) source.
inline RadiationGrid build_radiation_map(std::vector<AveragedPoint> sources,
                                         const RegionSpec& region,
                                         std::uint32_t resolution = 1500,
                                         unsigned workers = 1) {
  region.validate();
  if (sources.empty()) {
    throw std::invalid_argument("build_radiation_map: no measurements in region");
  }
  std::sort(sources.begin(), sources.end(),
            [](const AveragedPoint& a, const AveragedPoint& b) {
              return a.point < b.point;
            });
  const LocalFrame frame(region.center());
  std::vector<std::array<double, 2>> coords;
  coords.reserve(sources.size());
  for (const AveragedPoint& s : sources) {
    const PlanarPoint p = frame.to_local(s.point);
    coords.push_back({p.east, p.north});
  }
  const KdTree<2> tree(std::move(coords));

  RadiationGrid grid{region, resolution, {}};
  grid.values.assign(static_cast<std::size_t>(resolution) * resolution, 0.0f);
  parallel_for(resolution, workers, [&](std::size_t row) {
    for (std::size_t col = 0; col < resolution; ++col) {
      const PlanarPoint q = frame.to_local(grid.grid_point(row, col));
      const std::size_t nearest = tree.nearest({q.east, q.north});
      grid.values[grid.index(row, col)] =
          static_cast<float>(sources[nearest].value);
    }
  });
  return grid;
}

struct MapDiff {
  std::vector<float> abs_diff;  // per grid point
  SummaryStats summary;
};

/// Absolute cpm difference per grid point.
inline MapDiff map_diff(const RadiationGrid& a, const RadiationGrid& b) {
  if (!(a.region == b.region) || a.resolution != b.resolution) {
    throw std::invalid_argument("map_diff: grids cover different regions");
  }
  MapDiff d;
  d.abs_diff.reserve(a.values.size());
  std::vector<double> as_double;
  as_double.reserve(a.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const float v = std::abs(a.values[i] - b.values[i]);
    d.abs_diff.push_back(v);
    as_double.push_back(v);
  }
  d.summary = summarize(std::move(as_double));
  return d;
}

/// Averaged coordinates with value strictly above the threshold, found before
/// interpolation so that the map-building step cannot move or erase them.
inline std::vector<GeoPoint> detect_hotspots(
    const std::vector<AveragedPoint>& averaged, double threshold_cpm = 100.0) {
  std::vector<GeoPoint> out;
  for (const AveragedPoint& p : averaged) {
    if (p.value > threshold_cpm) out.push_back(p.point);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Danger categories (Geiger-counter safety scale).
//   1: 0-50 cpm   2: 51-99   3: >100   4: >1000   5: >2000
// The published scale leaves (99, 100] unnamed; category 2 covers (50, 100]
// so that every non-negative value maps somewhere.

inline int categorize_cpm(double cpm) {
  if (cpm < 0.0 || !std::isfinite(cpm)) {
    throw std::invalid_argument("categorize_cpm: negative or non-finite cpm");
  }
  if (cpm > 2000.0) return 5;
  if (cpm > 1000.0) return 4;
  if (cpm > 100.0) return 3;
  if (cpm > 50.0) return 2;
  return 1;
}

struct TransitionMatrix {
  std::array<std::array<std::size_t, 5>, 5> counts{};   // [before][after]
  std::array<std::array<double, 5>, 5> row_percent{};   // rows sum to 100
  std::array<std::size_t, 5> row_totals{};
};

/// Category-change contingency between two maps of the same region.
inline TransitionMatrix transition_matrix(const RadiationGrid& before,
                                          const RadiationGrid& after) {
  if (!(before.region == after.region) || before.resolution != after.resolution) {
    throw std::invalid_argument("transition_matrix: grids cover different regions");
  }
  TransitionMatrix m;
  for (std::size_t i = 0; i < before.values.size(); ++i) {
    const int b = categorize_cpm(before.values[i]) - 1;
    const int a = categorize_cpm(after.values[i]) - 1;
    ++m.counts[b][a];
    ++m.row_totals[b];
  }
  for (int b = 0; b < 5; ++b) {
    if (m.row_totals[b] == 0) continue;
    for (int a = 0; a < 5; ++a) {
      m.row_percent[b][a] = 100.0 * static_cast<double>(m.counts[b][a]) /
                            static_cast<double>(m.row_totals[b]);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Radiocells antenna localization.

struct AntennaEstimate {
  std::string antenna_id;
  GeoPoint point;  // arithmetic mean of measurement latitudes/longitudes
  std::size_t measurement_count = 0;
};

/// Antenna position as the mean of the coordinates of all measurements that
/// reference it (the OpenCellID location function). Measurements without an
/// antenna id are ignored.
inline std::vector<AntennaEstimate> locate_antennas(
    const std::vector<Measurement>& measurements) {
  std::map<std::string, std::pair<GeoPoint, std::size_t>> acc;
  for (const Measurement& m : measurements) {
    const auto it = m.extras.find("antenna_id");
    if (it == m.extras.end() || it->second.empty()) continue;
    auto& [sum, count] = acc[it->second];
    sum.lat += m.point.lat;
    sum.lon += m.point.lon;
    ++count;
  }
  std::vector<AntennaEstimate> out;
  out.reserve(acc.size());
  for (const auto& [id, sc] : acc) {
    out.push_back({id,
                   {sc.first.lat / static_cast<double>(sc.second),
                    sc.first.lon / static_cast<double>(sc.second)},
                   sc.second});
  }
  return out;
}

struct AntennaErrorReport {
  struct Entry {
    std::string antenna_id;
    double error_m = 0.0;
  };
  std::vector<Entry> errors;   // antennas present in both passes
  std::size_t lost = 0;        // present before, absent after
  std::size_t spurious = 0;    // absent before, present after
  SummaryStats summary;
};

inline AntennaErrorReport antenna_error(
    const std::vector<AntennaEstimate>& before,
    const std::vector<AntennaEstimate>& after) {
  std::map<std::string, GeoPoint> after_by_id;
  for (const AntennaEstimate& a : after) after_by_id[a.antenna_id] = a.point;

  AntennaErrorReport report;
  std::vector<double> dists;
  std::set<std::string> matched;
  for (const AntennaEstimate& b : before) {
    const auto it = after_by_id.find(b.antenna_id);
    if (it == after_by_id.end()) {
      ++report.lost;
      continue;
    }
    matched.insert(b.antenna_id);
    const double d = haversine_m(b.point, it->second);
    report.errors.push_back({b.antenna_id, d});
    dists.push_back(d);
  }
  for (const AntennaEstimate& a : after) {
    if (!matched.count(a.antenna_id)) ++report.spurious;
  }
  report.summary = summarize(std::move(dists));
  return report;
}

// ---------------------------------------------------------------------------
// Grid serialization: 16-byte header (magic "MCSG", u32 version, u32
// resolution, u32 reserved) followed by row-major little-endian float32
// values, plus a JSON sidecar carrying the region and provenance.

inline void write_grid(const std::string& path, const RadiationGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_grid: cannot open " + path);
  const char magic[4] = {'M', 'C', 'S', 'G'};
  const std::uint32_t version = 1;
  const std::uint32_t resolution = grid.resolution;
  const std::uint32_t reserved = 0;
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&resolution), 4);
  out.write(reinterpret_cast<const char*>(&reserved), 4);
  out.write(reinterpret_cast<const char*>(grid.values.data()),
            static_cast<std::streamsize>(grid.values.size() * sizeof(float)));
  if (!out) throw DataError("write_grid: short write to " + path);

  nlohmann::json sidecar{
      {"region",
       {{"name", grid.region.name},
        {"lat_min", grid.region.lat_min},
        {"lat_max", grid.region.lat_max},
        {"lon_min", grid.region.lon_min},
        {"lon_max", grid.region.lon_max},
        {"tz_offset_hours", grid.region.tz_offset_hours}}},
      {"resolution", grid.resolution},
      {"value_unit", "cpm"},
      {"layout", "row-major float32 little-endian, rows over latitude"}};
  std::ofstream side(path + ".json");
  side << sidecar.dump(2) << "\n";
}

inline RadiationGrid read_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_grid: cannot open " + path);
  char magic[4];
  std::uint32_t version = 0, resolution = 0, reserved = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&resolution), 4);
  in.read(reinterpret_cast<char*>(&reserved), 4);
  if (!in || std::memcmp(magic, "MCSG", 4) != 0 || version != 1) {
    throw DataError("read_grid: bad header in " + path);
  }
  RadiationGrid grid;
  grid.resolution = resolution;
  grid.values.resize(static_cast<std::size_t>(resolution) * resolution);
  in.read(reinterpret_cast<char*>(grid.values.data()),
          static_cast<std::streamsize>(grid.values.size() * sizeof(float)));
  if (!in) throw DataError("read_grid: truncated values in " + path);

  std::ifstream side(path + ".json");
  if (side) {
    nlohmann::json sidecar = nlohmann::json::parse(side, nullptr, false);
    if (!sidecar.is_discarded() && sidecar.contains("region")) {
      const auto& r = sidecar["region"];
      grid.region = {r.value("name", ""),          r.value("lat_min", 0.0),
                     r.value("lat_max", 0.0),      r.value("lon_min", 0.0),
                     r.value("lon_max", 0.0),      r.value("tz_offset_hours", 0.0)};
    }
  }
  return grid;
}

}  // namespace mcspriv

#endif  // MCSPRIV_UTILITY_HPP
