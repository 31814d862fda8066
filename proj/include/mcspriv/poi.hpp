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

#ifndef MCSPRIV_POI_HPP
#define MCSPRIV_POI_HPP

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcspriv/csv.hpp"
#include "mcspriv/geo.hpp"
#include "mcspriv/ingest.hpp"
#include "mcspriv/raster.hpp"
#include "mcspriv/rng.hpp"

namespace mcspriv {

struct NetworkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PoiRecord {
  std::string id;
  GeoPoint point;
  std::map<std::string, std::string> tags;

  friend bool operator<(const PoiRecord& a, const PoiRecord& b) {
    return a.id < b.id;
  }
  friend bool operator==(const PoiRecord& a, const PoiRecord& b) {
    return a.id == b.id;
  }
};

/// Source of POIs for an area of interest. Implementations must be safe for
/// concurrent reads.
class PoiProvider {
 public:
  virtual ~PoiProvider() = default;
  virtual std::vector<PoiRecord> pois_in_bbox(const GeoPoint& min_corner,
                                              const GeoPoint& max_corner) const = 0;
};

// ---------------------------------------------------------------------------
// Offline provider: CSV (id,latitude,longitude,tags with "k=v;k=v") or a
// GeoJSON FeatureCollection of Point features.

class OfflinePoiProvider : public PoiProvider {
 public:
  explicit OfflinePoiProvider(std::vector<PoiRecord> pois)
      : pois_(std::move(pois)) {}

  static OfflinePoiProvider from_csv(std::istream& in) {
    if (!in) throw DataError("poi csv: unreadable stream");
    std::string line;
    if (!csv::getline(in, line)) throw DataError("poi csv: empty input");
    const auto header = csv::split_line(line);
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < header.size(); ++i) idx[header[i]] = i;
    for (const char* col : {"id", "latitude", "longitude"}) {
      if (!idx.count(col)) throw DataError(std::string("poi csv: missing column ") + col);
    }
    std::vector<PoiRecord> pois;
    while (csv::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = csv::split_line(line);
      PoiRecord rec;
      if (f.size() <= idx.at("longitude")) continue;
      rec.id = f[idx.at("id")];
      if (!csv::parse_double(f[idx.at("latitude")], rec.point.lat) ||
          !csv::parse_double(f[idx.at("longitude")], rec.point.lon) ||
          !is_valid(rec.point)) {
        continue;
      }
      if (idx.count("tags") && idx.at("tags") < f.size()) {
        std::istringstream tags(f[idx.at("tags")]);
        std::string kv;
        while (std::getline(tags, kv, ';')) {
          const auto eq = kv.find('=');
          if (eq != std::string::npos) {
            rec.tags[kv.substr(0, eq)] = kv.substr(eq + 1);
          }
        }
      }
      pois.push_back(std::move(rec));
    }
    return OfflinePoiProvider(std::move(pois));
  }

  static OfflinePoiProvider from_geojson(std::istream& in) {
    nlohmann::json doc = nlohmann::json::parse(in);
    std::vector<PoiRecord> pois;
    for (const auto& feature : doc.value("features", nlohmann::json::array())) {
      const auto& geom = feature.value("geometry", nlohmann::json::object());
      if (geom.value("type", "") != "Point") continue;
      const auto& coords = geom.value("coordinates", nlohmann::json::array());
      if (coords.size() < 2) continue;
      PoiRecord rec;
      rec.point = {coords[1].get<double>(), coords[0].get<double>()};
      if (!is_valid(rec.point)) continue;
      if (feature.contains("id")) {
        rec.id = feature["id"].is_string() ? feature["id"].get<std::string>()
                                           : feature["id"].dump();
      }
      for (const auto& [k, v] : feature.value("properties", nlohmann::json::object()).items()) {
        const std::string val = v.is_string() ? v.get<std::string>() : v.dump();
        if (rec.id.empty() && k == "id") rec.id = val;
        rec.tags[k] = val;
      }
      if (rec.id.empty()) rec.id = "poi" + std::to_string(pois.size());
      pois.push_back(std::move(rec));
    }
    return OfflinePoiProvider(std::move(pois));
  }

  static OfflinePoiProvider from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("poi file not readable: " + path);
    if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
      return from_geojson(in);
    }
    if (path.size() >= 8 && path.substr(path.size() - 8) == ".geojson") {
      return from_geojson(in);
    }
    return from_csv(in);
  }

  std::vector<PoiRecord> pois_in_bbox(const GeoPoint& min_corner,
                                      const GeoPoint& max_corner) const override {
    std::vector<PoiRecord> out;
    for (const PoiRecord& p : pois_) {
      if (p.point.lat >= min_corner.lat && p.point.lat <= max_corner.lat &&
          p.point.lon >= min_corner.lon && p.point.lon <= max_corner.lon) {
        out.push_back(p);
      }
    }
    return out;
  }

 private:
  std::vector<PoiRecord> pois_;
};

// ---------------------------------------------------------------------------
// Overpass provider with a mandatory on-disk response cache, so that repeated
// runs are reproducible without network access. The HTTP transport is
// injectable for testing; the default uses cpp-httplib (see tools/).

class OverpassPoiProvider : public PoiProvider {
 public:
  /// fetch(query_body) -> raw Overpass JSON; throws NetworkError on failure.
  using FetchFn = std::function<std::string(const std::string&)>;

  OverpassPoiProvider(std::string endpoint, std::filesystem::path cache_dir,
                      FetchFn fetch)
      : endpoint_(std::move(endpoint)),
        cache_dir_(std::move(cache_dir)),
        fetch_(std::move(fetch)) {
    if (cache_dir_.empty()) {
      throw std::invalid_argument("OverpassPoiProvider: cache directory required");
    }
    std::filesystem::create_directories(cache_dir_);
  }

  std::vector<PoiRecord> pois_in_bbox(const GeoPoint& min_corner,
                                      const GeoPoint& max_corner) const override {
    std::ostringstream q;
    q << "[out:json];node[amenity](" << csv::format_double(min_corner.lat)
      << ',' << csv::format_double(min_corner.lon) << ','
      << csv::format_double(max_corner.lat) << ','
      << csv::format_double(max_corner.lon) << ");out body;";
    return parse_overpass_json(fetch_cached(q.str()));
  }

  static std::vector<PoiRecord> parse_overpass_json(const std::string& body) {
    nlohmann::json doc = nlohmann::json::parse(body);
    std::vector<PoiRecord> pois;
    for (const auto& el : doc.value("elements", nlohmann::json::array())) {
      if (!el.contains("lat") || !el.contains("lon")) continue;
      PoiRecord rec;
      rec.point = {el["lat"].get<double>(), el["lon"].get<double>()};
      if (!is_valid(rec.point)) continue;
      rec.id = el.contains("id") ? el["id"].dump() : std::to_string(pois.size());
      for (const auto& [k, v] : el.value("tags", nlohmann::json::object()).items()) {
        rec.tags[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      pois.push_back(std::move(rec));
    }
    return pois;
  }

 private:
  std::string fetch_cached(const std::string& query) const {
    char key[32];
    std::snprintf(key, sizeof(key), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(endpoint_ + "\n" + query)));
    const std::filesystem::path path = cache_dir_ / (std::string(key) + ".json");
    if (std::filesystem::exists(path)) {
      std::ifstream in(path, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      return buf.str();
    }
    const std::string body = fetch_(query);  // may throw NetworkError
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << body;
    }
    std::filesystem::rename(tmp, path);
    return body;
  }

  std::string endpoint_;
  std::filesystem::path cache_dir_;
  FetchFn fetch_;
};

// ---------------------------------------------------------------------------

/// All provider POIs whose point lies in a set raster cell of the area.
/// Boundary points follow raster cell ownership (floor index).
inline std::vector<PoiRecord> query_pois(const AreaEstimate& area,
                                         const PoiProvider& provider) {
  if (area.empty()) return {};
  // Bounding box of the set cells, padded by one cell.
  const RasterSpec& spec = area.spec();
  double east0 = 0, east1 = 0, north0 = 0, north1 = 0;
  bool first = true;
  for (std::int64_t k : area.cells()) {
    const PlanarPoint c = spec.cell_center_local(k);
    if (first) {
      east0 = east1 = c.east;
      north0 = north1 = c.north;
      first = false;
    } else {
      east0 = std::min(east0, c.east);
      east1 = std::max(east1, c.east);
      north0 = std::min(north0, c.north);
      north1 = std::max(north1, c.north);
    }
  }
  const double pad = spec.cell_m();
  const GeoPoint lo = spec.frame().from_local({east0 - pad, north0 - pad});
  const GeoPoint hi = spec.frame().from_local({east1 + pad, north1 + pad});

  std::vector<PoiRecord> candidates = provider.pois_in_bbox(lo, hi);
  std::vector<PoiRecord> out;
  for (PoiRecord& p : candidates) {
    if (area.contains(p.point)) out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mcspriv

#endif  // MCSPRIV_POI_HPP
