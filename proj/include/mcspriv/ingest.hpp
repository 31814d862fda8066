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

#ifndef MCSPRIV_INGEST_HPP
#define MCSPRIV_INGEST_HPP

#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcspriv/csv.hpp"
#include "mcspriv/geo.hpp"
#include "mcspriv/trace.hpp"

namespace mcspriv {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Safecast-style logs.
//
// CSV schema (header required, columns located by name):
//   captured_at,user_id,device_id,latitude,longitude,value,unit
// captured_at is ISO-8601 UTC ("2016-04-01T12:00:00Z") or integer epoch
// seconds. device_id and unit may be empty.

struct ParseResult {
  std::vector<UserTrace> traces;    // sorted by user_id, measurements by time
  std::size_t malformed_rows = 0;
  std::size_t excluded_rows = 0;    // rows dropped via the exclusion list
  double tz_offset_hours = 0.0;
};

namespace detail {

inline std::map<std::string, std::size_t> header_index(
    const std::vector<std::string>& header) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[header[i]] = i;
  return idx;
}

inline std::vector<UserTrace> traces_from_map(
    std::map<std::string, std::vector<Measurement>>&& by_user) {
  std::vector<UserTrace> traces;
  traces.reserve(by_user.size());
  for (auto& [uid, ms] : by_user) {
    UserTrace t{uid, std::move(ms)};
    t.sort_by_time();
    traces.push_back(std::move(t));
  }
  return traces;
}

}  // namespace detail

inline ParseResult parse_safecast(std::istream& in, double tz_offset_hours,
                                  const std::set<std::string>& excluded_users = {}) {
  if (!in) throw DataError("parse_safecast: unreadable stream");
  std::string line;
  if (!csv::getline(in, line)) throw DataError("parse_safecast: empty input");
  const auto idx = detail::header_index(csv::split_line(line));
  for (const char* col : {"captured_at", "user_id", "latitude", "longitude", "value"}) {
    if (!idx.count(col)) {
      throw DataError(std::string("parse_safecast: missing column ") + col);
    }
  }

  ParseResult result;
  result.tz_offset_hours = tz_offset_hours;
  std::map<std::string, std::vector<Measurement>> by_user;
  while (csv::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    auto field = [&](const char* name) -> const std::string* {
      auto it = idx.find(name);
      if (it == idx.end() || it->second >= f.size()) return nullptr;
      return &f[it->second];
    };
    const std::string* ts = field("captured_at");
    const std::string* uid = field("user_id");
    const std::string* lat = field("latitude");
    const std::string* lon = field("longitude");
    const std::string* val = field("value");
    Measurement m;
    if (!ts || !uid || !lat || !lon || !val || uid->empty() ||
        !parse_utc(*ts, m.t) || !csv::parse_double(*lat, m.point.lat) ||
        !csv::parse_double(*lon, m.point.lon) ||
        !csv::parse_double(*val, m.value) || !is_valid(m.point) ||
        !std::isfinite(m.value)) {
      ++result.malformed_rows;
      continue;
    }
    if (excluded_users.count(*uid)) {
      ++result.excluded_rows;
      continue;
    }
    m.user_id = *uid;
    if (const std::string* dev = field("device_id")) m.device_id = *dev;
    if (const std::string* unit = field("unit")) m.unit = *unit;
    by_user[m.user_id].push_back(std::move(m));
  }
  result.traces = detail::traces_from_map(std::move(by_user));
  return result;
}

inline void write_safecast(std::ostream& out,
                           const std::vector<UserTrace>& traces) {
  out << "captured_at,user_id,device_id,latitude,longitude,value,unit\n";
  for (const UserTrace& t : traces) {
    for (const Measurement& m : t.measurements) {
      out << format_utc(m.t) << ',' << csv::quote(m.user_id) << ','
          << csv::quote(m.device_id) << ',' << csv::format_double(m.point.lat)
          << ',' << csv::format_double(m.point.lon) << ','
          << csv::format_double(m.value) << ',' << csv::quote(m.unit) << '\n';
    }
  }
}

inline std::string serialize_trace(const UserTrace& trace) {
  std::ostringstream os;
  write_safecast(os, {trace});
  return os.str();
}

/// One user_id per line; blank lines and lines starting with '#' ignored.
inline std::set<std::string> parse_exclusion_list(std::istream& in) {
  std::set<std::string> ids;
  std::string line;
  while (csv::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ids.insert(line);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Radiocells-style logs.
//
// CSV schema (header required):
//   measured_at,latitude,longitude,signal,antenna_id,manufacturer,model,country,operator
// There is no user id; users are derived from the quasi-identifier
// (manufacturer, model, country, operator).

struct RadiocellsParseResult {
  std::vector<Measurement> records;  // user_id left empty
  std::size_t malformed_rows = 0;
};

inline RadiocellsParseResult parse_radiocells(std::istream& in) {
  if (!in) throw DataError("parse_radiocells: unreadable stream");
  std::string line;
  if (!csv::getline(in, line)) throw DataError("parse_radiocells: empty input");
  const auto idx = detail::header_index(csv::split_line(line));
  for (const char* col :
       {"measured_at", "latitude", "longitude", "signal", "antenna_id",
        "manufacturer", "model", "country", "operator"}) {
    if (!idx.count(col)) {
      throw DataError(std::string("parse_radiocells: missing column ") + col);
    }
  }
  RadiocellsParseResult result;
  while (csv::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_line(line);
    if (f.size() < idx.size()) {
      ++result.malformed_rows;
      continue;
    }
    Measurement m;
    if (!parse_utc(f[idx.at("measured_at")], m.t) ||
        !csv::parse_double(f[idx.at("latitude")], m.point.lat) ||
        !csv::parse_double(f[idx.at("longitude")], m.point.lon) ||
        !csv::parse_double(f[idx.at("signal")], m.value) ||
        !is_valid(m.point) || !std::isfinite(m.value)) {
      ++result.malformed_rows;
      continue;
    }
    m.unit = "dBm";
    m.extras["antenna_id"] = f[idx.at("antenna_id")];
    m.extras["manufacturer"] = f[idx.at("manufacturer")];
    m.extras["model"] = f[idx.at("model")];
    m.extras["country"] = f[idx.at("country")];
    m.extras["operator"] = f[idx.at("operator")];
    result.records.push_back(std::move(m));
  }
  return result;
}

struct DeriveResult {
  std::vector<UserTrace> traces;
  std::size_t unassignable = 0;  // records missing part of the quasi-id
};

/// Groups records by (manufacturer, model, country, operator); each complete
/// quasi-identifier becomes one pseudo-user.
inline DeriveResult derive_radiocells_users(std::vector<Measurement> records) {
  DeriveResult result;
  std::map<std::string, std::vector<Measurement>> by_user;
  for (Measurement& m : records) {
    const QuasiId qid{m.extras["manufacturer"], m.extras["model"],
                      m.extras["country"], m.extras["operator"]};
    if (!qid.complete()) {
      ++result.unassignable;
      continue;
    }
    m.user_id = qid.joined();
    by_user[m.user_id].push_back(std::move(m));
  }
  result.traces = detail::traces_from_map(std::move(by_user));
  return result;
}

// ---------------------------------------------------------------------------
// Consistency filters.

struct FilterResult {
  std::vector<UserTrace> traces;
  std::size_t dropped_too_few_points = 0;
  std::size_t dropped_inconsistent_speed = 0;
};

/// Keeps users with strictly more than `min_points` measurements and drops a
/// user entirely if any contiguous pair implies a speed above `max_speed_kmh`
/// (zero time delta with nonzero displacement counts as inconsistent).
inline FilterResult filter_users(std::vector<UserTrace> traces,
                                 std::size_t min_points = 100,
                                 double max_speed_kmh = 200.0) {
  FilterResult result;
  for (UserTrace& t : traces) {
    if (t.size() <= min_points) {
      ++result.dropped_too_few_points;
      continue;
    }
    bool inconsistent = false;
    for (std::size_t i = 1; i < t.size(); ++i) {
      const double dist_m =
          haversine_m(t.measurements[i - 1].point, t.measurements[i].point);
      const double dt_s =
          static_cast<double>(t.measurements[i].t - t.measurements[i - 1].t);
      if (dt_s <= 0.0) {
        if (dist_m > 0.0) {
          inconsistent = true;
          break;
        }
        continue;
      }
      if (dist_m / dt_s * 3.6 > max_speed_kmh) {
        inconsistent = true;
        break;
      }
    }
    if (inconsistent) {
      ++result.dropped_inconsistent_speed;
      continue;
    }
    result.traces.push_back(std::move(t));
  }
  return result;
}

/// Restricts a trace to Monday-Friday, 09:00 (inclusive) to 17:00 (exclusive)
/// local time. Order-preserving subsequence.
inline UserTrace split_work_hours(const UserTrace& trace,
                                  double tz_offset_hours) {
  UserTrace out;
  out.user_id = trace.user_id;
  for (const Measurement& m : trace.measurements) {
    if (is_work_hours(m.t, tz_offset_hours)) out.measurements.push_back(m);
  }
  return out;
}

}  // namespace mcspriv

#endif  // MCSPRIV_INGEST_HPP
