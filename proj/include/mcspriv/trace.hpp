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

#ifndef MCSPRIV_TRACE_HPP
#define MCSPRIV_TRACE_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcspriv/geo.hpp"

namespace mcspriv {

/// One geo-located sensor reading.
struct Measurement {
  std::string user_id;
  std::string device_id;        // optional, may be empty
  std::int64_t t = 0;           // UTC seconds since the Unix epoch
  GeoPoint point;
  double value = 0.0;           // cpm for radiation, dBm-like for signal
  std::string unit;
  std::map<std::string, std::string> extras;  // antenna id, manufacturer, ...
};

/// Time-ordered measurements of one user: the unit of LPPM application and
/// of the inference attack.
struct UserTrace {
  std::string user_id;
  std::vector<Measurement> measurements;

  std::size_t size() const { return measurements.size(); }
  bool empty() const { return measurements.empty(); }

  void sort_by_time() {
    std::stable_sort(measurements.begin(), measurements.end(),
                     [](const Measurement& a, const Measurement& b) {
                       return a.t < b.t;
                     });
  }
};

/// Radiocells-style quasi-identifier: the four attributes that jointly stand
/// in for a user id. A record missing any of them is unassignable.
struct QuasiId {
  std::string manufacturer;
  std::string model;
  std::string country;
  std::string operator_name;

  bool complete() const {
    return !manufacturer.empty() && !model.empty() && !country.empty() &&
           !operator_name.empty();
  }
  std::string joined() const {
    return manufacturer + "|" + model + "|" + country + "|" + operator_name;
  }
  friend bool operator<(const QuasiId& a, const QuasiId& b) {
    return a.joined() < b.joined();
  }
};

// ---------------------------------------------------------------------------
// Civil time. UTC instants are converted to local time with a fixed per-region
// offset in hours; no IANA database lookup.

struct CivilTime {
  std::int64_t day = 0;     // local days since 1970-01-01
  int weekday = 0;          // 0 = Monday ... 6 = Sunday
  int second_of_day = 0;    // 0 .. 86399
};

inline CivilTime to_civil(std::int64_t utc_seconds, double tz_offset_hours) {
  const std::int64_t local =
      utc_seconds + static_cast<std::int64_t>(tz_offset_hours * 3600.0);
  std::int64_t day = local / 86400;
  std::int64_t rem = local % 86400;
  if (rem < 0) {
    day -= 1;
    rem += 86400;
  }
  // 1970-01-01 was a Thursday.
  const int weekday = static_cast<int>(((day % 7) + 7 + 3) % 7);
  return {day, weekday, static_cast<int>(rem)};
}

inline std::int64_t local_day(std::int64_t utc_seconds, double tz_offset_hours) {
  return to_civil(utc_seconds, tz_offset_hours).day;
}

inline bool is_work_hours(std::int64_t utc_seconds, double tz_offset_hours) {
  const CivilTime c = to_civil(utc_seconds, tz_offset_hours);
  if (c.weekday > 4) return false;  // Saturday, Sunday
  // Closed at 09:00, open at 17:00.
  return c.second_of_day >= 9 * 3600 && c.second_of_day < 17 * 3600;
}

// ---------------------------------------------------------------------------
// ISO-8601 <-> epoch seconds (UTC, second resolution).

namespace detail {

// Howard Hinnant's days-from-civil, valid far beyond the data range here.
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

}  // namespace detail

inline std::int64_t utc_from_civil(int year, int month, int day, int hour,
                                   int minute, int second) {
  return detail::days_from_civil(year, month, day) * 86400 + hour * 3600 +
         minute * 60 + second;
}

/// Formats epoch seconds as "YYYY-MM-DDTHH:MM:SSZ".
inline std::string format_utc(std::int64_t t) {
  std::int64_t day = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    day -= 1;
    rem += 86400;
  }
  int y, m, d;
  detail::civil_from_days(day, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

/// Parses "YYYY-MM-DDTHH:MM:SSZ" (a space is accepted in place of 'T', the
/// trailing 'Z' is optional) or a plain integer of epoch seconds.
/// Returns false on malformed input.
inline bool parse_utc(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  bool digits_only = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(std::isdigit(static_cast<unsigned char>(s[i])) ||
          (i == 0 && (s[i] == '-' || s[i] == '+')))) {
      digits_only = false;
      break;
    }
  }
  if (digits_only) {
    try {
      std::size_t pos = 0;
      out = std::stoll(s, &pos);
      return pos == s.size();
    } catch (const std::exception&) {
      return false;
    }
  }
  int y, mo, d, h, mi, se;
  char sep;
  if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi,
                  &se) != 7) {
    return false;
  }
  if (sep != 'T' && sep != ' ') return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 ||
      mi > 59 || se < 0 || se > 60) {
    return false;
  }
  out = utc_from_civil(y, mo, d, h, mi, se);
  return true;
}

}  // namespace mcspriv

#endif  // MCSPRIV_TRACE_HPP
