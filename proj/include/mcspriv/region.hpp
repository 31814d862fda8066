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

#ifndef MCSPRIV_REGION_HPP
#define MCSPRIV_REGION_HPP

#include <stdexcept>
#include <string>

#include "mcspriv/geo.hpp"

namespace mcspriv {

/// A named region of interest: bounding box plus the fixed UTC offset used
/// for all local-time logic inside the region.
struct RegionSpec {
  std::string name;
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;
  double tz_offset_hours = 0.0;

  void validate() const {
    if (!(lat_min < lat_max) || !(lon_min < lon_max)) {
      throw std::invalid_argument("RegionSpec '" + name +
                                  "': min must be below max on both axes");
    }
    check_valid({lat_min, lon_min});
    check_valid({lat_max, lon_max});
  }

  GeoPoint center() const {
    return {(lat_min + lat_max) / 2.0, (lon_min + lon_max) / 2.0};
  }

  bool contains(const GeoPoint& p) const {
    return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min &&
           p.lon <= lon_max;
  }

  friend bool operator==(const RegionSpec& a, const RegionSpec& b) {
    return a.lat_min == b.lat_min && a.lat_max == b.lat_max &&
           a.lon_min == b.lon_min && a.lon_max == b.lon_max;
  }
};

}  // namespace mcspriv

#endif  // MCSPRIV_REGION_HPP
