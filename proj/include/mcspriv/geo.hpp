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

#ifndef MCSPRIV_GEO_HPP
#define MCSPRIV_GEO_HPP

#include <cmath>
#include <stdexcept>
#include <string>

namespace mcspriv {

// Mean Earth radius, spherical model. All distances in this library are
// meters on this sphere.
inline constexpr double kEarthRadiusM = 6371008.8;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;

// Meters per degree of latitude on the spherical model (constant).
inline constexpr double kMetersPerDegLat = kEarthRadiusM * kDegToRad;

/// A WGS-agnostic geographic coordinate: latitude/longitude in degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint& a, const GeoPoint& b) {
    return a.lat == b.lat && a.lon == b.lon;
  }
  friend bool operator<(const GeoPoint& a, const GeoPoint& b) {
    return a.lat != b.lat ? a.lat < b.lat : a.lon < b.lon;
  }
};

inline bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
         p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

inline void check_valid(const GeoPoint& p) {
  if (!is_valid(p)) {
    throw std::invalid_argument("invalid GeoPoint (" + std::to_string(p.lat) +
                                ", " + std::to_string(p.lon) + ")");
  }
}

/// Planar offset in meters (east, north) relative to some LocalFrame origin.
struct PlanarPoint {
  double east = 0.0;
  double north = 0.0;
};

inline double planar_distance(const PlanarPoint& a, const PlanarPoint& b) {
  const double dx = a.east - b.east;
  const double dy = a.north - b.north;
  return std::sqrt(dx * dx + dy * dy);
}

/// Great-circle distance in meters between two points (haversine formula).
inline double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double dlat = (b.lat - a.lat) * kDegToRad;
  const double dlon = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Equirectangular projection anchored at `origin`. Valid for points within a
/// few degrees of the origin; degenerate near the poles.
class LocalFrame {
 public:
  explicit LocalFrame(const GeoPoint& origin) : origin_(origin) {
    check_valid(origin);
    if (std::abs(origin.lat) >= 89.0) {
      throw std::invalid_argument(
          "LocalFrame origin too close to a pole: lat=" +
          std::to_string(origin.lat));
    }
    meters_per_deg_lon_ = kMetersPerDegLat * std::cos(origin.lat * kDegToRad);
  }

  const GeoPoint& origin() const { return origin_; }
  double meters_per_deg_lat() const { return kMetersPerDegLat; }
  double meters_per_deg_lon() const { return meters_per_deg_lon_; }

  PlanarPoint to_local(const GeoPoint& p) const {
    return {(p.lon - origin_.lon) * meters_per_deg_lon_,
            (p.lat - origin_.lat) * kMetersPerDegLat};
  }

  GeoPoint from_local(const PlanarPoint& p) const {
    return {origin_.lat + p.north / kMetersPerDegLat,
            origin_.lon + p.east / meters_per_deg_lon_};
  }

  friend bool operator==(const LocalFrame& a, const LocalFrame& b) {
    return a.origin_ == b.origin_;
  }

 private:
  GeoPoint origin_;
  double meters_per_deg_lon_;
};

/// Earth-centered cartesian coordinates (meters) on the spherical model.
struct EcefPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline EcefPoint to_ecef(const GeoPoint& p) {
  const double lat = p.lat * kDegToRad;
  const double lon = p.lon * kDegToRad;
  const double c = std::cos(lat);
  return {kEarthRadiusM * c * std::cos(lon), kEarthRadiusM * c * std::sin(lon),
          kEarthRadiusM * std::sin(lat)};
}

inline GeoPoint from_ecef(const EcefPoint& p) {
  const double hxy = std::hypot(p.x, p.y);
  return {std::atan2(p.z, hxy) / kDegToRad, std::atan2(p.y, p.x) / kDegToRad};
}

/// Rounds both coordinates to `decimals` places, half away from zero.
/// The LPPM pipeline uses decimals in {2,3,4}; the function itself accepts
/// 0 through 6.
inline GeoPoint round_coords(const GeoPoint& p, int decimals) {
  if (decimals < 0 || decimals > 6) {
    throw std::invalid_argument("round_coords: decimals must be in [0,6]");
  }
  const double scale = std::pow(10.0, decimals);
  return {std::round(p.lat * scale) / scale, std::round(p.lon * scale) / scale};
}

}  // namespace mcspriv

#endif  // MCSPRIV_GEO_HPP
