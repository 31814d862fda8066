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

#include "mcspriv/geo.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "mcspriv/rng.hpp"

namespace mcspriv {
namespace {

TEST(Haversine, IdenticalPointsAreZero) {
  EXPECT_EQ(haversine_m({0, 0}, {0, 0}), 0.0);
  EXPECT_EQ(haversine_m({35.5, 139.5}, {35.5, 139.5}), 0.0);
}

TEST(Haversine, OneDegreeAlongEquator) {
  // One degree of arc: R * pi / 180 = 111195.08 m at R = 6371008.8.
  EXPECT_NEAR(haversine_m({0, 0}, {0, 1}), kEarthRadiusM * kPi / 180.0, 1e-6);
  EXPECT_NEAR(haversine_m({0, 0}, {0, 1}), 111195.08, 0.01);
}

TEST(Haversine, QuarterGreatCircle) {
  EXPECT_NEAR(haversine_m({0, 0}, {90, 0}), kEarthRadiusM * kPi / 2.0, 1e-6);
  EXPECT_NEAR(haversine_m({0, 0}, {90, 0}), 10007557.2, 0.1);
}

TEST(Haversine, SymmetricAndNonNegative) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint a{uniform_range(rng, -80, 80), uniform_range(rng, -180, 180)};
    const GeoPoint b{uniform_range(rng, -80, 80), uniform_range(rng, -180, 180)};
    const double ab = haversine_m(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_DOUBLE_EQ(ab, haversine_m(b, a));
  }
}

TEST(Haversine, TriangleInequality) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint a{uniform_range(rng, -80, 80), uniform_range(rng, -180, 180)};
    const GeoPoint b{uniform_range(rng, -80, 80), uniform_range(rng, -180, 180)};
    const GeoPoint c{uniform_range(rng, -80, 80), uniform_range(rng, -180, 180)};
    const double lhs = haversine_m(a, c);
    const double rhs = haversine_m(a, b) + haversine_m(b, c);
    EXPECT_LE(lhs, rhs * (1.0 + 1e-6) + 1e-6);
  }
}

TEST(LocalFrame, OriginMapsToZero) {
  const LocalFrame frame({35.0, 139.0});
  const PlanarPoint p = frame.to_local({35.0, 139.0});
  EXPECT_EQ(p.east, 0.0);
  EXPECT_EQ(p.north, 0.0);
}

TEST(LocalFrame, EquatorialDegreeScale) {
  const LocalFrame frame({0.0, 0.0});
  EXPECT_NEAR(frame.to_local({0.0, 0.001}).east, 111.19, 0.01);
}

TEST(LocalFrame, CosineLatitudeScaling) {
  const LocalFrame frame({60.0, 0.0});
  EXPECT_NEAR(frame.to_local({60.0, 0.001}).east, 55.60, 0.01);
  EXPECT_LE(frame.meters_per_deg_lon(), frame.meters_per_deg_lat());
}

TEST(LocalFrame, RejectsNearPolarOrigins) {
  EXPECT_THROW(LocalFrame({89.5, 0.0}), std::invalid_argument);
  EXPECT_THROW(LocalFrame({-89.0, 10.0}), std::invalid_argument);
  EXPECT_NO_THROW(LocalFrame({88.9, 0.0}));
}

TEST(LocalFrame, RoundTripWithinNanodegree) {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint origin{uniform_range(rng, -65, 65), uniform_range(rng, -170, 170)};
    const LocalFrame frame(origin);
    const GeoPoint p{origin.lat + uniform_range(rng, -2, 2),
                     origin.lon + uniform_range(rng, -2, 2)};
    const GeoPoint back = frame.from_local(frame.to_local(p));
    EXPECT_NEAR(back.lat, p.lat, 1e-9);
    EXPECT_NEAR(back.lon, p.lon, 1e-9);
  }
}

TEST(LocalFrame, PlanarDistanceTracksHaversine) {
  // Pairs under 50 km, below 70 degrees latitude, frame at the midpoint:
  // the equirectangular approximation must stay within 1%.
  Rng rng(17);
  int checked = 0;
  while (checked < 500) {
    const GeoPoint a{uniform_range(rng, -69, 69), uniform_range(rng, -170, 170)};
    const GeoPoint b{a.lat + uniform_range(rng, -0.2, 0.2),
                     a.lon + uniform_range(rng, -0.45, 0.45)};
    const double d = haversine_m(a, b);
    if (d > 50000.0 || d < 100.0) continue;
    const LocalFrame frame({(a.lat + b.lat) / 2.0, (a.lon + b.lon) / 2.0});
    const double planar = planar_distance(frame.to_local(a), frame.to_local(b));
    EXPECT_LT(std::abs(planar - d) / d, 0.01)
        << "a=(" << a.lat << "," << a.lon << ") b=(" << b.lat << "," << b.lon << ")";
    ++checked;
  }
}

TEST(Ecef, CardinalDirections) {
  const EcefPoint x = to_ecef({0, 0});
  EXPECT_NEAR(x.x, kEarthRadiusM, 1e-6);
  EXPECT_NEAR(x.y, 0.0, 1e-6);
  EXPECT_NEAR(x.z, 0.0, 1e-6);

  const EcefPoint z = to_ecef({90, 0});
  EXPECT_NEAR(z.x, 0.0, 1e-6);
  EXPECT_NEAR(z.z, kEarthRadiusM, 1e-6);

  const EcefPoint y = to_ecef({0, 90});
  EXPECT_NEAR(y.y, kEarthRadiusM, 1e-6);
}

TEST(Ecef, NormIsEarthRadius) {
  Rng rng(19);
  for (int i = 0; i < 200; ++i) {
    const GeoPoint p{uniform_range(rng, -90, 90), uniform_range(rng, -180, 180)};
    const EcefPoint e = to_ecef(p);
    const double norm = std::sqrt(e.x * e.x + e.y * e.y + e.z * e.z);
    EXPECT_NEAR(norm, kEarthRadiusM, kEarthRadiusM * 1e-3);
  }
}

TEST(Ecef, RoundTrip) {
  Rng rng(23);
  for (int i = 0; i < 500; ++i) {
    const GeoPoint p{uniform_range(rng, -89, 89), uniform_range(rng, -179, 179)};
    const GeoPoint back = from_ecef(to_ecef(p));
    EXPECT_NEAR(back.lat, p.lat, 1e-9);
    EXPECT_NEAR(back.lon, p.lon, 1e-9);
  }
}

TEST(RoundCoords, Examples) {
  const GeoPoint p = round_coords({35.123456, 139.654321}, 2);
  EXPECT_DOUBLE_EQ(p.lat, 35.12);
  EXPECT_DOUBLE_EQ(p.lon, 139.65);

  const GeoPoint q = round_coords({35.123456, 139.654321}, 4);
  EXPECT_DOUBLE_EQ(q.lat, 35.1235);
  EXPECT_DOUBLE_EQ(q.lon, 139.6543);
}

TEST(RoundCoords, HalfAwayFromZero) {
  const GeoPoint p = round_coords({-0.005, 0.005}, 2);
  EXPECT_DOUBLE_EQ(p.lat, -0.01);
  EXPECT_DOUBLE_EQ(p.lon, 0.01);
}

TEST(RoundCoords, IdempotentAndBounded) {
  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint p{uniform_range(rng, -90, 90), uniform_range(rng, -180, 180)};
    for (int d : {2, 3, 4}) {
      const GeoPoint once = round_coords(p, d);
      const GeoPoint twice = round_coords(once, d);
      EXPECT_DOUBLE_EQ(once.lat, twice.lat);
      EXPECT_DOUBLE_EQ(once.lon, twice.lon);
      const double bound = 0.5 * std::pow(10.0, -d) + 1e-12;
      EXPECT_LE(std::abs(once.lat - p.lat), bound);
      EXPECT_LE(std::abs(once.lon - p.lon), bound);
    }
  }
}

TEST(RoundCoords, RejectsOutOfRangeDecimals) {
  EXPECT_THROW(round_coords({0, 0}, -1), std::invalid_argument);
  EXPECT_THROW(round_coords({0, 0}, 7), std::invalid_argument);
}

}  // namespace
}  // namespace mcspriv
