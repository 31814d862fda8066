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

#ifndef MCSPRIV_SYNTH_HPP
#define MCSPRIV_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcspriv/geo.hpp"
#include "mcspriv/rng.hpp"
#include "mcspriv/trace.hpp"

namespace mcspriv {

/// Place a synthetic user dwells at every day: measurements are emitted at a
/// fixed rate during the dwell window, scattered around the anchor point.
struct SynthAnchor {
  GeoPoint point;
  double start_hour = 9.0;       // local hour the daily visit begins
  double dwell_minutes = 60.0;
  double points_per_minute = 1.0;
};

/// Value field sampled at each generated position: constant, or a Gaussian
/// bump over a flat background.
struct ValueField {
  enum class Kind { kConstant, kGaussianBump } kind = Kind::kConstant;
  double constant_cpm = 30.0;
  GeoPoint bump_center;
  double peak_cpm = 150.0;
  double sigma_m = 50.0;
  double background_cpm = 30.0;

  double value_at(const GeoPoint& p) const {
    if (kind == Kind::kConstant) return constant_cpm;
    const double d = haversine_m(p, bump_center);
    return background_cpm +
           (peak_cpm - background_cpm) * std::exp(-d * d / (2.0 * sigma_m * sigma_m));
  }
};

struct SynthProfile {
  std::vector<SynthAnchor> anchors;
  double jitter_m = 10.0;   // positional scatter sigma, truncated at 3 sigma
  ValueField field;
  int days = 3;
  std::uint64_t seed = 1;
  // Base instant of day 0 (2017-01-02 was a Monday); keeping it on a Monday
  // makes work-hour scenarios straightforward to script.
  std::int64_t start_utc = utc_from_civil(2017, 1, 2, 0, 0, 0);
  std::string unit = "cpm";
};

namespace detail {

/// Truncated Gaussian displacement: both components resampled until within
/// the 3-sigma cap, so synthetic clusters have bounded footprints.
inline PlanarPoint sample_jitter(double sigma_m, Rng& rng) {
  if (sigma_m <= 0.0) return {0.0, 0.0};
  auto draw = [&] {
    double v = normal_double(rng) * sigma_m;
    while (std::abs(v) > 3.0 * sigma_m) v = normal_double(rng) * sigma_m;
    return v;
  };
  return {draw(), draw()};
}

}  // namespace detail

/// Deterministic synthetic trace: per day and anchor, evenly spaced
/// timestamps across the dwell window, jittered positions, field-sampled
/// values.
inline UserTrace generate_trace(const SynthProfile& profile,
                                const std::string& user_id = "synth-user") {
  if (profile.anchors.empty()) {
    throw std::invalid_argument("generate_trace: profile needs at least one anchor");
  }
  for (const SynthAnchor& a : profile.anchors) {
    if (!(a.points_per_minute > 0.0) || !(a.dwell_minutes > 0.0)) {
      throw std::invalid_argument("generate_trace: rates and dwell must be positive");
    }
  }
  Rng rng(profile.seed);
  UserTrace trace;
  trace.user_id = user_id;
  for (int day = 0; day < profile.days; ++day) {
    for (const SynthAnchor& anchor : profile.anchors) {
      const LocalFrame frame(anchor.point);
      const auto n_points = static_cast<std::size_t>(
          std::llround(anchor.dwell_minutes * anchor.points_per_minute));
      const double spacing_s = anchor.dwell_minutes * 60.0 /
                               static_cast<double>(std::max<std::size_t>(n_points, 1));
      const std::int64_t visit_start =
          profile.start_utc + static_cast<std::int64_t>(day) * 86400 +
          static_cast<std::int64_t>(std::llround(anchor.start_hour * 3600.0));
      for (std::size_t i = 0; i < n_points; ++i) {
        Measurement m;
        m.user_id = user_id;
        m.t = visit_start + static_cast<std::int64_t>(std::llround(i * spacing_s));
        m.point = frame.from_local(detail::sample_jitter(profile.jitter_m, rng));
        m.value = profile.field.value_at(m.point);
        m.unit = profile.unit;
        trace.measurements.push_back(std::move(m));
      }
    }
  }
  trace.sort_by_time();
  return trace;
}

struct GroundTruth {
  std::string user_id;
  std::vector<GeoPoint> anchors;
};

struct SynthCohort {
  std::vector<UserTrace> traces;
  std::vector<GroundTruth> truth;
};

/// n users from a shared template. Each user gets a derived seed and, when
/// spread_m > 0, a private translation of the whole anchor set (users then
/// occupy distinct neighborhoods while sharing the template's geometry).
inline SynthCohort generate_cohort(std::size_t n_users,
                                   const SynthProfile& tmpl,
                                   std::uint64_t seed,
                                   double spread_m = 0.0) {
  if (n_users == 0) {
    throw std::invalid_argument("generate_cohort: need at least one user");
  }
  SynthCohort cohort;
  for (std::size_t u = 0; u < n_users; ++u) {
    char name[32];
    std::snprintf(name, sizeof(name), "synth-%03zu", u);
    SynthProfile profile = tmpl;
    profile.seed = derive_seed(seed, static_cast<std::uint64_t>(u));
    if (spread_m > 0.0) {
      Rng offset_rng(derive_seed(profile.seed, "anchor-offset"));
      const LocalFrame frame(tmpl.anchors.front().point);
      const PlanarPoint shift{uniform_range(offset_rng, -spread_m, spread_m),
                              uniform_range(offset_rng, -spread_m, spread_m)};
      for (SynthAnchor& a : profile.anchors) {
        const PlanarPoint local = frame.to_local(a.point);
        a.point = frame.from_local(
            {local.east + shift.east, local.north + shift.north});
      }
      if (profile.field.kind == ValueField::Kind::kGaussianBump) {
        const PlanarPoint local = frame.to_local(profile.field.bump_center);
        profile.field.bump_center = frame.from_local(
            {local.east + shift.east, local.north + shift.north});
      }
    }
    GroundTruth truth;
    truth.user_id = name;
    for (const SynthAnchor& a : profile.anchors) truth.anchors.push_back(a.point);
    cohort.truth.push_back(std::move(truth));
    cohort.traces.push_back(generate_trace(profile, name));
  }
  return cohort;
}

}  // namespace mcspriv

#endif  // MCSPRIV_SYNTH_HPP
