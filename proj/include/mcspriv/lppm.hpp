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

#ifndef MCSPRIV_LPPM_HPP
#define MCSPRIV_LPPM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcspriv/geo.hpp"
#include "mcspriv/kdtree.hpp"
#include "mcspriv/lambertw.hpp"
#include "mcspriv/rng.hpp"
#include "mcspriv/trace.hpp"

namespace mcspriv {

inline double default_privacy_ratio() { return std::log(1.6); }

/// Geo-indistinguishability: planar Laplace noise with epsilon = l / r.
struct GeoIndConfig {
  double l = 0.0;  // privacy ratio, dimensionless
  double r = 0.0;  // radius in meters

  GeoIndConfig() : l(default_privacy_ratio()), r(50.0) {}
  GeoIndConfig(double l_, double r_) : l(l_), r(r_) {
    if (!(l > 0.0) || !(r > 0.0)) {
      throw std::invalid_argument("GeoIndConfig: l and r must be positive");
    }
  }
  double epsilon() const { return l / r; }  // per meter
};

/// Predictive variant: a fresh noisy location is released only after the user
/// has moved at least z meters from the location that triggered the previous
/// release; otherwise the previous report is repeated.
struct ReleaseGeoIndConfig {
  GeoIndConfig base{default_privacy_ratio(), 50.0};
  double z = 60.0;  // movement threshold, meters
};

struct RoundingConfig {
  int decimals = 2;  // pipeline accepts {2,3,4}
};

enum class HidingMode { kRandom, kRelease };

struct HidingConfig {
  HidingMode mode = HidingMode::kRandom;
  double keep_fraction = 0.6;  // Random: {0.4, 0.6, 0.8}
  double x = 60.0;             // Release: {30, 60, 90} meters
};

// ---------------------------------------------------------------------------
// Planar Laplace sampling.
//
// The radial CDF is C(d) = 1 - (1 + eps*d) * exp(-eps*d); its inverse is
// C^{-1}(rho) = -(1/eps) * (W_{-1}((rho - 1)/e) + 1) on the -1 branch of the
// Lambert W function. The angle is uniform on [0, 2*pi).

inline double planar_laplace_cdf(double epsilon, double d) {
  if (d <= 0.0) return 0.0;
  const double ed = epsilon * d;
  return 1.0 - (1.0 + ed) * std::exp(-ed);
}

inline double planar_laplace_quantile(double epsilon, double rho) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("planar_laplace_quantile: epsilon <= 0");
  }
  if (rho < 0.0 || rho >= 1.0) {
    throw std::invalid_argument("planar_laplace_quantile: rho outside [0,1)");
  }
  constexpr double kE = 2.718281828459045;
  // (rho-1)/e lies in [-1/e, 0); the branch point maps to distance 0.
  const double arg = (rho - 1.0) / kE;
  return -(lambert_w_minus1(arg) + 1.0) / epsilon;
}

struct PolarDisplacement {
  double distance = 0.0;  // meters
  double angle = 0.0;     // radians
};

inline PolarDisplacement sample_planar_laplace(double epsilon, Rng& rng) {
  const double rho = uniform_double(rng);
  const double angle = uniform_range(rng, 0.0, 2.0 * kPi);
  return {planar_laplace_quantile(epsilon, rho), angle};
}

namespace detail {

inline GeoPoint wrap_point(GeoPoint p) {
  if (p.lon > 180.0) p.lon -= 360.0;
  if (p.lon < -180.0) p.lon += 360.0;
  if (p.lat > 90.0) p.lat = 90.0;
  if (p.lat < -90.0) p.lat = -90.0;
  return p;
}

inline GeoPoint displace(const GeoPoint& p, const PolarDisplacement& disp) {
  const LocalFrame frame(p);
  return wrap_point(frame.from_local({disp.distance * std::cos(disp.angle),
                                      disp.distance * std::sin(disp.angle)}));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mechanisms. Noise mechanisms preserve length, timestamps and values; hiding
// mechanisms return a subsequence plus the surviving source indices.

inline UserTrace apply_geoind(const UserTrace& trace, const GeoIndConfig& cfg,
                              std::uint64_t seed) {
  Rng rng(seed);
  UserTrace out = trace;
  for (Measurement& m : out.measurements) {
    m.point = detail::displace(m.point, sample_planar_laplace(cfg.epsilon(), rng));
  }
  return out;
}

/// The movement test runs on the true (unobfuscated) positions, as the
/// mechanism executes client-side before any perturbation. State does not
/// reset across days.
inline UserTrace apply_release_geoind(const UserTrace& trace,
                                      const ReleaseGeoIndConfig& cfg,
                                      std::uint64_t seed) {
  Rng rng(seed);
  UserTrace out = trace;
  GeoPoint last_trigger;     // true position of the last released point
  GeoPoint last_reported;
  bool have_release = false;
  for (std::size_t i = 0; i < out.measurements.size(); ++i) {
    const GeoPoint true_point = trace.measurements[i].point;
    if (!have_release || haversine_m(true_point, last_trigger) >= cfg.z) {
      last_reported = detail::displace(
          true_point, sample_planar_laplace(cfg.base.epsilon(), rng));
      last_trigger = true_point;
      have_release = true;
    }
    out.measurements[i].point = last_reported;
  }
  return out;
}

struct HidingResult {
  UserTrace trace;
  std::vector<std::size_t> kept;  // indices into the input trace
};

inline HidingResult apply_random_hiding(const UserTrace& trace,
                                        double keep_fraction,
                                        std::uint64_t seed) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    throw std::invalid_argument("apply_random_hiding: keep_fraction outside (0,1]");
  }
  Rng rng(seed);
  HidingResult result;
  result.trace.user_id = trace.user_id;
  for (std::size_t i = 0; i < trace.measurements.size(); ++i) {
    if (uniform_double(rng) < keep_fraction) {
      result.trace.measurements.push_back(trace.measurements[i]);
      result.kept.push_back(i);
    }
  }
  return result;
}

/// Releases a point iff it is at least x meters from the previously released
/// one, or falls on a different local calendar day. The first point is always
/// released. Released locations are not perturbed.
inline HidingResult apply_release_hiding(const UserTrace& trace, double x,
                                         double tz_offset_hours) {
  HidingResult result;
  result.trace.user_id = trace.user_id;
  bool have_release = false;
  GeoPoint last_point;
  std::int64_t last_day = 0;
  for (std::size_t i = 0; i < trace.measurements.size(); ++i) {
    const Measurement& m = trace.measurements[i];
    const std::int64_t day = local_day(m.t, tz_offset_hours);
    if (!have_release || haversine_m(m.point, last_point) >= x ||
        day != last_day) {
      result.trace.measurements.push_back(m);
      result.kept.push_back(i);
      last_point = m.point;
      last_day = day;
      have_release = true;
    }
  }
  return result;
}

inline UserTrace apply_rounding(const UserTrace& trace,
                                const RoundingConfig& cfg) {
  UserTrace out = trace;
  for (Measurement& m : out.measurements) {
    m.point = round_coords(m.point, cfg.decimals);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimal remapping (GeoInd-OR).

/// Empirical location prior over 3-decimal-rounded cells, with an ECEF
/// spatial index over the cell centers for neighbor queries.
class Prior {
 public:
  struct Cell {
    GeoPoint center;
    double probability = 0.0;
  };

  explicit Prior(std::vector<Cell> cells) : cells_(std::move(cells)) {
    std::vector<std::array<double, 3>> coords;
    coords.reserve(cells_.size());
    for (const Cell& c : cells_) {
      const EcefPoint e = to_ecef(c.center);
      coords.push_back({e.x, e.y, e.z});
    }
    index_ = KdTree<3>(std::move(coords));
  }

  const std::vector<Cell>& cells() const { return cells_; }

  /// Cells whose centers lie within `radius` meters (chord distance on the
  /// spherical model; indistinguishable from arc length at LPPM scales).
  std::vector<std::size_t> cells_within(const GeoPoint& p, double radius) const {
    const EcefPoint e = to_ecef(p);
    std::vector<std::size_t> out;
    index_.radius_search({e.x, e.y, e.z}, radius, out);
    return out;
  }

 private:
  std::vector<Cell> cells_;
  KdTree<3> index_;
};

/// Cell probabilities proportional to visit counts after rounding every
/// location to 3 decimals.
inline Prior build_prior(const std::vector<UserTrace>& training) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> counts;
  std::size_t total = 0;
  for (const UserTrace& t : training) {
    for (const Measurement& m : t.measurements) {
      const GeoPoint cell = round_coords(m.point, 3);
      counts[{std::llround(cell.lat * 1000.0),
              std::llround(cell.lon * 1000.0)}]++;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("build_prior: empty training set");
  std::vector<Prior::Cell> cells;
  cells.reserve(counts.size());
  for (const auto& [key, count] : counts) {
    cells.push_back({{static_cast<double>(key.first) / 1000.0,
                      static_cast<double>(key.second) / 1000.0},
                     static_cast<double>(count) / static_cast<double>(total)});
  }
  return Prior(std::move(cells));
}

struct WeightedPoint {
  PlanarPoint point;
  double weight = 1.0;
};

/// Weighted geometric median by Weiszfeld iteration: stop when the step drops
/// below 1e-6 m or after 200 iterations. An iterate landing on a data point
/// is nudged by 1e-9 m to step over the singularity.
inline PlanarPoint geometric_median(const std::vector<WeightedPoint>& points) {
  if (points.empty()) {
    throw std::invalid_argument("geometric_median: no points");
  }
  double wsum = 0.0;
  PlanarPoint cur{0.0, 0.0};
  for (const WeightedPoint& wp : points) {
    if (!(wp.weight > 0.0)) {
      throw std::invalid_argument("geometric_median: weights must be positive");
    }
    cur.east += wp.weight * wp.point.east;
    cur.north += wp.weight * wp.point.north;
    wsum += wp.weight;
  }
  cur.east /= wsum;
  cur.north /= wsum;

  for (int iter = 0; iter < 200; ++iter) {
    for (const WeightedPoint& wp : points) {
      if (planar_distance(cur, wp.point) < 1e-9) {
        cur.east += 1e-9;
        break;
      }
    }
    double num_e = 0.0, num_n = 0.0, denom = 0.0;
    for (const WeightedPoint& wp : points) {
      const double d = std::max(planar_distance(cur, wp.point), 1e-12);
      const double w = wp.weight / d;
      num_e += w * wp.point.east;
      num_n += w * wp.point.north;
      denom += w;
    }
    const PlanarPoint next{num_e / denom, num_n / denom};
    const double step = planar_distance(cur, next);
    cur = next;
    if (step < 1e-6) break;
  }
  return cur;
}

/// Remaps a noisy output toward likely true locations: candidate prior cells
/// within r' (the 99% radial quantile of the noise), posterior weights
/// prior(x) * exp(-eps * dist(x, z)), then the posterior-weighted geometric
/// median of the candidate coordinates. With no candidate in range the noisy
/// point is returned unchanged.
inline GeoPoint remap_optimal(const GeoPoint& z, const Prior& prior,
                              const GeoIndConfig& cfg) {
  const double r_prime = planar_laplace_quantile(cfg.epsilon(), 0.99);
  const std::vector<std::size_t> candidates = prior.cells_within(z, r_prime);
  if (candidates.empty()) return z;

  const LocalFrame frame(z);
  std::vector<WeightedPoint> weighted;
  weighted.reserve(candidates.size());
  for (std::size_t idx : candidates) {
    const Prior::Cell& cell = prior.cells()[idx];
    const double w =
        cell.probability * std::exp(-cfg.epsilon() * haversine_m(cell.center, z));
    if (w > 0.0) weighted.push_back({frame.to_local(cell.center), w});
  }
  if (weighted.empty()) return z;
  return frame.from_local(geometric_median(weighted));
}

inline UserTrace apply_geoind_or(const UserTrace& trace, const GeoIndConfig& cfg,
                                 const Prior& prior, std::uint64_t seed) {
  UserTrace noisy = apply_geoind(trace, cfg, seed);
  for (Measurement& m : noisy.measurements) {
    m.point = remap_optimal(m.point, prior, cfg);
  }
  return noisy;
}

// ---------------------------------------------------------------------------
// Mechanism selection.

enum class LppmKind {
  kIdentity,
  kGeoInd,
  kReleaseGeoInd,
  kGeoIndOr,
  kRandomHiding,
  kReleaseHiding,
  kRounding,
};

struct LppmSpec {
  LppmKind kind = LppmKind::kIdentity;
  double l = 0.0;              // 0 means default ln(1.6)
  double r = 50.0;             // GeoInd family
  double z = 60.0;             // Release-GeoInd
  double keep_fraction = 0.6;  // Random hiding
  double x = 60.0;             // Release hiding
  int decimals = 2;            // Rounding
  double train_fraction = 0.8; // GeoInd-OR prior split

  double privacy_ratio() const { return l > 0.0 ? l : default_privacy_ratio(); }
  GeoIndConfig geoind() const { return GeoIndConfig(privacy_ratio(), r); }

  std::string label() const {
    switch (kind) {
      case LppmKind::kIdentity: return "identity";
      case LppmKind::kGeoInd: return "geoind_r" + format_meters(r);
      case LppmKind::kReleaseGeoInd:
        return "release_geoind_r" + format_meters(r) + "_z" + format_meters(z);
      case LppmKind::kGeoIndOr: return "geoind_or_r" + format_meters(r);
      case LppmKind::kRandomHiding:
        return "random_hiding_" +
               std::to_string(static_cast<int>(std::llround(keep_fraction * 100)));
      case LppmKind::kReleaseHiding: return "release_hiding_x" + format_meters(x);
      case LppmKind::kRounding: return "rounding_" + std::to_string(decimals);
    }
    return "unknown";
  }

 private:
  static std::string format_meters(double v) {
    return std::to_string(static_cast<int>(std::llround(v)));
  }
};

struct LppmOutcome {
  UserTrace trace;
  // Source indices of surviving points; present for hiding mechanisms only.
  std::optional<std::vector<std::size_t>> kept;
};

/// Applies one mechanism to one trace. `prior` is required for GeoInd-OR,
/// `tz_offset_hours` matters for the release-hiding day rule.
inline LppmOutcome apply_lppm(const UserTrace& trace, const LppmSpec& spec,
                              std::uint64_t seed, double tz_offset_hours = 0.0,
                              const Prior* prior = nullptr) {
  switch (spec.kind) {
    case LppmKind::kIdentity:
      return {trace, std::nullopt};
    case LppmKind::kGeoInd:
      return {apply_geoind(trace, spec.geoind(), seed), std::nullopt};
    case LppmKind::kReleaseGeoInd:
      return {apply_release_geoind(trace, {spec.geoind(), spec.z}, seed),
              std::nullopt};
    case LppmKind::kGeoIndOr:
      if (prior == nullptr) {
        throw std::invalid_argument("apply_lppm: GeoInd-OR requires a prior");
      }
      return {apply_geoind_or(trace, spec.geoind(), *prior, seed), std::nullopt};
    case LppmKind::kRandomHiding: {
      HidingResult h = apply_random_hiding(trace, spec.keep_fraction, seed);
      return {std::move(h.trace), std::move(h.kept)};
    }
    case LppmKind::kReleaseHiding: {
      HidingResult h = apply_release_hiding(trace, spec.x, tz_offset_hours);
      return {std::move(h.trace), std::move(h.kept)};
    }
    case LppmKind::kRounding:
      return {apply_rounding(trace, {spec.decimals}), std::nullopt};
  }
  throw std::logic_error("apply_lppm: unhandled mechanism");
}

/// The full evaluation grid of mechanism parameterizations, as named presets.
inline std::map<std::string, LppmSpec> paper_presets() {
  std::map<std::string, LppmSpec> presets;
  presets["identity"] = LppmSpec{};
  for (double r : {50.0, 150.0, 300.0}) {
    LppmSpec g;
    g.kind = LppmKind::kGeoInd;
    g.r = r;
    presets[g.label()] = g;
    LppmSpec o = g;
    o.kind = LppmKind::kGeoIndOr;
    presets[o.label()] = o;
  }
  for (double z : {30.0, 60.0, 90.0}) {
    LppmSpec s;
    s.kind = LppmKind::kReleaseGeoInd;
    s.r = 50.0;
    s.z = z;
    presets[s.label()] = s;
  }
  for (double keep : {0.4, 0.6, 0.8}) {
    LppmSpec s;
    s.kind = LppmKind::kRandomHiding;
    s.keep_fraction = keep;
    presets[s.label()] = s;
  }
  for (double x : {30.0, 60.0, 90.0}) {
    LppmSpec s;
    s.kind = LppmKind::kReleaseHiding;
    s.x = x;
    presets[s.label()] = s;
  }
  for (int d : {2, 3, 4}) {
    LppmSpec s;
    s.kind = LppmKind::kRounding;
    s.decimals = d;
    presets[s.label()] = s;
  }
  return presets;
}

}  // namespace mcspriv

#endif  // MCSPRIV_LPPM_HPP
