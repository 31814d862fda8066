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

#ifndef MCSPRIV_ATTACK_HPP
#define MCSPRIV_ATTACK_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "mcspriv/dbscan.hpp"
#include "mcspriv/geo.hpp"
#include "mcspriv/raster.hpp"
#include "mcspriv/rng.hpp"
#include "mcspriv/trace.hpp"

namespace mcspriv {

struct ScheduleEntry {
  std::size_t min_pts = 80;
  double eps_m = 60.0;
};

using Schedule = std::vector<ScheduleEntry>;

/// Workplace-inference relaxation: start demanding, loosen until clusters
/// appear. Steps of +30 m / -15 points, capped at 120 m and 35 points.
inline Schedule default_relaxation_schedule() {
  return {{80, 60.0}, {65, 90.0}, {50, 120.0}, {35, 120.0}};
}

/// Fixed evaluation parameters: 75 points in 30 m (roughly one small
/// building) for Safecast-scale traces.
inline Schedule safecast_tight_schedule() { return {{75, 30.0}}; }

/// Radiocells users contribute far fewer points; the requirement drops
/// to 25 points per cluster.
inline Schedule radiocells_tight_schedule() { return {{25, 30.0}}; }

inline Schedule schedule_preset(const std::string& name) {
  if (name == "relaxation") return default_relaxation_schedule();
  if (name == "safecast_tight") return safecast_tight_schedule();
  if (name == "radiocells_tight") return radiocells_tight_schedule();
  throw std::invalid_argument("unknown schedule preset: " + name);
}

struct Cluster {
  std::int32_t label = 0;
  std::vector<std::size_t> members;  // indices into the attacked trace
  AreaEstimate area;                 // union of eps-disks around members

  std::size_t size() const { return members.size(); }
};

struct AttackResult {
  std::vector<Cluster> clusters;  // largest first
  AreaEstimate area;              // union over kept clusters (or squares)
  int schedule_index = -1;        // schedule entry that produced clusters
  double eps_used_m = 0.0;
  bool used_square_adversary = false;
  std::vector<GeoPoint> square_anchors;

  explicit AttackResult(RasterSpec spec) : area(std::move(spec)) {}

  bool vulnerable() const {
    return !clusters.empty() || !square_anchors.empty();
  }
};

namespace detail {

inline std::vector<PlanarPoint> trace_planar(const UserTrace& trace,
                                             const LocalFrame& frame) {
  std::vector<PlanarPoint> pts;
  pts.reserve(trace.size());
  for (const Measurement& m : trace.measurements) {
    pts.push_back(frame.to_local(m.point));
  }
  return pts;
}

}  // namespace detail

/// Runs DBSCAN under the relaxation schedule, stopping at the first entry
/// that yields any cluster, and keeps the `top_k` clusters with the most
/// points (ties broken by earliest first-member timestamp, then label).
/// Each cluster's footprint is the union of eps-radius disks around its
/// member points, rasterized on `spec`'s grid. A user for whom the whole
/// schedule fails is not vulnerable (empty result).
inline AttackResult infer_areas(const UserTrace& trace, const Schedule& schedule,
                                const RasterSpec& spec, std::size_t top_k = 5) {
  AttackResult result(spec);
  if (trace.empty() || schedule.empty()) return result;

  const std::vector<PlanarPoint> pts = detail::trace_planar(trace, spec.frame());
  for (std::size_t si = 0; si < schedule.size(); ++si) {
    const ScheduleEntry& entry = schedule[si];
    const std::vector<std::int32_t> labels =
        dbscan(pts, {entry.eps_m, entry.min_pts});

    std::map<std::int32_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != kDbscanNoise) members[labels[i]].push_back(i);
    }
    if (members.empty()) continue;  // loosen and retry

    std::vector<Cluster> clusters;
    for (auto& [label, idx] : members) {
      Cluster c{label, std::move(idx), AreaEstimate(spec)};
      for (std::size_t i : c.members) {
        c.area.stamp_disk(trace.measurements[i].point, entry.eps_m);
      }
      clusters.push_back(std::move(c));
    }
    std::sort(clusters.begin(), clusters.end(),
              [&](const Cluster& a, const Cluster& b) {
                if (a.size() != b.size()) return a.size() > b.size();
                const std::int64_t ta = trace.measurements[a.members.front()].t;
                const std::int64_t tb = trace.measurements[b.members.front()].t;
                if (ta != tb) return ta < tb;
                return a.label < b.label;
              });
    if (clusters.size() > top_k) {
      clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(top_k),
                     clusters.end());
    }

    for (const Cluster& c : clusters) result.area.merge(c.area);
    result.clusters = std::move(clusters);
    result.schedule_index = static_cast<int>(si);
    result.eps_used_m = entry.eps_m;
    return result;
  }
  return result;
}

/// Keeps a cluster iff one visit lasts at least 30 minutes or its members
/// span at least two distinct local days. A visit is a maximal run of
/// member points with consecutive gaps below 30 minutes.
inline AttackResult temporal_filter(const AttackResult& attack,
                                    const UserTrace& trace,
                                    double tz_offset_hours) {
  constexpr std::int64_t kVisitSeconds = 30 * 60;
  AttackResult result(attack.area.spec());
  result.schedule_index = attack.schedule_index;
  result.eps_used_m = attack.eps_used_m;
  result.used_square_adversary = attack.used_square_adversary;
  result.square_anchors = attack.square_anchors;

  for (const Cluster& c : attack.clusters) {
    std::vector<std::int64_t> times;
    times.reserve(c.members.size());
    for (std::size_t i : c.members) times.push_back(trace.measurements[i].t);
    std::sort(times.begin(), times.end());

    std::vector<std::int64_t> days;
    bool keep = false;
    std::int64_t visit_start = times.front();
    for (std::size_t i = 0; i < times.size(); ++i) {
      days.push_back(local_day(times[i], tz_offset_hours));
      if (i > 0 && times[i] - times[i - 1] >= kVisitSeconds) {
        visit_start = times[i];  // gap closes the previous visit
      }
      if (times[i] - visit_start >= kVisitSeconds) keep = true;
    }
    std::sort(days.begin(), days.end());
    days.erase(std::unique(days.begin(), days.end()), days.end());
    if (days.size() >= 2) keep = true;

    if (keep) result.clusters.push_back(c);
  }
  for (const Cluster& c : result.clusters) result.area.merge(c.area);
  return result;
}

/// The adversary against the Rounding mechanism: obfuscated locations sit on
/// a coarse lattice, so DBSCAN at meter-scale eps finds nothing. Instead,
/// squares of the lattice pitch (1100 m for 2 decimals, 110 m for 3) are
/// placed around the five most frequently reported coordinates (frequency
/// ties broken by first occurrence). At 4 decimals DBSCAN still functions,
/// so the caller falls back to infer_areas.
inline AttackResult rounding_adversary_areas(const UserTrace& trace,
                                             int decimals,
                                             const RasterSpec& spec,
                                             const Schedule& fallback_schedule,
                                             std::size_t top_k = 5) {
  if (decimals >= 4) {
    return infer_areas(trace, fallback_schedule, spec, top_k);
  }
  if (decimals != 2 && decimals != 3) {
    throw std::invalid_argument("rounding_adversary_areas: decimals must be 2, 3 or 4");
  }
  AttackResult result(spec);
  result.used_square_adversary = true;
  if (trace.empty()) return result;

  struct Freq {
    std::size_t count = 0;
    std::size_t first_seen = 0;
    GeoPoint point;
  };
  std::map<std::pair<std::int64_t, std::int64_t>, Freq> freq;
  const double scale = std::pow(10.0, decimals);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const GeoPoint& p = trace.measurements[i].point;
    const auto key = std::make_pair(std::llround(p.lat * scale),
                                    std::llround(p.lon * scale));
    auto [it, inserted] = freq.try_emplace(key);
    if (inserted) {
      it->second.first_seen = i;
      it->second.point = p;
    }
    ++it->second.count;
  }

  std::vector<const Freq*> ranked;
  ranked.reserve(freq.size());
  for (const auto& [key, f] : freq) ranked.push_back(&f);
  std::sort(ranked.begin(), ranked.end(), [](const Freq* a, const Freq* b) {
    if (a->count != b->count) return a->count > b->count;
    return a->first_seen < b->first_seen;
  });
  if (ranked.size() > 5) ranked.resize(5);

  const double side_m = decimals == 2 ? 1100.0 : 110.0;
  for (const Freq* f : ranked) {
    result.square_anchors.push_back(f->point);
    result.area.stamp_square(f->point, side_m);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Workplace-candidate splitting.

/// 2-means split of a cluster's points (10 seeded restarts, Lloyd updates);
/// returns both centroids ordered by subcluster size, largest first. A
/// single-point input returns that point twice.
inline std::array<PlanarPoint, 2> split_subclusters(
    const std::vector<PlanarPoint>& points, std::uint64_t seed) {
  if (points.empty()) {
    throw std::invalid_argument("split_subclusters: empty cluster");
  }
  if (points.size() == 1) return {points[0], points[0]};

  const std::size_t n = points.size();
  Rng rng(seed);
  double best_sse = std::numeric_limits<double>::infinity();
  std::array<PlanarPoint, 2> best_centroids{points[0], points[1]};
  std::array<std::size_t, 2> best_sizes{0, 0};

  for (int restart = 0; restart < 10; ++restart) {
    std::size_t ia = static_cast<std::size_t>(rng() % n);
    std::size_t ib = static_cast<std::size_t>(rng() % n);
    for (int tries = 0; tries < 32 && planar_distance(points[ia], points[ib]) == 0.0;
         ++tries) {
      ib = static_cast<std::size_t>(rng() % n);
    }
    std::array<PlanarPoint, 2> centroids{points[ia], points[ib]};
    std::vector<int> assign(n, 0);

    for (int iter = 0; iter < 50; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        const double da = planar_distance(points[i], centroids[0]);
        const double db = planar_distance(points[i], centroids[1]);
        const int a = db < da ? 1 : 0;
        if (a != assign[i]) {
          assign[i] = a;
          changed = true;
        }
      }
      std::array<double, 2> sx{0, 0}, sy{0, 0};
      std::array<std::size_t, 2> cnt{0, 0};
      for (std::size_t i = 0; i < n; ++i) {
        sx[assign[i]] += points[i].east;
        sy[assign[i]] += points[i].north;
        ++cnt[assign[i]];
      }
      for (int k = 0; k < 2; ++k) {
        if (cnt[k] == 0) {
          // Re-seat an emptied centroid on the point farthest from the other.
          std::size_t far = 0;
          double far_d = -1.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double d = planar_distance(points[i], centroids[1 - k]);
            if (d > far_d) {
              far_d = d;
              far = i;
            }
          }
          centroids[k] = points[far];
        } else {
          centroids[k] = {sx[k] / cnt[k], sy[k] / cnt[k]};
        }
      }
      if (!changed && iter > 0) break;
    }

    double sse = 0.0;
    std::array<std::size_t, 2> sizes{0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const double d = planar_distance(points[i], centroids[assign[i]]);
      sse += d * d;
      ++sizes[assign[i]];
    }
    if (sse < best_sse) {
      best_sse = sse;
      best_centroids = centroids;
      best_sizes = sizes;
    }
  }

  if (best_sizes[1] > best_sizes[0]) {
    std::swap(best_centroids[0], best_centroids[1]);
  }
  return best_centroids;
}

/// GeoPoint convenience wrapper over a cluster of an attacked trace.
inline std::array<GeoPoint, 2> split_subclusters(const UserTrace& trace,
                                                 const Cluster& cluster,
                                                 const LocalFrame& frame,
                                                 std::uint64_t seed) {
  std::vector<PlanarPoint> pts;
  pts.reserve(cluster.members.size());
  for (std::size_t i : cluster.members) {
    pts.push_back(frame.to_local(trace.measurements[i].point));
  }
  const auto centroids = split_subclusters(pts, seed);
  return {frame.from_local(centroids[0]), frame.from_local(centroids[1])};
}

// ---------------------------------------------------------------------------
// Co-location detection.

struct ColocationEvent {
  std::size_t index_a = 0;  // measurement index in trace a
  std::size_t index_b = 0;
  double distance_m = 0.0;
  std::int64_t dt_s = 0;
};

struct ColocationPair {
  std::string user_a;  // user_a < user_b
  std::string user_b;
  std::vector<ColocationEvent> events;
};

/// Reports every user pair with at least one co-location: measurements within
/// d_max meters and t_max seconds of each other. Symmetric in the pair and
/// monotone in both thresholds.
inline std::vector<ColocationPair> detect_colocations(
    const std::vector<UserTrace>& traces, double d_max_m, double t_max_s) {
  std::vector<ColocationPair> pairs;
  for (std::size_t a = 0; a < traces.size(); ++a) {
    for (std::size_t b = a + 1; b < traces.size(); ++b) {
      const UserTrace* ta = &traces[a];
      const UserTrace* tb = &traces[b];
      bool swapped = tb->user_id < ta->user_id;
      if (swapped) std::swap(ta, tb);

      ColocationPair pair{ta->user_id, tb->user_id, {}};
      std::size_t j0 = 0;
      for (std::size_t i = 0; i < ta->size(); ++i) {
        const Measurement& ma = ta->measurements[i];
        while (j0 < tb->size() && tb->measurements[j0].t < ma.t - static_cast<std::int64_t>(t_max_s)) {
          ++j0;
        }
        for (std::size_t j = j0;
             j < tb->size() && tb->measurements[j].t <= ma.t + static_cast<std::int64_t>(t_max_s);
             ++j) {
          const double d = haversine_m(ma.point, tb->measurements[j].point);
          if (d <= d_max_m) {
            pair.events.push_back({i, j, d, tb->measurements[j].t - ma.t});
          }
        }
      }
      if (!pair.events.empty()) pairs.push_back(std::move(pair));
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const ColocationPair& x, const ColocationPair& y) {
              return std::tie(x.user_a, x.user_b) < std::tie(y.user_a, y.user_b);
            });
  return pairs;
}

}  // namespace mcspriv

#endif  // MCSPRIV_ATTACK_HPP
