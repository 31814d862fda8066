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

#ifndef MCSPRIV_DBSCAN_HPP
#define MCSPRIV_DBSCAN_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "mcspriv/geo.hpp"
#include "mcspriv/kdtree.hpp"

namespace mcspriv {

struct DbscanParams {
  double eps_m = 60.0;      // maximum neighbor distance
  std::size_t min_pts = 80; // minimum cluster size, query point included

  void validate() const {
    if (!(eps_m > 0.0) || min_pts < 1) {
      throw std::invalid_argument("DbscanParams: eps > 0 and min_pts >= 1 required");
    }
  }
};

inline constexpr std::int32_t kDbscanNoise = -1;

/// Standard DBSCAN over planar points (meters), neighbor queries through a
/// k-d tree. Returns one label per point: a cluster id in [0, n_clusters)
/// or kDbscanNoise. A point's eps-neighborhood includes the point itself.
/// Points are seeded in index order, so labels are deterministic.
inline std::vector<std::int32_t> dbscan(const std::vector<PlanarPoint>& points,
                                        const DbscanParams& params) {
  params.validate();
  const std::size_t n = points.size();
  std::vector<std::int32_t> labels(n, kDbscanNoise);
  if (n == 0) return labels;

  std::vector<std::array<double, 2>> coords(n);
  for (std::size_t i = 0; i < n; ++i) coords[i] = {points[i].east, points[i].north};
  const KdTree<2> tree(std::move(coords));

  auto neighbors = [&](std::size_t i, std::vector<std::size_t>& out) {
    out.clear();
    tree.radius_search({points[i].east, points[i].north}, params.eps_m, out);
    std::sort(out.begin(), out.end());
  };

  std::vector<bool> visited(n, false);
  std::vector<std::size_t> nbrs, expansion;
  std::int32_t next_label = 0;

  for (std::size_t seed = 0; seed < n; ++seed) {
    if (visited[seed]) continue;
    visited[seed] = true;
    neighbors(seed, nbrs);
    if (nbrs.size() < params.min_pts) continue;  // noise, maybe border later

    const std::int32_t cluster = next_label++;
    labels[seed] = cluster;
    std::deque<std::size_t> queue(nbrs.begin(), nbrs.end());
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      if (labels[p] == kDbscanNoise) labels[p] = cluster;  // border claim
      if (visited[p]) continue;
      visited[p] = true;
      labels[p] = cluster;
      neighbors(p, expansion);
      if (expansion.size() >= params.min_pts) {
        queue.insert(queue.end(), expansion.begin(), expansion.end());
      }
    }
  }
  return labels;
}

}  // namespace mcspriv

#endif  // MCSPRIV_DBSCAN_HPP
