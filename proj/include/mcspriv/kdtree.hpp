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

#ifndef MCSPRIV_KDTREE_HPP
#define MCSPRIV_KDTREE_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mcspriv {

/// k-d tree over fixed-dimension double coordinates, used for DBSCAN
/// neighborhood queries (2-D local frames), prior-cell lookups (3-D ECEF)
/// and nearest-neighbor interpolation.
///
/// Nearest-neighbor ties (exactly equal squared distances) resolve to the
/// smallest point index, so results are reproducible and comparable with a
/// brute-force scan that applies the same rule.
template <std::size_t Dim>
class KdTree {
 public:
  using Point = std::array<double, Dim>;

  KdTree() = default;

  explicit KdTree(std::vector<Point> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!order_.empty()) build(0, order_.size(), 0);
  }

  std::size_t size() const { return points_.size(); }
  const Point& point(std::size_t i) const { return points_[i]; }

  static double dist2(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < Dim; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  }

  /// Index of the nearest point to q. Throws on an empty tree.
  std::size_t nearest(const Point& q) const {
    if (points_.empty()) throw std::logic_error("KdTree::nearest: empty tree");
    std::size_t best = order_[0];
    double best_d2 = std::numeric_limits<double>::infinity();
    nearest_impl(q, 0, order_.size(), 0, best, best_d2);
    return best;
  }

  /// Appends indices of all points with squared distance <= radius^2.
  void radius_search(const Point& q, double radius,
                     std::vector<std::size_t>& out) const {
    if (points_.empty()) return;
    radius_impl(q, radius * radius, 0, order_.size(), 0, out);
  }

 private:
  void build(std::size_t lo, std::size_t hi, std::size_t depth) {
    if (hi - lo <= 1) return;
    const std::size_t axis = depth % Dim;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid,
                     order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void consider(const Point& q, std::size_t idx, std::size_t& best,
                double& best_d2) const {
    const double d2 = dist2(q, points_[idx]);
    if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
      best = idx;
      best_d2 = d2;
    }
  }

  void nearest_impl(const Point& q, std::size_t lo, std::size_t hi,
                    std::size_t depth, std::size_t& best,
                    double& best_d2) const {
    if (lo >= hi) return;
    const std::size_t axis = depth % Dim;
    const std::size_t mid = (lo + hi) / 2;
    const std::size_t idx = order_[mid];
    consider(q, idx, best, best_d2);

    const double delta = q[axis] - points_[idx][axis];
    const bool left_first = delta < 0.0;
    const auto near_lo = left_first ? lo : mid + 1;
    const auto near_hi = left_first ? mid : hi;
    const auto far_lo = left_first ? mid + 1 : lo;
    const auto far_hi = left_first ? hi : mid;

    nearest_impl(q, near_lo, near_hi, depth + 1, best, best_d2);
    // Strict > keeps equal-distance candidates reachable for tie-breaking.
    if (delta * delta > best_d2) return;
    nearest_impl(q, far_lo, far_hi, depth + 1, best, best_d2);
  }

  void radius_impl(const Point& q, double r2, std::size_t lo, std::size_t hi,
                   std::size_t depth, std::vector<std::size_t>& out) const {
    if (lo >= hi) return;
    const std::size_t axis = depth % Dim;
    const std::size_t mid = (lo + hi) / 2;
    const std::size_t idx = order_[mid];
    if (dist2(q, points_[idx]) <= r2) out.push_back(idx);

    const double delta = q[axis] - points_[idx][axis];
    if (delta <= 0.0 || delta * delta <= r2) radius_impl(q, r2, lo, mid, depth + 1, out);
    if (delta >= 0.0 || delta * delta <= r2) radius_impl(q, r2, mid + 1, hi, depth + 1, out);
  }

  std::vector<Point> points_;
  std::vector<std::size_t> order_;
};

}  // namespace mcspriv

#endif  // MCSPRIV_KDTREE_HPP
