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

#ifndef MCSPRIV_RASTER_HPP
#define MCSPRIV_RASTER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mcspriv/geo.hpp"
#include "mcspriv/region.hpp"

namespace mcspriv {

/// Square-cell raster anchored at a region's local frame. Cell (ix, iy)
/// covers [ix*cell, (ix+1)*cell) x [iy*cell, (iy+1)*cell) in frame meters;
/// a point on a boundary belongs to the cell given by the floor of its
/// coordinates. Indices are unbounded, so footprints may spill past the
/// region's bounding box (obfuscated points routinely do).
class RasterSpec {
 public:
  RasterSpec(const RegionSpec& region, double cell_m = 10.0)
      : region_(region), cell_m_(cell_m), frame_(region.center()) {
    region.validate();
    if (!(cell_m > 0.0)) {
      throw std::invalid_argument("RasterSpec: cell size must be positive");
    }
  }

  const RegionSpec& region() const { return region_; }
  double cell_m() const { return cell_m_; }
  const LocalFrame& frame() const { return frame_; }
  double cell_area_km2() const { return cell_m_ * cell_m_ / 1e6; }

  bool compatible(const RasterSpec& other) const {
    return region_ == other.region_ && cell_m_ == other.cell_m_;
  }

  static std::int64_t key(std::int32_t ix, std::int32_t iy) {
    return (static_cast<std::int64_t>(iy) << 32) |
           static_cast<std::uint32_t>(ix);
  }
  static std::int32_t key_ix(std::int64_t k) {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(k & 0xffffffff));
  }
  static std::int32_t key_iy(std::int64_t k) {
    return static_cast<std::int32_t>(k >> 32);
  }

  std::int64_t cell_of_local(const PlanarPoint& p) const {
    return key(static_cast<std::int32_t>(std::floor(p.east / cell_m_)),
               static_cast<std::int32_t>(std::floor(p.north / cell_m_)));
  }

  std::int64_t cell_of(const GeoPoint& p) const {
    return cell_of_local(frame_.to_local(p));
  }

  PlanarPoint cell_center_local(std::int64_t k) const {
    return {(key_ix(k) + 0.5) * cell_m_, (key_iy(k) + 0.5) * cell_m_};
  }

  GeoPoint cell_center(std::int64_t k) const {
    return frame_.from_local(cell_center_local(k));
  }

 private:
  RegionSpec region_;
  double cell_m_;
  LocalFrame frame_;
};

/// Rasterized geographic footprint: the operand of the set-based privacy
/// metrics. Cells are kept sorted and unique.
class AreaEstimate {
 public:
  explicit AreaEstimate(RasterSpec spec) : spec_(std::move(spec)) {}

  AreaEstimate(RasterSpec spec, std::vector<std::int64_t> cells)
      : spec_(std::move(spec)), cells_(std::move(cells)) {
    normalize();
  }

  const RasterSpec& spec() const { return spec_; }
  const std::vector<std::int64_t>& cells() const { return cells_; }
  std::size_t cell_count() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }
  double area_km2() const {
    return static_cast<double>(cells_.size()) * spec_.cell_area_km2();
  }

  bool contains_cell(std::int64_t k) const {
    return std::binary_search(cells_.begin(), cells_.end(), k);
  }
  bool contains(const GeoPoint& p) const {
    return contains_cell(spec_.cell_of(p));
  }

  void add_cells(const std::vector<std::int64_t>& cells) {
    cells_.insert(cells_.end(), cells.begin(), cells.end());
    normalize();
  }

  void merge(const AreaEstimate& other) {
    check_same_grid(other);
    add_cells(other.cells_);
  }

  /// Cells whose centers lie within `radius` meters of `center`.
  void stamp_disk(const GeoPoint& center, double radius) {
    const PlanarPoint c = spec_.frame().to_local(center);
    const double cell = spec_.cell_m();
    const auto lo_x = static_cast<std::int32_t>(std::floor((c.east - radius) / cell));
    const auto hi_x = static_cast<std::int32_t>(std::floor((c.east + radius) / cell));
    const auto lo_y = static_cast<std::int32_t>(std::floor((c.north - radius) / cell));
    const auto hi_y = static_cast<std::int32_t>(std::floor((c.north + radius) / cell));
    const double r2 = radius * radius;
    for (std::int32_t iy = lo_y; iy <= hi_y; ++iy) {
      const double dy = (iy + 0.5) * cell - c.north;
      for (std::int32_t ix = lo_x; ix <= hi_x; ++ix) {
        const double dx = (ix + 0.5) * cell - c.east;
        if (dx * dx + dy * dy <= r2) cells_.push_back(RasterSpec::key(ix, iy));
      }
    }
    normalize();
  }

  /// A square of round(side/cell) x round(side/cell) cells centered on the
  /// cell containing `center`; the footprint is exact in cell counts by
  /// construction.
  void stamp_square(const GeoPoint& center, double side_m) {
    const std::int32_t side_cells =
        static_cast<std::int32_t>(std::llround(side_m / spec_.cell_m()));
    if (side_cells <= 0) throw std::invalid_argument("stamp_square: side too small");
    const std::int64_t ck = spec_.cell_of(center);
    const std::int32_t lo_x = RasterSpec::key_ix(ck) - side_cells / 2;
    const std::int32_t lo_y = RasterSpec::key_iy(ck) - side_cells / 2;
    for (std::int32_t iy = lo_y; iy < lo_y + side_cells; ++iy) {
      for (std::int32_t ix = lo_x; ix < lo_x + side_cells; ++ix) {
        cells_.push_back(RasterSpec::key(ix, iy));
      }
    }
    normalize();
  }

  /// Cells whose centers fall inside the axis-aligned rectangle given in
  /// frame meters (half-open on both axes).
  void stamp_rect_local(double east0, double east1, double north0, double north1) {
    const double cell = spec_.cell_m();
    const auto lo_x = static_cast<std::int32_t>(std::floor(east0 / cell) - 1);
    const auto hi_x = static_cast<std::int32_t>(std::floor(east1 / cell) + 1);
    const auto lo_y = static_cast<std::int32_t>(std::floor(north0 / cell) - 1);
    const auto hi_y = static_cast<std::int32_t>(std::floor(north1 / cell) + 1);
    for (std::int32_t iy = lo_y; iy <= hi_y; ++iy) {
      const double cy = (iy + 0.5) * cell;
      if (cy < north0 || cy >= north1) continue;
      for (std::int32_t ix = lo_x; ix <= hi_x; ++ix) {
        const double cx = (ix + 0.5) * cell;
        if (cx >= east0 && cx < east1) cells_.push_back(RasterSpec::key(ix, iy));
      }
    }
    normalize();
  }

  std::size_t intersection_count(const AreaEstimate& other) const {
    check_same_grid(other);
    std::vector<std::int64_t> tmp;
    std::set_intersection(cells_.begin(), cells_.end(), other.cells_.begin(),
                          other.cells_.end(), std::back_inserter(tmp));
    return tmp.size();
  }

  /// |this \ other|.
  std::size_t difference_count(const AreaEstimate& other) const {
    check_same_grid(other);
    std::vector<std::int64_t> tmp;
    std::set_difference(cells_.begin(), cells_.end(), other.cells_.begin(),
                        other.cells_.end(), std::back_inserter(tmp));
    return tmp.size();
  }

  void check_same_grid(const AreaEstimate& other) const {
    if (!spec_.compatible(other.spec_)) {
      throw std::invalid_argument("AreaEstimate: mismatched raster grids");
    }
  }

 private:
  void normalize() {
    std::sort(cells_.begin(), cells_.end());
    cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
  }

  RasterSpec spec_;
  std::vector<std::int64_t> cells_;
};

}  // namespace mcspriv

#endif  // MCSPRIV_RASTER_HPP
