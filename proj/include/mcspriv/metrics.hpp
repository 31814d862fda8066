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

#ifndef MCSPRIV_METRICS_HPP
#define MCSPRIV_METRICS_HPP

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcspriv/poi.hpp"
#include "mcspriv/raster.hpp"

namespace mcspriv {

/// Adversarial precision/recall over areas (km^2) or POI sets (counts).
/// Zero-denominator cases are undefined, never zero: a user without clusters
/// does not appear in scatter outputs.
struct PrivacyGain {
  double tp = 0.0;
  double fp = 0.0;
  double fn = 0.0;

  std::optional<double> precision() const {
    if (tp + fp <= 0.0) return std::nullopt;
    return tp / (tp + fp);
  }
  std::optional<double> recall() const {
    if (tp + fn <= 0.0) return std::nullopt;
    return tp / (tp + fn);
  }
};

/// TP = |before ∩ after|, FP = |after \ before|, FN = |before \ after|,
/// measured in km^2 on a shared grid.
inline PrivacyGain spatial_gain(const AreaEstimate& before,
                                const AreaEstimate& after) {
  before.check_same_grid(after);
  const double cell = before.spec().cell_area_km2();
  PrivacyGain g;
  g.tp = static_cast<double>(before.intersection_count(after)) * cell;
  g.fp = static_cast<double>(after.difference_count(before)) * cell;
  g.fn = static_cast<double>(before.difference_count(after)) * cell;
  return g;
}

/// Same contingency over POI identity sets.
inline PrivacyGain poi_gain(const std::vector<PoiRecord>& before,
                            const std::vector<PoiRecord>& after) {
  std::set<std::string> b, a;
  for (const PoiRecord& p : before) b.insert(p.id);
  for (const PoiRecord& p : after) a.insert(p.id);
  PrivacyGain g;
  for (const std::string& id : a) {
    if (b.count(id)) g.tp += 1.0;
    else g.fp += 1.0;
  }
  for (const std::string& id : b) {
    if (!a.count(id)) g.fn += 1.0;
  }
  return g;
}

struct VulnerabilityStats {
  std::size_t users_total = 0;
  std::size_t vulnerable_before = 0;
  std::size_t vulnerable_after = 0;
  double reduction = 0.0;   // 1 - after/before, 0 when before == 0
  bool degenerate = false;  // nobody vulnerable before the defense
};

inline VulnerabilityStats vulnerability_stats(
    const std::vector<bool>& vulnerable_before,
    const std::vector<bool>& vulnerable_after) {
  if (vulnerable_before.size() != vulnerable_after.size()) {
    throw std::invalid_argument("vulnerability_stats: cohort size mismatch");
  }
  VulnerabilityStats s;
  s.users_total = vulnerable_before.size();
  s.vulnerable_before = static_cast<std::size_t>(
      std::count(vulnerable_before.begin(), vulnerable_before.end(), true));
  s.vulnerable_after = static_cast<std::size_t>(
      std::count(vulnerable_after.begin(), vulnerable_after.end(), true));
  if (s.vulnerable_before == 0) {
    s.degenerate = true;
    s.reduction = 0.0;
  } else {
    s.reduction = 1.0 - static_cast<double>(s.vulnerable_after) /
                            static_cast<double>(s.vulnerable_before);
  }
  return s;
}

/// Measurement-volume cohorts used in the per-user scatter outputs.
inline std::string volume_bin(std::size_t measurement_count) {
  if (measurement_count < 10000) return "lt10k";
  if (measurement_count <= 50000) return "10k-50k";
  return "gt50k";
}

}  // namespace mcspriv

#endif  // MCSPRIV_METRICS_HPP
