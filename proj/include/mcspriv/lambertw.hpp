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

#ifndef MCSPRIV_LAMBERTW_HPP
#define MCSPRIV_LAMBERTW_HPP

#include <cmath>
#include <stdexcept>

namespace mcspriv {

/// W_{-1}, the lower real branch of the Lambert W function, defined on
/// [-1/e, 0). Arguments are clamped to that interval; the branch point
/// maps to exactly -1.
///
/// Halley iteration from a series/asymptotic initial guess, run until the
/// step falls below 1e-12.
inline double lambert_w_minus1(double x) {
  constexpr double kInvE = 0.36787944117144233;  // 1/e
  if (!(x < 0.0)) {
    throw std::domain_error("lambert_w_minus1: argument must be negative");
  }
  if (x <= -kInvE) return -1.0;

  double w;
  if (x > -0.25) {
    // Asymptotic form near 0^-: W_{-1}(x) ~ ln(-x) - ln(-ln(-x)).
    const double l1 = std::log(-x);
    const double l2 = std::log(-l1);
    w = l1 - l2 + l2 / l1;
  } else {
    // Series around the branch point in p = -sqrt(2(1 + e x)).
    const double p = -std::sqrt(2.0 * (1.0 + x / kInvE));
    w = -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0;
  }

  for (int i = 0; i < 64; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= step;
    if (std::abs(step) < 1e-12) break;
  }
  return w;
}

}  // namespace mcspriv

#endif  // MCSPRIV_LAMBERTW_HPP
