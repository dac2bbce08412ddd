// Copyright 2026 The Covebo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "covebo/errors.hpp"

namespace covebo {

struct TrustRegionConfig {
  double length_init = 0.8;
  double length_min = 0.0078125;  // 0.5^7
  double length_max = 1.6;
  int success_tolerance = 3;
  int failure_tolerance = 4;

  /// Defaults with failure_tolerance = max(4, ceil(d / q)).
  static TrustRegionConfig defaults_for(std::size_t dim, std::size_t batch_size) {
    TrustRegionConfig c;
    const auto q = std::max<std::size_t>(1, batch_size);
    c.failure_tolerance = static_cast<int>(std::max<std::size_t>(4, (dim + q - 1) / q));
    return c;
  }

  void validate() const {
    if (!(length_min > 0.0) || !(length_min < length_init) || !(length_init <= length_max)) {
      throw InputError("TrustRegionConfig: need 0 < length_min < length_init <= length_max");
    }
    if (success_tolerance < 1 || failure_tolerance < 1) {
      throw InputError("TrustRegionConfig: tolerances must be positive");
    }
  }
};

struct TrustRegionState {
  Eigen::VectorXd center;
  double length = 0.8;
  int success_count = 0;
  int failure_count = 0;
  int restarts = 0;

  static TrustRegionState initial(const TrustRegionConfig& config, Eigen::VectorXd center) {
    TrustRegionState s;
    s.center = std::move(center);
    s.length = config.length_init;
    return s;
  }
};

/// One success/failure outcome. Doubles the side length on the
/// success_tolerance-th consecutive success (capped at length_max), halves it
/// on the failure_tolerance-th consecutive failure, and restarts at
/// length_init when it falls below length_min. The center is left alone.
inline TrustRegionState tr_update(TrustRegionState state, const TrustRegionConfig& config, bool success) {
  if (success) {
    ++state.success_count;
    state.failure_count = 0;
    if (state.success_count >= config.success_tolerance) {
      state.length = std::min(2.0 * state.length, config.length_max);
      state.success_count = 0;
    }
  } else {
    ++state.failure_count;
    state.success_count = 0;
    if (state.failure_count >= config.failure_tolerance) {
      state.length /= 2.0;
      state.failure_count = 0;
    }
  }
  if (state.length < config.length_min) {
    state.length = config.length_init;
    state.success_count = 0;
    state.failure_count = 0;
    ++state.restarts;
  }
  return state;
}

/// Axis-aligned candidate box inside the unit hypercube.
struct TrustBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd center;

  std::size_t dim() const { return static_cast<std::size_t>(center.size()); }
};

/// Box around the state's center with per-dimension half-width
/// (length / 2) * lambda_j / geomean(lambda), clipped to [0, 1].
inline TrustBox tr_candidate_box(const TrustRegionState& state, const Eigen::VectorXd& lengthscales) {
  const auto d = state.center.size();
  if (lengthscales.size() != d) {
    throw InputError("tr_candidate_box: expected " + std::to_string(d) + " lengthscales");
  }
  double log_sum = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(lengthscales[j] > 0.0) || !std::isfinite(lengthscales[j])) {
      throw InputError("tr_candidate_box: lengthscales must be finite and positive");
    }
    log_sum += std::log(lengthscales[j]);
  }
  const double geo_mean = d > 0 ? std::exp(log_sum / static_cast<double>(d)) : 1.0;

  TrustBox box;
  box.center = state.center.cwiseMax(0.0).cwiseMin(1.0);
  box.lower.resize(d);
  box.upper.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double half = 0.5 * state.length * lengthscales[j] / geo_mean;
    box.lower[j] = std::clamp(box.center[j] - half, 0.0, 1.0);
    box.upper[j] = std::clamp(box.center[j] + half, 0.0, 1.0);
  }
  return box;
}

}  // namespace covebo
