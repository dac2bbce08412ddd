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

//
// Expected-coverage-improvement acquisition inside one trust region.
//
// Each candidate gets a Monte Carlo estimate of the expected coverage
// improvement: draw a joint posterior realization of every objective over the
// whole candidate set, then rerun the greedy cover on the observed data plus
// that one realized row. The batch is the q best candidates by that estimate.
// This is the cheap top-q rule; the joint batch expectation is not estimated.
//

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "covebo/coverage.hpp"
#include "covebo/errors.hpp"
#include "covebo/gp.hpp"
#include "covebo/random.hpp"
#include "covebo/trust_region.hpp"

namespace covebo {

struct AcquisitionConfig {
  std::size_t num_candidates = 512;
  std::size_t batch_size = 20;
  std::size_t realizations = 1;
  // Per-coordinate perturbation probability; unset means min(1, 20 / d).
  std::optional<double> perturbation_probability;

  double perturbation_for(std::size_t dim) const {
    if (perturbation_probability) return *perturbation_probability;
    return std::min(1.0, 20.0 / static_cast<double>(std::max<std::size_t>(1, dim)));
  }

  void validate() const {
    if (num_candidates < 1 || batch_size < 1 || realizations < 1) {
      throw InputError("AcquisitionConfig: counts must be positive");
    }
    if (batch_size > num_candidates) {
      throw InputError("AcquisitionConfig: batch size " + std::to_string(batch_size) +
                       " exceeds candidate count " + std::to_string(num_candidates));
    }
    if (perturbation_probability && !(*perturbation_probability > 0.0 && *perturbation_probability <= 1.0)) {
      throw InputError("AcquisitionConfig: perturbation probability must lie in (0, 1]");
    }
  }
};

struct CandidateSet {
  Matrix points;  // m x d
  bool degenerate = false;
};

/// Draws m candidates in the box. Each starts at the box center and replaces
/// each coordinate, with the given probability, by a uniform draw from the
/// box; at least one coordinate is always replaced.
inline CandidateSet sample_candidates(const TrustBox& box, std::size_t m, double perturbation_probability,
                                      Rng& rng) {
  const auto d = box.center.size();
  CandidateSet out;
  out.points.resize(static_cast<Eigen::Index>(m), d);
  out.degenerate = (box.upper - box.lower).maxCoeff() <= 0.0;
  if (out.degenerate) {
    for (Eigen::Index i = 0; i < out.points.rows(); ++i) out.points.row(i) = box.center.transpose();
    return out;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, d - 1);
  std::vector<char> mask(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < out.points.rows(); ++i) {
    bool any = false;
    for (Eigen::Index j = 0; j < d; ++j) {
      mask[j] = unit(rng) < perturbation_probability;
      any = any || mask[j];
    }
    if (!any) mask[pick(rng)] = 1;
    for (Eigen::Index j = 0; j < d; ++j) {
      double v = box.center[j];
      if (mask[j]) {
        v = box.lower[j] + unit(rng) * (box.upper[j] - box.lower[j]);
        // A uniform draw can land on the center; nudge to the wider side.
        if (v == box.center[j]) {
          v = (box.upper[j] - box.center[j] >= box.center[j] - box.lower[j]) ? box.upper[j] : box.lower[j];
        }
      }
      out.points(i, j) = v;
    }
  }
  return out;
}

/// Total order used to rank candidates: larger mean CI, then larger
/// optimistic gain sum_t max(0, y_t - g_t), then lower index.
inline std::vector<std::size_t> rank_candidates(std::span<const double> ci, std::span<const double> optimistic) {
  std::vector<std::size_t> order(ci.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ci[a] != ci[b]) return ci[a] > ci[b];
    if (optimistic[a] != optimistic[b]) return optimistic[a] > optimistic[b];
    return a < b;
  });
  return order;
}

struct AcquisitionResult {
  Matrix batch;                        // q x d
  std::vector<std::size_t> selected;   // candidate indices, best first
  std::vector<double> ci;              // mean CI per candidate
  std::vector<double> optimistic;      // mean optimistic gain per candidate
  CandidateSet candidates;
  double max_ci = 0.0;
  double zero_ci_fraction = 0.0;
};

struct CandidateScores {
  std::vector<double> ci;          // mean CI per candidate
  std::vector<double> optimistic;  // mean optimistic gain per candidate
};

/// Monte Carlo CI of every row of `points`: for each objective draw
/// `realizations` joint posterior samples over all points, then average the
/// per-realization coverage improvement. `models[t]` predicts column t of
/// `matrix`; `current_score` is the greedy score of `matrix` at K.
inline CandidateScores score_candidates(std::span<const GPModel> models, const ObjectiveMatrix& matrix,
                                        std::size_t k, double current_score, const Matrix& points,
                                        std::size_t realizations, Rng& rng) {
  const std::size_t num_obj = matrix.objectives();
  if (models.size() != num_obj) {
    throw InputError("acquisition: need one model per objective (" + std::to_string(num_obj) + "), got " +
                     std::to_string(models.size()));
  }
  if (realizations < 1) throw InputError("acquisition: need at least one realization");
  const auto m = static_cast<std::size_t>(points.rows());

  std::vector<double> incumbent(num_obj, 0.0);
  if (!matrix.empty()) incumbent = greedy_cover(matrix, k).incumbent;

  // realization[t] is an m x L block of joint draws for objective t.
  std::vector<Matrix> realization(num_obj);
  for (std::size_t t = 0; t < num_obj; ++t) {
    JointPosteriorSampler sampler(models[t], points);
    realization[t].resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(realizations));
    for (std::size_t l = 0; l < realizations; ++l) {
      realization[t].col(static_cast<Eigen::Index>(l)) = sampler.draw(rng);
    }
  }

  CandidateScores out;
  out.ci.assign(m, 0.0);
  out.optimistic.assign(m, 0.0);
  std::vector<double> row(num_obj);
  const double inv_l = 1.0 / static_cast<double>(realizations);
  for (std::size_t j = 0; j < m; ++j) {
    double ci_sum = 0.0;
    double opt_sum = 0.0;
    for (std::size_t l = 0; l < realizations; ++l) {
      for (std::size_t t = 0; t < num_obj; ++t) {
        row[t] = realization[t](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
        opt_sum += std::max(0.0, row[t] - incumbent[t]);
      }
      ci_sum += matrix.empty() ? 0.0 : coverage_improvement(matrix, k, current_score, row);
    }
    out.ci[j] = ci_sum * inv_l;
    out.optimistic[j] = opt_sum * inv_l;
  }
  return out;
}

/// Scores candidates inside `box` and returns the top-q batch.
inline AcquisitionResult acquire_batch(std::span<const GPModel> models, const ObjectiveMatrix& matrix,
                                       std::size_t k, double current_score, const TrustBox& box,
                                       const AcquisitionConfig& config, Rng& rng) {
  config.validate();
  const std::size_t m = config.num_candidates;
  const std::size_t dim = box.dim();

  AcquisitionResult out;
  out.candidates = sample_candidates(box, m, config.perturbation_for(dim), rng);
  const Matrix& points = out.candidates.points;
  auto scores = score_candidates(models, matrix, k, current_score, points, config.realizations, rng);
  out.ci = std::move(scores.ci);
  out.optimistic = std::move(scores.optimistic);

  const auto order = rank_candidates(out.ci, out.optimistic);
  out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.batch_size));
  out.batch.resize(static_cast<Eigen::Index>(config.batch_size), static_cast<Eigen::Index>(dim));
  for (std::size_t r = 0; r < config.batch_size; ++r) {
    out.batch.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(out.selected[r]));
  }
  out.max_ci = *std::max_element(out.ci.begin(), out.ci.end());
  out.zero_ci_fraction =
      static_cast<double>(std::count(out.ci.begin(), out.ci.end(), 0.0)) / static_cast<double>(m);
  return out;
}

}  // namespace covebo
