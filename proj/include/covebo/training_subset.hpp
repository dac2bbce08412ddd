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
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "covebo/coverage.hpp"
#include "covebo/random.hpp"

namespace covebo {

/// Chooses at most `cap` rows to train the surrogates on. Priority order:
/// covering-set members, the most recent batch [recent_begin, n), the top
/// rows of each objective (a quarter of the cap shared across objectives),
/// then a uniform fill. Returns sorted indices; all rows when n <= cap.
inline std::vector<std::size_t> select_training_subset(const ObjectiveMatrix& matrix,
                                                       std::span<const std::size_t> members,
                                                       std::size_t recent_begin, std::size_t cap,
                                                       Rng& rng) {
  const std::size_t n = matrix.rows();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (n <= cap) return all;

  std::vector<char> taken(n, 0);
  std::vector<std::size_t> chosen;
  chosen.reserve(cap);
  auto take = [&](std::size_t i) {
    if (chosen.size() < cap && i < n && !taken[i]) {
      taken[i] = 1;
      chosen.push_back(i);
    }
  };

  for (auto i : members) take(i);
  for (std::size_t i = recent_begin; i < n; ++i) take(i);

  const std::size_t num_obj = matrix.objectives();
  const std::size_t per_objective = std::max<std::size_t>(1, cap / (4 * num_obj));
  std::vector<std::size_t> order(n);
  for (std::size_t t = 0; t < num_obj; ++t) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t top = std::min(per_objective, n);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return matrix(a, t) > matrix(b, t) || (matrix(a, t) == matrix(b, t) && a < b);
                      });
    for (std::size_t r = 0; r < top; ++r) take(order[r]);
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  for (auto i : rest) {
    if (chosen.size() >= cap) break;
    take(i);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

}  // namespace covebo
