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
// Coverage scoring and covering-set selection over observed objective values.
//
// The coverage score of a set S of evaluated points is
//
//     c(S) = sum_t max_{i in S} y_i[t]
//
// Picking the best K rows is NP-hard in general, so the optimizer uses the
// greedy (1 - 1/e)-approximation; the exact enumerator is kept as an oracle
// for small instances.
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "covebo/errors.hpp"

namespace covebo {

/// Row-major n x T table of objective values; row i is y_i = f(x_i).
/// Every entry is finite.
class ObjectiveMatrix {
 public:
  ObjectiveMatrix() = default;

  explicit ObjectiveMatrix(std::size_t num_objectives) : num_objectives_(num_objectives) {
    if (num_objectives == 0) throw InputError("ObjectiveMatrix: need at least one objective");
  }

  ObjectiveMatrix(std::size_t rows, std::size_t num_objectives, std::vector<double> values)
      : ObjectiveMatrix(num_objectives) {
    if (values.size() != rows * num_objectives) {
      throw InputError("ObjectiveMatrix: expected " + std::to_string(rows * num_objectives) +
                       " values, got " + std::to_string(values.size()));
    }
    for (double v : values) check_finite(v);
    rows_ = rows;
    values_ = std::move(values);
  }

  static ObjectiveMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InputError("ObjectiveMatrix: cannot infer objective count from zero rows");
    ObjectiveMatrix m(rows.front().size());
    for (const auto& r : rows) m.append_row(r);
    return m;
  }

  void append_row(std::span<const double> row) {
    if (row.size() != num_objectives_) {
      throw InputError("ObjectiveMatrix: row has " + std::to_string(row.size()) +
                       " values, expected " + std::to_string(num_objectives_));
    }
    for (double v : row) check_finite(v);
    values_.insert(values_.end(), row.begin(), row.end());
    ++rows_;
  }

  std::size_t rows() const { return rows_; }
  std::size_t objectives() const { return num_objectives_; }
  bool empty() const { return rows_ == 0; }

  double operator()(std::size_t i, std::size_t t) const { return values_[i * num_objectives_ + t]; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * num_objectives_, num_objectives_};
  }

  std::span<const double> values() const { return values_; }

 private:
  static void check_finite(double v) {
    if (!std::isfinite(v)) throw InputError("ObjectiveMatrix: non-finite objective value");
  }

  std::size_t rows_ = 0;
  std::size_t num_objectives_ = 0;
  std::vector<double> values_;
};

/// K selected rows plus the per-objective incumbent g and the score c = sum(g).
struct CoveringSet {
  std::vector<std::size_t> members;  // selection order
  std::vector<double> incumbent;     // g_t = max over members of y[t]
  double score = 0.0;
};

struct GreedyOptions {
  // Worker threads for the marginal-gain scan. The reduction keeps the
  // lowest-index tie rule, so results match the sequential scan bit for bit.
  unsigned threads = 1;
  std::size_t min_rows_per_thread = 8192;
};

namespace detail {

inline void check_subset(std::size_t n, std::span<const std::size_t> subset) {
  if (subset.empty()) throw InputError("coverage: subset must be non-empty");
  std::vector<char> seen(n, 0);
  for (auto i : subset) {
    if (i >= n) throw InputError("coverage: row index " + std::to_string(i) + " out of range");
    if (seen[i]) throw InputError("coverage: duplicate row index " + std::to_string(i));
    seen[i] = 1;
  }
}

struct BestGain {
  double gain = -std::numeric_limits<double>::infinity();
  std::size_t index = std::numeric_limits<std::size_t>::max();
};

// Scan rows [begin, end) in ascending order keeping the first strict maximum.
template <typename RowAt>
BestGain scan_gains(const RowAt& row_at, std::size_t begin, std::size_t end, std::size_t num_obj,
                    const std::vector<double>& incumbent, bool first_round,
                    const std::vector<char>& selected) {
  BestGain best;
  for (std::size_t i = begin; i < end; ++i) {
    if (selected[i]) continue;
    const double* y = row_at(i);
    double gain = 0.0;
    if (first_round) {
      for (std::size_t t = 0; t < num_obj; ++t) gain += y[t];
    } else {
      for (std::size_t t = 0; t < num_obj; ++t) gain += std::max(0.0, y[t] - incumbent[t]);
    }
    if (gain > best.gain || best.index == std::numeric_limits<std::size_t>::max()) {
      best.gain = gain;
      best.index = i;
    }
  }
  return best;
}

/// Greedy max-coverage over an abstract row source. `row_at(i)` returns a
/// pointer to the T values of row i.
template <typename RowAt>
CoveringSet greedy_cover_rows(std::size_t n, std::size_t num_obj, const RowAt& row_at, std::size_t k,
                              const GreedyOptions& options = {}) {
  if (k < 1) throw InputError("greedy_cover: K must be at least 1");
  if (n == 0) throw InputError("greedy_cover: matrix has no rows");
  const std::size_t rounds = std::min(k, n);

  CoveringSet out;
  out.members.reserve(rounds);
  out.incumbent.assign(num_obj, -std::numeric_limits<double>::infinity());
  std::vector<char> selected(n, 0);

  unsigned workers = std::max(1u, options.threads);
  if (options.min_rows_per_thread > 0) {
    workers = static_cast<unsigned>(
        std::min<std::size_t>(workers, std::max<std::size_t>(1, n / options.min_rows_per_thread)));
  }

  for (std::size_t round = 0; round < rounds; ++round) {
    const bool first = round == 0;
    BestGain best;
    if (workers <= 1) {
      best = scan_gains(row_at, 0, n, num_obj, out.incumbent, first, selected);
    } else {
      std::vector<BestGain> partial(workers);
      std::vector<std::thread> pool;
      const std::size_t chunk = (n + workers - 1) / workers;
      for (unsigned w = 0; w < workers; ++w) {
        const std::size_t b = std::min(n, w * chunk);
        const std::size_t e = std::min(n, b + chunk);
        pool.emplace_back([&, w, b, e] {
          partial[w] = scan_gains(row_at, b, e, num_obj, out.incumbent, first, selected);
        });
      }
      for (auto& th : pool) th.join();
      // Chunks are ascending, so strict '>' keeps the lowest index on ties.
      for (const auto& p : partial) {
        if (p.index == std::numeric_limits<std::size_t>::max()) continue;
        if (best.index == std::numeric_limits<std::size_t>::max() || p.gain > best.gain) best = p;
      }
    }
    selected[best.index] = 1;
    out.members.push_back(best.index);
    const double* y = row_at(best.index);
    for (std::size_t t = 0; t < num_obj; ++t) out.incumbent[t] = std::max(out.incumbent[t], y[t]);
  }

  out.score = 0.0;
  for (double g : out.incumbent) out.score += g;
  return out;
}

}  // namespace detail

/// Sum over objectives of the best value attained by any row in `subset`.
inline double coverage_score(const ObjectiveMatrix& matrix, std::span<const std::size_t> subset) {
  detail::check_subset(matrix.rows(), subset);
  double score = 0.0;
  for (std::size_t t = 0; t < matrix.objectives(); ++t) {
    double best = -std::numeric_limits<double>::infinity();
    for (auto i : subset) best = std::max(best, matrix(i, t));
    score += best;
  }
  return score;
}

inline std::vector<double> incumbent_values(const ObjectiveMatrix& matrix,
                                            std::span<const std::size_t> subset) {
  detail::check_subset(matrix.rows(), subset);
  std::vector<double> g(matrix.objectives(), -std::numeric_limits<double>::infinity());
  for (auto i : subset) {
    for (std::size_t t = 0; t < matrix.objectives(); ++t) g[t] = std::max(g[t], matrix(i, t));
  }
  return g;
}

/// Greedy covering set of min(K, n) rows: each round adds the row with the
/// largest marginal coverage gain, lowest index first on ties.
inline CoveringSet greedy_cover(const ObjectiveMatrix& matrix, std::size_t k,
                                const GreedyOptions& options = {}) {
  const double* base = matrix.values().data();
  const std::size_t num_obj = matrix.objectives();
  return detail::greedy_cover_rows(
      matrix.rows(), num_obj, [base, num_obj](std::size_t i) { return base + i * num_obj; }, k,
      options);
}

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// Number of k-subsets of n items, saturating at `cap + 1`.
inline std::uint64_t bounded_binomial(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  // Exact as long as intermediate values stay below cap; C(n, i) grows with i.
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > cap) return cap + 1;
  }
  return static_cast<std::uint64_t>(acc);
}

/// Exact maximizer of coverage_score over all size-min(K, n) subsets,
/// lexicographically smallest index tuple on ties. Throws ResourceError when
/// C(n, K) exceeds `cap`.
inline CoveringSet brute_force_cover(const ObjectiveMatrix& matrix, std::size_t k,
                                     std::uint64_t cap = kDefaultEnumerationCap) {
  if (k < 1) throw InputError("brute_force_cover: K must be at least 1");
  const std::size_t n = matrix.rows();
  if (n == 0) throw InputError("brute_force_cover: matrix has no rows");
  const std::size_t size = std::min(k, n);
  const std::uint64_t count = bounded_binomial(n, size, cap);
  if (count > cap) {
    throw ResourceError("brute_force_cover: C(" + std::to_string(n) + ", " + std::to_string(size) +
                        ") exceeds the enumeration cap of " + std::to_string(cap) + " subsets");
  }

  const std::size_t num_obj = matrix.objectives();
  std::vector<std::size_t> combo(size);
  for (std::size_t i = 0; i < size; ++i) combo[i] = i;
  std::vector<std::size_t> best_combo;
  double best_score = -std::numeric_limits<double>::infinity();

  while (true) {
    double score = 0.0;
    for (std::size_t t = 0; t < num_obj; ++t) {
      double m = -std::numeric_limits<double>::infinity();
      for (auto i : combo) m = std::max(m, matrix(i, t));
      score += m;
    }
    if (best_combo.empty() || score > best_score) {
      best_score = score;
      best_combo = combo;
    }
    // Next combination in lexicographic order.
    std::size_t pos = size;
    while (pos > 0 && combo[pos - 1] == n - size + pos - 1) --pos;
    if (pos == 0) break;
    ++combo[pos - 1];
    for (std::size_t j = pos; j < size; ++j) combo[j] = combo[j - 1] + 1;
  }

  CoveringSet out;
  out.members = std::move(best_combo);
  out.incumbent = incumbent_values(matrix, out.members);
  out.score = best_score;
  return out;
}

/// max(0, c(greedy(D + candidate)) - current_score): the single-realization
/// coverage improvement of adding `candidate` to the observed data.
inline double coverage_improvement(const ObjectiveMatrix& matrix, std::size_t k, double current_score,
                                   std::span<const double> candidate) {
  const std::size_t num_obj = matrix.objectives();
  if (candidate.size() != num_obj) {
    throw InputError("coverage_improvement: candidate has " + std::to_string(candidate.size()) +
                     " values, expected " + std::to_string(num_obj));
  }
  for (double v : candidate) {
    if (!std::isfinite(v)) throw InputError("coverage_improvement: non-finite candidate value");
  }
  const std::size_t n = matrix.rows();
  const double* base = matrix.values().data();
  const double* extra = candidate.data();
  auto row_at = [=](std::size_t i) { return i < n ? base + i * num_obj : extra; };
  const CoveringSet augmented = detail::greedy_cover_rows(n + 1, num_obj, row_at, k);
  return std::max(0.0, augmented.score - current_score);
}

}  // namespace covebo
