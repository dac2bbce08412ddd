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
// Benchmark objective suites. All tasks live on the unit hypercube and
// report maximization values.
//
//  * "synthetic": K blocks of objectives; every objective in block j is a
//    Gaussian bump near a shared block center, so one point per block
//    covers the block and the coverage ceiling is known.
//  * "rover": a planar waypoint path is scored against T obstacle courses
//    whose wall gaps come in mutually exclusive groups.
//

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "covebo/coverage.hpp"
#include "covebo/errors.hpp"
#include "covebo/random.hpp"

namespace covebo {

using Partition = std::vector<std::vector<std::size_t>>;

/// Validates that `partition` splits {0..T-1} into `k` non-empty disjoint blocks.
inline void validate_partition(const Partition& partition, std::size_t num_objectives, std::size_t k) {
  if (partition.size() != k) {
    throw InputError("partition: expected " + std::to_string(k) + " blocks, got " +
                     std::to_string(partition.size()));
  }
  std::vector<int> seen(num_objectives, 0);
  for (const auto& block : partition) {
    if (block.empty()) throw InputError("partition: empty block");
    for (auto t : block) {
      if (t >= num_objectives) throw InputError("partition: objective index " + std::to_string(t) + " out of range");
      if (seen[t]++) throw InputError("partition: objective " + std::to_string(t) + " appears twice");
    }
  }
  for (std::size_t t = 0; t < num_objectives; ++t) {
    if (!seen[t]) throw InputError("partition: objective " + std::to_string(t) + " not assigned");
  }
}

struct Rect {
  double x0, y0, x1, y1;

  bool contains(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }

  /// Distance to the nearest edge for interior points, zero outside.
  double penetration(double x, double y) const {
    if (!contains(x, y)) return 0.0;
    return std::min(std::min(x - x0, x1 - x), std::min(y - y0, y1 - y));
  }
};

struct ObstacleCourse {
  std::vector<Rect> obstacles;
  std::array<double, 2> start{0.1, 0.5};
  std::array<double, 2> goal{0.9, 0.5};

  void validate() const {
    for (const auto& r : obstacles) {
      if (!(r.x0 < r.x1 && r.y0 < r.y1)) throw InputError("ObstacleCourse: malformed rectangle");
      if (r.contains(start[0], start[1]) || r.contains(goal[0], goal[1])) {
        throw InputError("ObstacleCourse: start or goal lies inside an obstacle");
      }
    }
  }
};

/// Geometry and scoring for the rover family. Policy vector x in [0,1]^d
/// holds d/2 waypoints (x[2i], x[2i+1]); the path runs start -> waypoints ->
/// goal as straight segments.
class RoverModel {
 public:
  RoverModel(std::vector<ObstacleCourse> courses, std::size_t dim, double penalty_weight,
             std::size_t samples_per_segment = 512)
      : courses_(std::move(courses)),
        dim_(dim),
        penalty_weight_(penalty_weight),
        samples_per_segment_(samples_per_segment) {
    if (courses_.empty()) throw InputError("rover: need at least one course");
    if (dim_ < 2 || dim_ % 2 != 0) throw InputError("rover: dimension must be even and positive");
    if (samples_per_segment_ < 1) throw InputError("rover: need at least one sample per segment");
    for (const auto& c : courses_) c.validate();
    const auto& s = courses_.front().start;
    const auto& g = courses_.front().goal;
    for (const auto& c : courses_) {
      if (c.start != s || c.goal != g) throw InputError("rover: all courses must share start and goal");
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t num_courses() const { return courses_.size(); }
  double penalty_weight() const { return penalty_weight_; }
  const std::vector<ObstacleCourse>& courses() const { return courses_; }

  std::vector<std::array<double, 2>> path(std::span<const double> x) const {
    std::vector<std::array<double, 2>> p;
    p.reserve(dim_ / 2 + 2);
    p.push_back(courses_.front().start);
    for (std::size_t i = 0; i + 1 < dim_; i += 2) p.push_back({x[i], x[i + 1]});
    p.push_back(courses_.front().goal);
    return p;
  }

  double path_length(std::span<const double> x) const {
    const auto p = path(x);
    double len = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) len += std::hypot(p[i][0] - p[i - 1][0], p[i][1] - p[i - 1][1]);
    return len;
  }

  double straight_length() const {
    const auto& s = courses_.front().start;
    const auto& g = courses_.front().goal;
    return std::hypot(g[0] - s[0], g[1] - s[1]);
  }

  /// Integral of penetration depth along the path (midpoint rule) for each course.
  std::vector<double> penetrations(std::span<const double> x) const {
    const auto p = path(x);
    std::vector<double> out(courses_.size(), 0.0);
    const double inv = 1.0 / static_cast<double>(samples_per_segment_);
    for (std::size_t i = 1; i < p.size(); ++i) {
      const double dx = p[i][0] - p[i - 1][0];
      const double dy = p[i][1] - p[i - 1][1];
      const double ds = std::hypot(dx, dy) * inv;
      if (ds == 0.0) continue;
      for (std::size_t s = 0; s < samples_per_segment_; ++s) {
        const double u = (static_cast<double>(s) + 0.5) * inv;
        const double px = p[i - 1][0] + u * dx;
        const double py = p[i - 1][1] + u * dy;
        for (std::size_t c = 0; c < courses_.size(); ++c) {
          for (const auto& r : courses_[c].obstacles) out[c] += r.penetration(px, py) * ds;
        }
      }
    }
    return out;
  }

  std::vector<double> evaluate(std::span<const double> x) const {
    const double excess = path_length(x) - straight_length();
    auto pen = penetrations(x);
    for (auto& v : pen) v = -(penalty_weight_ * v + excess);
    return pen;
  }

  nlohmann::json geometry_json() const {
    nlohmann::json j;
    j["start"] = courses_.front().start;
    j["goal"] = courses_.front().goal;
    j["dimension"] = dim_;
    j["penalty_weight"] = penalty_weight_;
    j["courses"] = nlohmann::json::array();
    for (const auto& c : courses_) {
      nlohmann::json obs = nlohmann::json::array();
      for (const auto& r : c.obstacles) obs.push_back({{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}});
      j["courses"].push_back({{"obstacles", obs}});
    }
    return j;
  }

 private:
  std::vector<ObstacleCourse> courses_;
  std::size_t dim_;
  double penalty_weight_;
  std::size_t samples_per_segment_;
};

/// Per-objective Gaussian bumps f_t(x) = exp(-|x - c_t|^2 / (2 sigma^2)).
struct ClusteredGeometry {
  std::vector<std::vector<double>> objective_centers;  // T x d
  double sigma = 0.12;
  Partition partition;  // K blocks
};

/// A black-box multi-objective problem on [0,1]^d (maximization).
struct Task {
  std::string id;
  std::size_t dim = 0;
  std::size_t num_objectives = 0;
  std::function<std::vector<double>(std::span<const double>)> fn;
  std::optional<double> ceiling;
  std::optional<Partition> true_partition;
  std::optional<std::size_t> ceiling_k;
  std::shared_ptr<const RoverModel> rover;
  std::shared_ptr<const ClusteredGeometry> clustered;
  nlohmann::json params;

  std::vector<double> evaluate(std::span<const double> x) const {
    if (x.size() != dim) {
      throw InputError("task " + id + ": point has " + std::to_string(x.size()) + " coordinates, expected " +
                       std::to_string(dim));
    }
    return fn(x);
  }
};

/// Evaluates each point in order. Throws InputError naming the first
/// point outside [0,1]^d.
inline std::vector<std::vector<double>> evaluate_batch(const Task& task,
                                                       const std::vector<std::vector<double>>& points) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != task.dim) {
      throw InputError("evaluate_batch: point " + std::to_string(i) + " has wrong dimension");
    }
    for (double v : points[i]) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InputError("evaluate_batch: point " + std::to_string(i) + " lies outside the unit hypercube");
      }
    }
  }
  std::vector<std::vector<double>> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(task.evaluate(p));
  return out;
}

namespace detail {

inline double clustered_value(const ClusteredGeometry& g, std::size_t t, std::span<const double> x) {
  const auto& c = g.objective_centers[t];
  double sq = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - c[j];
    sq += diff * diff;
  }
  return std::exp(-sq / (2.0 * g.sigma * g.sigma));
}

// Gradient ascent on sum_{t in block} f_t from `start`, staying in [0,1]^d.
inline std::vector<double> ascend_block(const ClusteredGeometry& g, const std::vector<std::size_t>& block,
                                        std::vector<double> x) {
  const std::size_t d = x.size();
  auto value = [&](const std::vector<double>& p) {
    double v = 0.0;
    for (auto t : block) v += clustered_value(g, t, p);
    return v;
  };
  double step = g.sigma * g.sigma;
  double fx = value(x);
  std::vector<double> grad(d), trial(d);
  for (int iter = 0; iter < 5000; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (auto t : block) {
      const double f = clustered_value(g, t, x);
      for (std::size_t j = 0; j < d; ++j) grad[j] += f * (g.objective_centers[t][j] - x[j]) / (g.sigma * g.sigma);
    }
    double gnorm = 0.0;
    for (double v : grad) gnorm += v * v;
    if (std::sqrt(gnorm) < 1e-12) break;
    bool moved = false;
    while (step > 1e-16) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = std::clamp(x[j] + step * grad[j], 0.0, 1.0);
      const double ft = value(trial);
      if (ft > fx) {
        x = trial;
        fx = ft;
        step *= 1.5;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return x;
}

}  // namespace detail

/// Builds a task from explicit bump centers. The ceiling is the coverage of
/// the K block optima, each found by local ascent started from the block
/// centroid and from every bump center in the block.
inline Task make_clustered_task(ClusteredGeometry geometry, std::string id = "synthetic") {
  const std::size_t num_obj = geometry.objective_centers.size();
  if (num_obj == 0) throw InputError("clustered task: no objectives");
  const std::size_t d = geometry.objective_centers.front().size();
  if (d == 0) throw InputError("clustered task: zero dimension");
  for (const auto& c : geometry.objective_centers) {
    if (c.size() != d) throw InputError("clustered task: inconsistent center dimension");
  }
  if (!(geometry.sigma > 0.0)) throw InputError("clustered task: sigma must be positive");
  validate_partition(geometry.partition, num_obj, geometry.partition.size());

  auto shared = std::make_shared<const ClusteredGeometry>(std::move(geometry));
  const auto& g = *shared;

  ObjectiveMatrix optima(num_obj);
  for (const auto& block : g.partition) {
    std::vector<std::vector<double>> starts;
    std::vector<double> centroid(d, 0.0);
    for (auto t : block) {
      for (std::size_t j = 0; j < d; ++j) centroid[j] += g.objective_centers[t][j] / static_cast<double>(block.size());
      starts.push_back(g.objective_centers[t]);
    }
    starts.insert(starts.begin(), centroid);
    double best = -1.0;
    std::vector<double> best_x;
    for (auto& s : starts) {
      for (auto& v : s) v = std::clamp(v, 0.0, 1.0);
      auto x = detail::ascend_block(g, block, s);
      double v = 0.0;
      for (auto t : block) v += detail::clustered_value(g, t, x);
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    std::vector<double> y(num_obj);
    for (std::size_t t = 0; t < num_obj; ++t) y[t] = detail::clustered_value(g, t, best_x);
    optima.append_row(y);
  }
  std::vector<std::size_t> all(optima.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  Task task;
  task.id = std::move(id);
  task.dim = d;
  task.num_objectives = num_obj;
  task.ceiling = coverage_score(optima, all);
  task.ceiling_k = g.partition.size();
  task.true_partition = g.partition;
  task.clustered = shared;
  task.fn = [shared](std::span<const double> x) {
    std::vector<double> y(shared->objective_centers.size());
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = detail::clustered_value(*shared, t, x);
    return y;
  };
  return task;
}

/// Default bump width for the synthetic family at dimension d.
inline double default_synthetic_sigma(std::size_t d) { return 0.1 * std::sqrt(static_cast<double>(d)); }

/// T objectives in K contiguous blocks. Block centers are spread by a
/// farthest-point rule over jittered vertices of [0.2, 0.8]^d; objective offsets have norm at
/// most sigma/4 (zero for singleton blocks). Centers must be far enough
/// apart that each bump responds below 1e-3 * conflict_strength at every
/// other block's center.
inline Task make_synthetic_clustered(std::size_t num_objectives, std::size_t k, std::size_t d,
                                     double conflict_strength, std::uint64_t seed,
                                     std::optional<double> sigma_override = std::nullopt) {
  if (k < 1 || k > num_objectives) throw InputError("synthetic: need 1 <= K <= T");
  if (d < 2) throw InputError("synthetic: need d >= 2");
  if (!(conflict_strength > 0.0 && conflict_strength <= 1.0)) {
    throw InputError("synthetic: conflict_strength must lie in (0, 1]");
  }
  const double sigma = sigma_override.value_or(default_synthetic_sigma(d));
  if (!(sigma > 0.0)) throw InputError("synthetic: sigma must be positive");

  Partition partition(k);
  for (std::size_t j = 0, t = 0; j < k; ++j) {
    const std::size_t size = num_objectives / k + (j < num_objectives % k ? 1 : 0);
    for (std::size_t r = 0; r < size; ++r) partition[j].push_back(t++);
  }

  Rng rng = make_rng(seed, {0x5359u});
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  // Near-vertex points of [0.2, 0.8]^d, so centers can sit far apart.
  auto random_point = [&] {
    std::vector<double> p(d);
    for (auto& v : p) v = (coin(rng) ? 0.8 : 0.2) + jitter(rng);
    return p;
  };
  auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
  };

  std::vector<std::vector<double>> centers{random_point()};
  constexpr int kCandidates = 2000;
  while (centers.size() < k) {
    std::vector<double> best;
    double best_d = -1.0;
    for (int c = 0; c < kCandidates; ++c) {
      auto p = random_point();
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& q : centers) nearest = std::min(nearest, dist(p, q));
      if (nearest > best_d) {
        best_d = nearest;
        best = std::move(p);
      }
    }
    centers.push_back(std::move(best));
  }

  // f_t at another block's center: exp(-(D - 2 sigma/4)^2 / (2 sigma^2)) at worst.
  const double required = sigma * std::sqrt(2.0 * std::log(1000.0 / conflict_strength)) + 0.5 * sigma;
  double min_sep = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) min_sep = std::min(min_sep, dist(centers[a], centers[b]));
  }
  if (k > 1 && min_sep < required) {
    throw InputError("synthetic: cannot separate " + std::to_string(k) + " blocks by " + std::to_string(required) +
                     " at sigma " + std::to_string(sigma) + " in dimension " + std::to_string(d));
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ClusteredGeometry geometry;
  geometry.sigma = sigma;
  geometry.partition = partition;
  geometry.objective_centers.resize(num_objectives);
  for (std::size_t j = 0; j < k; ++j) {
    for (auto t : partition[j]) {
      std::vector<double> offset(d);
      double norm = 0.0;
      for (auto& v : offset) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      const double radius = partition[j].size() > 1 ? 0.25 * sigma * unit(rng) : 0.0;
      geometry.objective_centers[t].resize(d);
      for (std::size_t i = 0; i < d; ++i) {
        geometry.objective_centers[t][i] = centers[j][i] + (norm > 0.0 ? radius * offset[i] / norm : 0.0);
      }
    }
  }

  Task task = make_clustered_task(std::move(geometry), "synthetic");
  task.params = {{"T", num_objectives}, {"K", k},        {"d", d},
                 {"conflict_strength", conflict_strength}, {"seed", seed}, {"sigma", sigma}};
  return task;
}

/// Courses for the rover family. Each course has a thick vertical wall with
/// one gap; even-numbered course groups (courses 1, 2 mod 4 in 0-based
/// order) put the gap high and the rest low, so no single path clears both
/// groups. Each course adds a small course-specific block that a path
/// through its own gap can avoid.
inline std::vector<ObstacleCourse> default_rover_courses(std::size_t num_courses) {
  std::vector<ObstacleCourse> courses;
  for (std::size_t c = 0; c < num_courses; ++c) {
    const bool high = (c % 4 == 1 || c % 4 == 2);
    const double shift = 0.02 * static_cast<double>(c / 4);
    const double gap_lo = high ? 0.68 + shift : 0.12 - shift;
    const double gap_hi = gap_lo + 0.2;
    ObstacleCourse course;
    course.obstacles.push_back({0.4, 0.0, 0.6, gap_lo});
    course.obstacles.push_back({0.4, gap_hi, 0.6, 1.0});
    // Small block on the straight line, either before or after the wall.
    const double bx = (c % 2 == 0) ? 0.22 : 0.72;
    course.obstacles.push_back({bx, 0.44, bx + 0.06, 0.56});
    courses.push_back(std::move(course));
  }
  return courses;
}

inline Task make_rover_task(std::size_t num_objectives, std::vector<ObstacleCourse> courses, std::size_t d,
                            double penalty_weight) {
  if (courses.size() != num_objectives) {
    throw InputError("rover: T must equal the number of courses");
  }
  auto model = std::make_shared<const RoverModel>(std::move(courses), d, penalty_weight);
  Task task;
  task.id = "rover";
  task.dim = d;
  task.num_objectives = num_objectives;
  task.rover = model;
  task.fn = [model](std::span<const double> x) { return model->evaluate(x); };
  task.params = {{"T", num_objectives}, {"d", d}, {"penalty_weight", penalty_weight}};
  return task;
}

struct TaskInfo {
  std::string id;
  std::size_t dim;
  std::size_t num_objectives;
  std::string description;
};

inline std::vector<TaskInfo> list_tasks() {
  return {
      {"synthetic", 10, 6, "clustered Gaussian bumps with analytic ceiling (params: T, K, d, conflict_strength, seed, sigma)"},
      {"rover", 20, 4, "waypoint path over grouped obstacle courses (params: T, d, penalty_weight)"},
  };
}

/// Registry lookup. Missing parameters take the defaults shown by list_tasks().
inline Task make_task(const std::string& id, const nlohmann::json& params = nlohmann::json::object()) {
  auto get_size = [&](const char* key, std::size_t fallback) {
    return params.contains(key) ? params.at(key).get<std::size_t>() : fallback;
  };
  if (id == "synthetic") {
    const std::size_t t = get_size("T", 6);
    const std::size_t k = get_size("K", 3);
    const std::size_t d = get_size("d", 10);
    const double strength = params.value("conflict_strength", 1.0);
    const std::uint64_t seed = params.value("seed", std::uint64_t{0});
    std::optional<double> sigma;
    if (params.contains("sigma")) sigma = params.at("sigma").get<double>();
    return make_synthetic_clustered(t, k, d, strength, seed, sigma);
  }
  if (id == "rover") {
    const std::size_t t = get_size("T", 4);
    const std::size_t d = get_size("d", 20);
    const double w = params.value("penalty_weight", 100.0);
    return make_rover_task(t, default_rover_courses(t), d, w);
  }
  throw InputError("unknown task id '" + id + "'");
}

}  // namespace covebo
