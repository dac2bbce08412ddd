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
// Coverage optimization loop and baselines.
//
// One step of the main loop:
//   1. greedy-cover all data at K and center region k on member k;
//   2. fit one GP per objective on the training subset;
//   3. each region proposes q candidates by coverage-improvement acquisition;
//   4. evaluate all K*q points and greedy-cover again;
//   5. region k succeeds iff the best coverage rose and one of its points
//      is in the new covering set; every region then updates its length.
//
// The baselines reuse the same loop with a projected objective: one
// objective at a time (per_objective) or one block sum per region
// (oracle_partition), with K = 1.
//

#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "covebo/acquisition.hpp"
#include "covebo/coverage.hpp"
#include "covebo/errors.hpp"
#include "covebo/gp.hpp"
#include "covebo/random.hpp"
#include "covebo/tasks.hpp"
#include "covebo/training_subset.hpp"
#include "covebo/trust_region.hpp"

namespace covebo {

enum class Mode { mocobo, random, per_objective, oracle_partition };

inline std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::mocobo: return "mocobo";
    case Mode::random: return "random";
    case Mode::per_objective: return "per_objective";
    case Mode::oracle_partition: return "oracle_partition";
  }
  return "unknown";
}

inline Mode parse_mode(const std::string& name) {
  if (name == "mocobo") return Mode::mocobo;
  if (name == "random") return Mode::random;
  if (name == "per_objective") return Mode::per_objective;
  if (name == "oracle_partition") return Mode::oracle_partition;
  throw InputError("unknown mode '" + name + "'");
}

struct RunConfig {
  std::string task_id = "synthetic";
  nlohmann::json task_params = nlohmann::json::object();
  std::size_t k = 3;
  std::size_t num_objectives = 0;  // 0: take from the task
  std::size_t budget = 2000;
  std::size_t n_init = 100;
  AcquisitionConfig acquisition;
  std::optional<TrustRegionConfig> trust_region;  // unset: defaults for (d, q)
  GPFitConfig gp;
  std::size_t max_train = 1000;
  // Re-optimize hyperparameters every this many steps; in between the
  // previous hyperparameters are reused on the new training data.
  std::size_t refit_every = 1;
  // Start the first hyperparameter restart from the previous step's fit.
  bool warm_start = false;
  std::uint64_t seed = 0;
  Mode mode = Mode::mocobo;
  std::optional<Partition> partition;
  bool dedup = false;
};

struct RegionSnapshot {
  int region = 0;
  double length = 0.0;
  int success_count = 0;
  int failure_count = 0;
  int restarts = 0;
  bool success = false;
  double max_ci = 0.0;
  double zero_ci_fraction = 0.0;
};

struct StepDiagnostics {
  std::size_t step = 0;
  int run = 0;  // sub-run index for the baselines, 0 otherwise
  double cover_score_before = 0.0;
  double cover_score_after = 0.0;
  std::vector<RegionSnapshot> regions;
  std::vector<GPHyperparams> hyperparams;
  std::vector<bool> fallback;
};

struct EvaluationRecord {
  std::size_t step = 0;
  int region = -1;  // -1: initial design or random sampling
  std::vector<double> x;
  std::vector<double> y;
  double best_coverage = 0.0;
};

struct RunResult {
  RunConfig config;
  std::size_t dim = 0;
  std::size_t num_objectives = 0;
  std::vector<EvaluationRecord> log;
  std::vector<double> trajectory;  // trajectory[i]: best coverage after i + 1 evaluations
  CoveringSet final_set;
  std::size_t steps = 0;
  std::optional<double> t_solution_score;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<double> greedy_seconds;
  double wall_seconds = 0.0;
  std::optional<std::string> error;

  double final_score() const { return trajectory.empty() ? 0.0 : trajectory.back(); }
  std::size_t evaluations() const { return log.size(); }
};

inline void validate_config(const RunConfig& config, const Task& task) {
  if (config.num_objectives != 0 && config.num_objectives != task.num_objectives) {
    throw InputError("RunConfig: T = " + std::to_string(config.num_objectives) + " but task has " +
                     std::to_string(task.num_objectives) + " objectives");
  }
  if (config.k < 1 || config.k > task.num_objectives) throw InputError("RunConfig: need 1 <= K <= T");
  if (config.budget < 1) throw InputError("RunConfig: budget must be positive");
  if (config.n_init < 1) throw InputError("RunConfig: n_init must be positive");
  if (config.budget < config.n_init) throw InputError("RunConfig: budget must be at least n_init");
  if (config.max_train < 2) throw InputError("RunConfig: max_train must be at least 2");
  if (config.refit_every < 1) throw InputError("RunConfig: refit_every must be positive");
  config.acquisition.validate();
  if (config.trust_region) config.trust_region->validate();
  if (config.partition) validate_partition(*config.partition, task.num_objectives, config.k);
  if (config.mode == Mode::oracle_partition && !config.partition && !task.true_partition) {
    throw InputError("RunConfig: oracle_partition mode needs a partition");
  }
}

/// Running maximum of the greedy coverage of every prefix of `matrix`.
/// `best_set` receives the covering set that attained the final value.
inline std::vector<double> running_best_coverage(const ObjectiveMatrix& matrix, std::size_t k,
                                                 CoveringSet* best_set = nullptr) {
  std::vector<double> out;
  out.reserve(matrix.rows());
  ObjectiveMatrix prefix(matrix.objectives());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    prefix.append_row(matrix.row(i));
    CoveringSet cover = greedy_cover(prefix, k);
    if (cover.score > best || i == 0) {
      best = cover.score;
      if (best_set) *best_set = std::move(cover);
    }
    out.push_back(best);
  }
  return out;
}

namespace detail {

using Projector = std::function<std::vector<double>(std::span<const double>)>;

inline constexpr std::uint64_t kInitStream = 1;

inline std::vector<std::vector<double>> uniform_design(std::size_t n, std::size_t d, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  for (auto& p : pts) {
    for (auto& v : p) v = unit(rng);
  }
  return pts;
}

struct LoopState {
  std::vector<std::vector<double>> x;
  std::vector<std::vector<double>> y;  // full task objectives
  std::vector<std::size_t> step;
  std::vector<int> region;
  std::size_t steps = 0;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<double> greedy_seconds;
  std::optional<std::string> error;
};

/// Assigns covering-set members to regions so that each region moves as little
/// as possible from its previous center (minimum total squared distance;
/// exhaustive for K <= 7, greedy closest pairs beyond). Returns the member
/// slot for each region.
inline std::vector<std::size_t> match_regions(const std::vector<Eigen::VectorXd>& previous,
                                              const std::vector<Eigen::VectorXd>& members) {
  const std::size_t k = previous.size();
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (members.size() != k || k < 2) return perm;
  std::vector<double> cost(k * k);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t m = 0; m < k; ++m) cost[r * k + m] = (previous[r] - members[m]).squaredNorm();
  }
  if (k <= 7) {
    std::vector<std::size_t> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (std::size_t r = 0; r < k; ++r) c += cost[r * k + perm[r]];
      if (c < best_cost) {
        best_cost = c;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  std::vector<char> region_done(k, 0), member_done(k, 0);
  for (std::size_t round = 0; round < k; ++round) {
    std::size_t br = 0, bm = 0;
    double bc = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < k; ++r) {
      if (region_done[r]) continue;
      for (std::size_t m = 0; m < k; ++m) {
        if (!member_done[m] && cost[r * k + m] < bc) {
          bc = cost[r * k + m];
          br = r;
          bm = m;
        }
      }
    }
    region_done[br] = member_done[bm] = 1;
    perm[br] = bm;
  }
  return perm;
}

inline CoveringSet timed_greedy(const ObjectiveMatrix& m, std::size_t k, std::vector<double>& timings) {
  const auto t0 = std::chrono::steady_clock::now();
  CoveringSet c = greedy_cover(m, k);
  timings.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return c;
}

/// Trust-region loop on the projected objectives. `init` rows are already
/// evaluated and count against `budget`. Each step adds exactly k * q rows.
inline LoopState trust_region_loop(const Task& task, const Projector& project, std::size_t proj_objectives,
                                   std::size_t k, std::size_t budget, const std::vector<std::vector<double>>& init_x,
                                   const std::vector<std::vector<double>>& init_y, const RunConfig& config,
                                   std::uint64_t stream, int run_index) {
  const std::size_t d = task.dim;
  const std::size_t q = config.acquisition.batch_size;
  const TrustRegionConfig tr_config =
      config.trust_region.value_or(TrustRegionConfig::defaults_for(d, q));

  LoopState state;
  ObjectiveMatrix proj(proj_objectives);
  for (std::size_t i = 0; i < init_x.size(); ++i) {
    state.x.push_back(init_x[i]);
    state.y.push_back(init_y[i]);
    state.step.push_back(0);
    state.region.push_back(-1);
    proj.append_row(project(init_y[i]));
  }

  std::vector<TrustRegionState> regions(k, TrustRegionState::initial(tr_config, Eigen::VectorXd::Zero(d)));
  std::vector<std::optional<GPHyperparams>> previous(proj_objectives);
  double best_score = proj.empty() ? -std::numeric_limits<double>::infinity() : greedy_cover(proj, k).score;
  std::size_t last_batch_begin = proj.rows();

  while (proj.rows() >= 2 && proj.rows() + k * q <= budget) {
    const std::size_t step = ++state.steps;
    const CoveringSet cover = timed_greedy(proj, k, state.greedy_seconds);

    Rng subset_rng = make_rng(config.seed, {stream, step, 0x7375u});
    const auto train_idx = select_training_subset(proj, cover.members, last_batch_begin, config.max_train, subset_rng);
    Matrix train_x(static_cast<Eigen::Index>(train_idx.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < train_idx.size(); ++r) {
      for (std::size_t j = 0; j < d; ++j) train_x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = state.x[train_idx[r]][j];
    }

    StepDiagnostics diag;
    diag.step = step;
    diag.run = run_index;
    diag.cover_score_before = cover.score;

    std::vector<GPModel> models;
    models.reserve(proj_objectives);
    Vector mean_lengthscale = Vector::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t t = 0; t < proj_objectives; ++t) {
      Vector targets(static_cast<Eigen::Index>(train_idx.size()));
      for (std::size_t r = 0; r < train_idx.size(); ++r) targets[static_cast<Eigen::Index>(r)] = proj(train_idx[r], t);
      const bool refit = !previous[t] || (step - 1) % config.refit_every == 0;
      if (refit) {
        GPFitConfig gp = config.gp;
        gp.seed = make_rng(config.seed, {stream, step, 0x6770u, t})();
        models.push_back(fit_gp(train_x, targets, gp, config.warm_start ? previous[t] : std::nullopt));
      } else {
        models.emplace_back(*previous[t], train_x, targets, config.gp.standardize);
      }
      if (!models.back().used_fallback()) previous[t] = models.back().hyperparams();
      mean_lengthscale += models.back().hyperparams().lengthscales;
      diag.hyperparams.push_back(models.back().hyperparams());
      diag.fallback.push_back(models.back().used_fallback());
    }
    mean_lengthscale /= static_cast<double>(proj_objectives);

    // Propose from every region before evaluating anything.
    std::vector<Matrix> batches(k);
    std::vector<AcquisitionResult> acquisitions(k);
    std::vector<std::size_t> slot(k);
    std::iota(slot.begin(), slot.end(), std::size_t{0});
    if (step > 1 && cover.members.size() == k) {
      std::vector<Eigen::VectorXd> prev(k), pts(k);
      for (std::size_t r = 0; r < k; ++r) {
        prev[r] = regions[r].center;
        pts[r] = Eigen::Map<const Eigen::VectorXd>(state.x[cover.members[r]].data(), static_cast<Eigen::Index>(d));
      }
      slot = match_regions(prev, pts);
    }
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t member = cover.members[slot[r] % cover.members.size()];
      regions[r].center = Eigen::Map<const Eigen::VectorXd>(state.x[member].data(), static_cast<Eigen::Index>(d));
      const TrustBox box = tr_candidate_box(regions[r], mean_lengthscale);
      Rng rng = make_rng(config.seed, {stream, step, 0x7267u, r});
      AcquisitionConfig acq = config.acquisition;
      if (config.dedup) acq.batch_size = acq.num_candidates;
      acquisitions[r] = acquire_batch(models, proj, k, cover.score, box, acq, rng);
      if (!config.dedup) {
        batches[r] = acquisitions[r].batch;
      } else {
        batches[r].resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(d));
        std::size_t filled = 0;
        auto seen = [&](const Eigen::RowVectorXd& p) {
          for (const auto& x : state.x) {
            if (Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(d)) == p) return true;
          }
          for (std::size_t rr = 0; rr <= r; ++rr) {
            const auto rows = rr == r ? filled : q;
            for (std::size_t i = 0; i < rows; ++i) {
              if (batches[rr].row(static_cast<Eigen::Index>(i)) == p) return true;
            }
          }
          return false;
        };
        const Matrix& ranked = acquisitions[r].batch;
        for (Eigen::Index i = 0; i < ranked.rows() && filled < q; ++i) {
          if (!seen(ranked.row(i))) batches[r].row(static_cast<Eigen::Index>(filled++)) = ranked.row(i);
        }
        for (Eigen::Index i = 0; filled < q; ++i) {
          batches[r].row(static_cast<Eigen::Index>(filled++)) = ranked.row(i);
        }
      }
    }

    std::vector<std::size_t> batch_begin(k);
    for (std::size_t r = 0; r < k; ++r) {
      batch_begin[r] = proj.rows();
      for (Eigen::Index i = 0; i < batches[r].rows(); ++i) {
        std::vector<double> x(d);
        for (std::size_t j = 0; j < d; ++j) x[j] = batches[r](i, static_cast<Eigen::Index>(j));
        std::vector<double> y;
        try {
          y = task.evaluate(x);
        } catch (const std::exception& e) {
          state.error = std::string("task evaluation failed: ") + e.what();
          return state;
        }
        proj.append_row(project(y));
        state.x.push_back(std::move(x));
        state.y.push_back(std::move(y));
        state.step.push_back(step);
        state.region.push_back(static_cast<int>(r));
      }
    }
    last_batch_begin = batch_begin.front();

    const CoveringSet after = timed_greedy(proj, k, state.greedy_seconds);
    const bool improved = after.score > best_score;
    diag.cover_score_after = after.score;
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t lo = batch_begin[r];
      const std::size_t hi = lo + q;
      const bool contributed =
          std::any_of(after.members.begin(), after.members.end(), [&](std::size_t i) { return i >= lo && i < hi; });
      const bool success = improved && contributed;
      regions[r] = tr_update(regions[r], tr_config, success);
      RegionSnapshot snap;
      snap.region = static_cast<int>(r);
      snap.length = regions[r].length;
      snap.success_count = regions[r].success_count;
      snap.failure_count = regions[r].failure_count;
      snap.restarts = regions[r].restarts;
      snap.success = success;
      snap.max_ci = acquisitions[r].max_ci;
      snap.zero_ci_fraction = acquisitions[r].zero_ci_fraction;
      diag.regions.push_back(snap);
    }
    best_score = std::max(best_score, after.score);
    state.diagnostics.push_back(std::move(diag));
  }
  return state;
}

inline void finalize_log(RunResult& result, const std::vector<std::vector<double>>& x,
                         const std::vector<std::vector<double>>& y, const std::vector<std::size_t>& step,
                         const std::vector<int>& region) {
  result.log.clear();
  result.log.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    result.log.push_back({step[i], region[i], x[i], y[i], 0.0});
  }
}

inline ObjectiveMatrix log_matrix(const std::vector<EvaluationRecord>& log, std::size_t num_objectives) {
  ObjectiveMatrix m(num_objectives);
  for (const auto& rec : log) m.append_row(rec.y);
  return m;
}

inline void attach_greedy_trajectory(RunResult& result) {
  if (result.log.empty()) return;
  const ObjectiveMatrix m = log_matrix(result.log, result.num_objectives);
  result.trajectory = running_best_coverage(m, result.config.k, &result.final_set);
  for (std::size_t i = 0; i < result.log.size(); ++i) result.log[i].best_coverage = result.trajectory[i];
}

inline std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>> initial_design(
    const Task& task, const RunConfig& config, std::size_t n, std::optional<std::string>& error) {
  Rng rng = make_rng(config.seed, {kInitStream});
  auto x = uniform_design(n, task.dim, rng);
  std::vector<std::vector<double>> y;
  y.reserve(n);
  for (const auto& p : x) {
    try {
      y.push_back(task.evaluate(p));
    } catch (const std::exception& e) {
      error = std::string("task evaluation failed: ") + e.what();
      x.resize(y.size());
      break;
    }
  }
  return {std::move(x), std::move(y)};
}

// Sub-run results interleaved step by step after the shared initial design.
struct MergedLog {
  std::vector<std::vector<double>> x, y;
  std::vector<std::size_t> step;
  std::vector<int> region;
  std::vector<int> owner;  // sub-run index, -1 for shared rows
};

inline MergedLog merge_subruns(const std::vector<LoopState>& runs, std::size_t n_init) {
  MergedLog merged;
  if (runs.empty()) return merged;
  for (std::size_t i = 0; i < n_init && i < runs.front().x.size(); ++i) {
    merged.x.push_back(runs.front().x[i]);
    merged.y.push_back(runs.front().y[i]);
    merged.step.push_back(0);
    merged.region.push_back(-1);
    merged.owner.push_back(-1);
  }
  std::vector<std::size_t> cursor(runs.size(), n_init);
  for (std::size_t s = 1;; ++s) {
    bool any = false;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto& run = runs[r];
      while (cursor[r] < run.x.size() && run.step[cursor[r]] == s) {
        merged.x.push_back(run.x[cursor[r]]);
        merged.y.push_back(run.y[cursor[r]]);
        merged.step.push_back(s);
        merged.region.push_back(static_cast<int>(r));
        merged.owner.push_back(static_cast<int>(r));
        ++cursor[r];
        any = true;
      }
    }
    if (!any) break;
  }
  return merged;
}

inline void absorb_subrun_diagnostics(RunResult& result, std::vector<LoopState>& runs) {
  for (auto& run : runs) {
    result.steps += run.steps;
    for (auto& d : run.diagnostics) result.diagnostics.push_back(std::move(d));
    result.greedy_seconds.insert(result.greedy_seconds.end(), run.greedy_seconds.begin(), run.greedy_seconds.end());
    if (run.error && !result.error) result.error = run.error;
  }
}

}  // namespace detail

/// Runs the K-region coverage optimizer on `task`.
inline RunResult mocobo_run(const RunConfig& config, const Task& task) {
  if (config.mode != Mode::mocobo) throw InputError("mocobo_run: mode must be mocobo");
  validate_config(config, task);
  const auto t0 = std::chrono::steady_clock::now();

  RunResult result;
  result.config = config;
  result.dim = task.dim;
  result.num_objectives = task.num_objectives;

  auto [init_x, init_y] = detail::initial_design(task, config, config.n_init, result.error);
  detail::LoopState state;
  if (!result.error) {
    auto identity = [](std::span<const double> y) { return std::vector<double>(y.begin(), y.end()); };
    state = detail::trust_region_loop(task, identity, task.num_objectives, config.k, config.budget, init_x, init_y,
                                      config, 0x6d6fu, 0);
  } else {
    state.x = init_x;
    state.y = init_y;
    state.step.assign(init_x.size(), 0);
    state.region.assign(init_x.size(), -1);
  }
  result.steps = state.steps;
  result.diagnostics = std::move(state.diagnostics);
  result.greedy_seconds = std::move(state.greedy_seconds);
  if (state.error) result.error = state.error;
  detail::finalize_log(result, state.x, state.y, state.step, state.region);
  detail::attach_greedy_trajectory(result);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Baselines: uniform random search, one trust-region run per objective,
/// or one trust-region run per block of a fixed partition.
inline RunResult baseline_run(const RunConfig& config, const Task& task) {
  if (config.mode == Mode::mocobo) throw InputError("baseline_run: mode must be a baseline");
  validate_config(config, task);
  const auto t0 = std::chrono::steady_clock::now();

  RunResult result;
  result.config = config;
  result.dim = task.dim;
  result.num_objectives = task.num_objectives;

  if (config.mode == Mode::random) {
    auto [x, y] = detail::initial_design(task, config, config.budget, result.error);
    detail::finalize_log(result, x, y, std::vector<std::size_t>(x.size(), 0), std::vector<int>(x.size(), -1));
    detail::attach_greedy_trajectory(result);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }

  auto [init_x, init_y] = detail::initial_design(task, config, config.n_init, result.error);
  const std::size_t num_obj = task.num_objectives;

  std::vector<detail::Projector> projectors;
  if (config.mode == Mode::per_objective) {
    for (std::size_t t = 0; t < num_obj; ++t) {
      projectors.push_back([t](std::span<const double> y) { return std::vector<double>{y[t]}; });
    }
  } else {
    const Partition partition = config.partition.value_or(*task.true_partition);
    for (const auto& block : partition) {
      projectors.push_back([block](std::span<const double> y) {
        double s = 0.0;
        for (auto t : block) s += y[t];
        return std::vector<double>{s};
      });
    }
  }

  const std::size_t runs = projectors.size();
  const std::size_t remaining = config.budget - init_x.size();
  std::vector<detail::LoopState> states;
  if (!result.error) {
    for (std::size_t r = 0; r < runs; ++r) {
      const std::size_t share = remaining / runs + (r < remaining % runs ? 1 : 0);
      states.push_back(detail::trust_region_loop(task, projectors[r], 1, 1, init_x.size() + share, init_x, init_y,
                                                 config, 0x7375u + r, static_cast<int>(r)));
    }
  } else {
    detail::LoopState s;
    s.x = init_x;
    s.y = init_y;
    s.step.assign(init_x.size(), 0);
    s.region.assign(init_x.size(), -1);
    states.push_back(std::move(s));
  }
  detail::absorb_subrun_diagnostics(result, states);
  const detail::MergedLog merged = detail::merge_subruns(states, init_x.size());
  detail::finalize_log(result, merged.x, merged.y, merged.step, merged.region);
  if (result.log.empty()) return result;

  const ObjectiveMatrix all = detail::log_matrix(result.log, num_obj);
  if (config.mode == Mode::per_objective) {
    detail::attach_greedy_trajectory(result);
    double ceiling = 0.0;
    for (std::size_t t = 0; t < num_obj; ++t) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < all.rows(); ++i) best = std::max(best, all(i, t));
      ceiling += best;
    }
    result.t_solution_score = ceiling;
  } else {
    // Combined set: the incumbent of each block run on its block sum.
    std::vector<std::size_t> incumbent(runs, std::numeric_limits<std::size_t>::max());
    std::vector<double> incumbent_value(runs, -std::numeric_limits<double>::infinity());
    double best = -std::numeric_limits<double>::infinity();
    result.trajectory.reserve(all.rows());
    for (std::size_t i = 0; i < all.rows(); ++i) {
      for (std::size_t r = 0; r < runs; ++r) {
        if (merged.owner[i] != -1 && merged.owner[i] != static_cast<int>(r)) continue;
        const double v = projectors[r](all.row(i)).front();
        if (v > incumbent_value[r]) {
          incumbent_value[r] = v;
          incumbent[r] = i;
        }
      }
      std::vector<std::size_t> members;
      for (auto m : incumbent) {
        if (std::find(members.begin(), members.end(), m) == members.end()) members.push_back(m);
      }
      const double score = coverage_score(all, members);
      if (score > best || i == 0) {
        best = score;
        result.final_set.members = members;
        result.final_set.incumbent = incumbent_values(all, members);
        result.final_set.score = score;
      }
      result.trajectory.push_back(best);
      result.log[i].best_coverage = best;
    }
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

/// Dispatches on config.mode.
inline RunResult run(const RunConfig& config, const Task& task) {
  return config.mode == Mode::mocobo ? mocobo_run(config, task) : baseline_run(config, task);
}

struct TrajectoryPoint {
  std::size_t evaluations = 0;
  double best_coverage = 0.0;
};

/// Best coverage at evaluation counts stride, 2*stride, ... up to the
/// configured budget. Counts beyond the log length report the final value.
inline std::vector<TrajectoryPoint> extract_trajectory(const RunResult& result, std::size_t stride) {
  if (stride < 1) throw InputError("extract_trajectory: stride must be positive");
  std::vector<TrajectoryPoint> out;
  if (result.trajectory.empty()) return out;
  const std::size_t limit = std::max(result.config.budget, result.trajectory.size());
  for (std::size_t e = stride; e <= limit; e += stride) {
    const std::size_t idx = std::min(e, result.trajectory.size()) - 1;
    out.push_back({e, result.trajectory[idx]});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const AcquisitionConfig& c) {
  nlohmann::json j = {{"num_candidates", c.num_candidates},
                      {"batch_size", c.batch_size},
                      {"realizations", c.realizations}};
  j["perturbation_probability"] = c.perturbation_probability ? nlohmann::json(*c.perturbation_probability) : nlohmann::json();
  return j;
}

inline nlohmann::json to_json(const TrustRegionConfig& c) {
  return {{"length_init", c.length_init},
          {"length_min", c.length_min},
          {"length_max", c.length_max},
          {"success_tolerance", c.success_tolerance},
          {"failure_tolerance", c.failure_tolerance}};
}

inline nlohmann::json to_json(const GPFitConfig& c) {
  return {{"standardize", c.standardize},
          {"restarts", c.restarts},
          {"max_iterations", c.max_iterations},
          {"gradient_tolerance", c.gradient_tolerance},
          {"lengthscale_min", c.lengthscale_min},
          {"lengthscale_max", c.lengthscale_max},
          {"noise_min", c.noise_min},
          {"noise_max", c.noise_max},
          {"signal_min", c.signal_min},
          {"signal_max", c.signal_max},
          {"mean_bound", c.mean_bound}};
}

inline nlohmann::json to_json(const GPHyperparams& h) {
  return {{"lengthscales", std::vector<double>(h.lengthscales.data(), h.lengthscales.data() + h.lengthscales.size())},
          {"signal_variance", h.signal_variance},
          {"noise_variance", h.noise_variance},
          {"constant_mean", h.constant_mean}};
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = {{"task", c.task_id},
                      {"task_params", c.task_params},
                      {"k", c.k},
                      {"num_objectives", c.num_objectives},
                      {"budget", c.budget},
                      {"n_init", c.n_init},
                      {"acquisition", to_json(c.acquisition)},
                      {"gp", to_json(c.gp)},
                      {"max_train", c.max_train},
                      {"refit_every", c.refit_every},
                      {"warm_start", c.warm_start},
                      {"seed", c.seed},
                      {"mode", to_string(c.mode)},
                      {"dedup", c.dedup}};
  j["trust_region"] = c.trust_region ? to_json(*c.trust_region) : nlohmann::json();
  j["partition"] = c.partition ? nlohmann::json(*c.partition) : nlohmann::json();
  return j;
}

/// Overlays the keys present in `j` onto `c`; absent keys keep their values.
inline void apply_json(RunConfig& c, const nlohmann::json& j) {
  auto set = [&j](const char* key, auto& field) {
    if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  set("task", c.task_id);
  if (j.contains("task_params")) c.task_params = j.at("task_params");
  set("k", c.k);
  set("num_objectives", c.num_objectives);
  set("budget", c.budget);
  set("n_init", c.n_init);
  set("max_train", c.max_train);
  set("refit_every", c.refit_every);
  set("warm_start", c.warm_start);
  set("seed", c.seed);
  set("dedup", c.dedup);
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("acquisition")) {
    const auto& a = j.at("acquisition");
    auto seta = [&a](const char* key, auto& field) {
      if (a.contains(key) && !a.at(key).is_null()) field = a.at(key).get<std::decay_t<decltype(field)>>();
    };
    seta("num_candidates", c.acquisition.num_candidates);
    seta("batch_size", c.acquisition.batch_size);
    seta("realizations", c.acquisition.realizations);
    if (a.contains("perturbation_probability")) {
      const auto& p = a.at("perturbation_probability");
      c.acquisition.perturbation_probability = p.is_null() ? std::nullopt : std::optional<double>(p.get<double>());
    }
  }
  if (j.contains("gp")) {
    const auto& g = j.at("gp");
    auto setg = [&g](const char* key, auto& field) {
      if (g.contains(key) && !g.at(key).is_null()) field = g.at(key).get<std::decay_t<decltype(field)>>();
    };
    setg("standardize", c.gp.standardize);
    setg("restarts", c.gp.restarts);
    setg("max_iterations", c.gp.max_iterations);
    setg("gradient_tolerance", c.gp.gradient_tolerance);
    setg("lengthscale_min", c.gp.lengthscale_min);
    setg("lengthscale_max", c.gp.lengthscale_max);
    setg("noise_min", c.gp.noise_min);
    setg("noise_max", c.gp.noise_max);
    setg("signal_min", c.gp.signal_min);
    setg("signal_max", c.gp.signal_max);
    setg("mean_bound", c.gp.mean_bound);
  }
  if (j.contains("trust_region")) {
    const auto& t = j.at("trust_region");
    if (t.is_null()) {
      c.trust_region.reset();
    } else {
      TrustRegionConfig tr = c.trust_region.value_or(TrustRegionConfig{});
      auto sett = [&t](const char* key, auto& field) {
        if (t.contains(key) && !t.at(key).is_null()) field = t.at(key).get<std::decay_t<decltype(field)>>();
      };
      sett("length_init", tr.length_init);
      sett("length_min", tr.length_min);
      sett("length_max", tr.length_max);
      sett("success_tolerance", tr.success_tolerance);
      sett("failure_tolerance", tr.failure_tolerance);
      c.trust_region = tr;
    }
  }
  if (j.contains("partition")) {
    const auto& p = j.at("partition");
    c.partition = p.is_null() ? std::nullopt : std::optional<Partition>(p.get<Partition>());
  }
}

inline nlohmann::json to_json(const EvaluationRecord& r) {
  return {{"step", r.step}, {"region", r.region}, {"x", r.x}, {"y", r.y}, {"best_coverage", r.best_coverage}};
}

inline EvaluationRecord record_from_json(const nlohmann::json& j) {
  EvaluationRecord r;
  r.step = j.at("step").get<std::size_t>();
  r.region = j.at("region").get<int>();
  r.x = j.at("x").get<std::vector<double>>();
  r.y = j.at("y").get<std::vector<double>>();
  r.best_coverage = j.at("best_coverage").get<double>();
  return r;
}

/// JSON-lines evaluation log: one object per evaluation.
inline void write_evaluation_log(std::ostream& out, const RunResult& result) {
  for (const auto& rec : result.log) out << to_json(rec).dump() << '\n';
}

inline std::vector<EvaluationRecord> read_evaluation_log(std::istream& in) {
  std::vector<EvaluationRecord> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    log.push_back(record_from_json(nlohmann::json::parse(line)));
  }
  return log;
}

inline nlohmann::json diagnostics_json(const StepDiagnostics& d) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : d.regions) {
    regions.push_back({{"region", r.region},
                       {"length", r.length},
                       {"success_count", r.success_count},
                       {"failure_count", r.failure_count},
                       {"restarts", r.restarts},
                       {"success", r.success},
                       {"max_ci", r.max_ci},
                       {"zero_ci_fraction", r.zero_ci_fraction}});
  }
  nlohmann::json hypers = nlohmann::json::array();
  for (std::size_t t = 0; t < d.hyperparams.size(); ++t) {
    auto h = to_json(d.hyperparams[t]);
    h["fallback"] = static_cast<bool>(d.fallback[t]);
    hypers.push_back(std::move(h));
  }
  return {{"step", d.step},
          {"run", d.run},
          {"cover_score_before", d.cover_score_before},
          {"cover_score_after", d.cover_score_after},
          {"regions", regions},
          {"hyperparams", hypers}};
}

/// Per-run summary. Timing fields are kept under "timing" so callers can
/// drop them when comparing runs.
inline nlohmann::json summary_json(const RunResult& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["dim"] = r.dim;
  j["num_objectives"] = r.num_objectives;
  j["evaluations"] = r.evaluations();
  j["steps"] = r.steps;
  j["final_score"] = r.final_score();
  j["final_set"] = {{"members", r.final_set.members},
                    {"incumbent", r.final_set.incumbent},
                    {"score", r.final_set.score}};
  j["t_solution_score"] = r.t_solution_score ? nlohmann::json(*r.t_solution_score) : nlohmann::json();
  j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json();
  nlohmann::json diags = nlohmann::json::array();
  for (const auto& d : r.diagnostics) diags.push_back(diagnostics_json(d));
  j["diagnostics"] = std::move(diags);
  j["timing"] = {{"wall_seconds", r.wall_seconds}, {"greedy_seconds", r.greedy_seconds}};
  return j;
}

}  // namespace covebo
