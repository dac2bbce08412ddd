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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "covebo/covebo.hpp"
#include "oracles.hpp"

namespace {

using namespace covebo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ObjectiveMatrix to_matrix(const oracle::Rows& rows) { return ObjectiveMatrix::from_rows(rows); }

// ---------------------------------------------------------------------------

Outcome greedy_ratio() {
  std::mt19937_64 rng(101);
  const double bound = 1.0 - std::exp(-1.0);
  double worst = 1.0;
  int failures = 0;
  const int trials = 600;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t n = 1 + rng() % 12, t = 1 + rng() % 6, k = 1 + rng() % 4;
    const auto rows = oracle::random_rows(rng, n, t);
    const auto m = to_matrix(rows);
    const double g = greedy_cover(m, k).score;
    const double opt = brute_force_cover(m, k).score;
    // The bitmask oracle guards the exhaustive search itself.
    if (std::abs(opt - oracle::best_score(rows, k)) > 1e-12) ++failures;
    if (g < bound * opt) ++failures;
    worst = std::min(worst, g / opt);
  }
  return {failures == 0, std::to_string(trials) + " matrices, worst ratio " + fmt("%.4f", worst) +
                             " (bound " + fmt("%.4f", bound) + "), " + std::to_string(failures) + " failures"};
}

Outcome monotone_submodular() {
  std::mt19937_64 rng(202);
  int mono_fail = 0, sub_fail = 0;
  const int probes = 2000;
  for (int p = 0; p < probes; ++p) {
    const std::size_t n = 3 + rng() % 14, t = 1 + rng() % 6;
    const auto m = to_matrix(oracle::random_rows(rng, n, t));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    // A = first a rows, B = first b rows (A within B), x outside B.
    const std::size_t b = 1 + rng() % (n - 1);
    const std::size_t a = 1 + rng() % b;
    const std::size_t x = order[b + rng() % (n - b)];
    std::vector<std::size_t> A(order.begin(), order.begin() + static_cast<long>(a));
    std::vector<std::size_t> B(order.begin(), order.begin() + static_cast<long>(b));
    const double ca = coverage_score(m, A), cb = coverage_score(m, B);
    if (ca > cb + 1e-12) ++mono_fail;
    A.push_back(x);
    B.push_back(x);
    const double gain_a = coverage_score(m, A) - ca;
    const double gain_b = coverage_score(m, B) - cb;
    if (gain_a < gain_b - 1e-12) ++sub_fail;
    if (coverage_score(m, B) < cb - 1e-12) ++mono_fail;
  }
  return {mono_fail == 0 && sub_fail == 0, std::to_string(probes) + " probes each, " + std::to_string(mono_fail) +
                                               " monotonicity and " + std::to_string(sub_fail) +
                                               " submodularity violations"};
}

Outcome exact_edges() {
  std::mt19937_64 rng(303);
  int k1_fail = 0, kn_fail = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 12, t = 1 + rng() % 6;
    const auto rows = oracle::random_rows(rng, n, t);
    const auto m = to_matrix(rows);
    if (greedy_cover(m, 1).score != brute_force_cover(m, 1).score) ++k1_fail;
    if (std::abs(oracle::best_score(rows, 1) - greedy_cover(m, 1).score) > 1e-12) ++k1_fail;
  }
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 40, t = 1 + rng() % 8;
    const auto rows = oracle::random_rows(rng, n, t);
    if (std::abs(greedy_cover(to_matrix(rows), n).score - oracle::column_max_sum(rows)) > 1e-12) ++kn_fail;
  }
  return {k1_fail == 0 && kn_fail == 0, "K=1: " + std::to_string(k1_fail) + "/200 failures, K=n: " +
                                            std::to_string(kn_fail) + "/200 failures"};
}

// Minimum over batches of the mean per-call time.
double time_greedy(const ObjectiveMatrix& m, std::size_t k) {
  double best = std::numeric_limits<double>::infinity();
  volatile double sink = 0.0;
  for (int batch = 0; batch < 7; ++batch) {
    int calls = 0;
    const auto t0 = Clock::now();
    do {
      sink = sink + greedy_cover(m, k).score;
      ++calls;
    } while (seconds_since(t0) < 0.15);
    best = std::min(best, seconds_since(t0) / calls);
  }
  return best;
}

Outcome greedy_scaling() {
  std::mt19937_64 rng(404);
  const auto rows = oracle::random_rows(rng, 20000, 4);
  const auto big = to_matrix(rows);
  const auto small = to_matrix(oracle::Rows(rows.begin(), rows.begin() + 2000));
  const double ts = time_greedy(small, 2);
  const double tb = time_greedy(big, 2);
  const double ratio = tb / ts;
  return {ratio >= 5.0 && ratio <= 20.0, "t(2000) = " + fmt("%.3g", ts) + " s, t(20000) = " + fmt("%.3g", tb) +
                                             " s, ratio " + fmt("%.2f", ratio) + " (required [5, 20])"};
}

Matrix uniform_points(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = u(rng);
  return x;
}

Outcome surrogate_numerics() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_grad = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 5);
    const Eigen::Index m = 5 + static_cast<Eigen::Index>(rng() % 36);
    const Matrix x = uniform_points(rng, m, d);
    Vector y(m);
    for (Eigen::Index i = 0; i < m; ++i) y[i] = std::cos(4.0 * x(i, 0)) + 0.3 * u(rng);
    GPHyperparams h;
    h.lengthscales.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) h.lengthscales[j] = std::exp(std::log(0.1) + u(rng) * std::log(20.0));
    h.signal_variance = std::exp(std::log(0.2) + u(rng) * std::log(25.0));
    h.noise_variance = std::exp(std::log(1e-3) + u(rng) * std::log(100.0));
    h.constant_mean = u(rng) - 0.5;
    const Vector analytic = gp_log_marginal_likelihood(h, x, y).gradient;
    const Vector theta = h.to_vector();
    Vector numeric(theta.size());
    const double step = 1e-5;
    for (Eigen::Index p = 0; p < theta.size(); ++p) {
      Vector up = theta, down = theta;
      up[p] += step;
      down[p] -= step;
      numeric[p] = (gp_log_marginal_likelihood(GPHyperparams::from_vector(up), x, y).value -
                    gp_log_marginal_likelihood(GPHyperparams::from_vector(down), x, y).value) /
                   (2.0 * step);
    }
    worst_grad = std::max(worst_grad, (analytic - numeric).lpNorm<Eigen::Infinity>() /
                                          numeric.lpNorm<Eigen::Infinity>());
  }

  const Matrix xi = uniform_points(rng, 30, 3);
  Vector yi(30);
  for (Eigen::Index i = 0; i < 30; ++i) yi[i] = std::sin(5.0 * xi(i, 0)) * xi(i, 1) + xi(i, 2);
  // Near-zero noise: pinned at the Cholesky jitter floor.
  GPFitConfig exact;
  exact.noise_min = exact.noise_max = 1e-8;
  const auto interp = fit_gp(xi, yi, exact);
  const double interp_err = (interp.posterior(xi, false).mean - yi).cwiseAbs().maxCoeff();

  const Matrix xs = uniform_points(rng, 12, 2);
  const Vector ys = (2.0 * xs.col(0) - xs.col(1)).array().sin().matrix();
  const auto model = fit_gp(xs, ys);
  const Matrix q = uniform_points(rng, 6, 2);
  const auto post = model.posterior(q);
  JointPosteriorSampler sampler(model, q);
  Rng draw_rng = make_rng(2026, {});
  const int n = 10000;
  Matrix draws(6, n);
  for (int s = 0; s < n; ++s) draws.col(s) = sampler.draw(draw_rng);
  const Vector mean = draws.rowwise().mean();
  const Matrix centered = draws.colwise() - mean;
  const Matrix cov = centered * centered.transpose() / (n - 1);
  double worst_z = 0.0;
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) {
      const double sii = post.covariance(i, i), sjj = post.covariance(j, j), sij = post.covariance(i, j);
      worst_z = std::max(worst_z, std::abs(cov(i, j) - sij) / std::sqrt((sii * sjj + sij * sij) / n));
    }
  }
  const bool pass = worst_grad < 1e-4 && interp_err < 1e-4 && worst_z <= 3.0;
  return {pass, "gradient rel. error " + fmt("%.2e", worst_grad) + " (< 1e-4), interpolation error " +
                    fmt("%.2e", interp_err) + " (< 1e-4), worst covariance deviation " + fmt("%.2f", worst_z) +
                    " SE over 21 entries (<= 3)"};
}

// Reference automaton: a signed streak (positive successes, negative
// failures) and an explicit length, stepped by a transition table.
struct RefState {
  double length;
  int streak = 0;
  int restarts = 0;
};

RefState ref_step(RefState s, bool success, const TrustRegionConfig& c) {
  if (success) {
    s.streak = s.streak > 0 ? s.streak + 1 : 1;
    if (s.streak == c.success_tolerance) {
      s.length = 2.0 * s.length > c.length_max ? c.length_max : 2.0 * s.length;
      s.streak = 0;
    }
  } else {
    s.streak = s.streak < 0 ? s.streak - 1 : -1;
    if (-s.streak == c.failure_tolerance) {
      s.length = 0.5 * s.length;
      s.streak = 0;
    }
  }
  if (s.length < c.length_min) {
    s.length = c.length_init;
    s.streak = 0;
    ++s.restarts;
  }
  return s;
}

Outcome trust_region_automaton() {
  long sequences = 0, divergences = 0;
  for (int rs : {1, 2, 3}) {
    for (int rf : {1, 2, 4, 5}) {
      TrustRegionConfig c;
      c.success_tolerance = rs;
      c.failure_tolerance = rf;
      for (double start : {c.length_init, c.length_max, 1.2, 3.0 * c.length_min, 1.5 * c.length_min, c.length_min}) {
        for (int len = 0; len <= 12; ++len) {
          for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
            ++sequences;
            auto st = TrustRegionState::initial(c, Eigen::VectorXd::Constant(2, 0.5));
            st.length = start;
            RefState ref{start};
            bool ok = true;
            for (int i = 0; i < len && ok; ++i) {
              const bool success = (bits >> i) & 1u;
              st = tr_update(st, c, success);
              ref = ref_step(ref, success, c);
              const int succ = ref.streak > 0 ? ref.streak : 0;
              const int fail = ref.streak < 0 ? -ref.streak : 0;
              ok = st.length == ref.length && st.success_count == succ && st.failure_count == fail &&
                   st.restarts == ref.restarts && st.length <= c.length_max && st.length >= c.length_min &&
                   (st.success_count == 0 || st.failure_count == 0) && st.center == Eigen::VectorXd::Constant(2, 0.5);
            }
            if (!ok) ++divergences;
          }
        }
      }
    }
  }
  return {divergences == 0, std::to_string(sequences) + " outcome sequences of length <= 12 over 72 settings, " +
                                std::to_string(divergences) + " divergences"};
}

// ---------------------------------------------------------------------------
// Optimization runs

RunConfig synthetic_config(Mode mode) {
  RunConfig c;
  c.task_id = "synthetic";
  c.task_params = {{"T", 6}, {"K", 3}, {"d", 10}};
  c.k = 3;
  c.n_init = 100;
  c.budget = 2000;
  c.mode = mode;
  // Single-core runtime settings; see README.
  c.max_train = 256;
  c.gp.restarts = 1;
  return c;
}

struct ModeRuns {
  AggregateSummary summary;
  std::vector<RunResult> runs;
  double seconds = 0.0;
};

ModeRuns run_mode(const RunConfig& config, std::size_t reps, const fs::path& out) {
  ExperimentSpec spec;
  spec.config = config;
  spec.replications = reps;
  spec.base_seed = 0;
  spec.stride = 100;
  spec.output_dir = out;
  ModeRuns r;
  const auto t0 = Clock::now();
  r.summary = run_experiment(spec, &r.runs);
  r.seconds = seconds_since(t0);
  std::cerr << "  " << to_string(config.mode) << " on " << config.task_id << ": " << r.summary.modes[0].completed
            << "/" << reps << " runs, mean final " << r.summary.modes[0].final_mean << " (" << fmt("%.0f", r.seconds)
            << " s)\n";
  return r;
}

struct SyntheticResults {
  std::map<Mode, ModeRuns> modes;
  double ceiling = 0.0;
};

SyntheticResults run_synthetic(const fs::path& out) {
  SyntheticResults res;
  for (Mode m : {Mode::mocobo, Mode::random, Mode::oracle_partition, Mode::per_objective}) {
    res.modes[m] = run_mode(synthetic_config(m), 10, out / ("synthetic_" + to_string(m)));
  }
  res.ceiling = *res.modes[Mode::mocobo].summary.ceiling;
  return res;
}

Outcome synthetic_end_to_end(const SyntheticResults& r) {
  const auto& mo = r.modes.at(Mode::mocobo).summary.modes[0];
  const auto& ra = r.modes.at(Mode::random).summary.modes[0];
  const auto& op = r.modes.at(Mode::oracle_partition).summary.modes[0];
  const double pooled = std::sqrt(mo.final_stderr * mo.final_stderr + ra.final_stderr * ra.final_stderr);
  const bool c_ceiling = mo.final_mean >= 0.95 * r.ceiling;
  const bool c_random = mo.final_mean - ra.final_mean >= 3.0 * pooled && mo.final_mean > ra.final_mean;
  const bool c_oracle = std::abs(mo.final_mean - op.final_mean) <= 0.1 * op.final_mean;
  const bool complete = mo.completed == 10 && ra.completed == 10 && op.completed == 10;
  double secs = 0.0;
  for (const auto& [m, runs] : r.modes) secs += runs.seconds;
  return {c_ceiling && c_random && c_oracle && complete,
          "mocobo " + fmt("%.4f", mo.final_mean) + " +- " + fmt("%.4f", mo.final_stderr) + " = " +
              fmt("%.3f", mo.final_mean / r.ceiling) + " of ceiling " + fmt("%.4f", r.ceiling) + " (>= 0.95); random " +
              fmt("%.4f", ra.final_mean) + ", gap " + fmt("%.1f", (mo.final_mean - ra.final_mean) / pooled) +
              " pooled SE (>= 3); oracle partition " + fmt("%.4f", op.final_mean) + ", relative gap " +
              fmt("%.3f", std::abs(mo.final_mean - op.final_mean) / op.final_mean) + " (<= 0.10); " +
              fmt("%.0f", secs) + " s for 40 runs"};
}

Outcome covering_vs_individual(const SyntheticResults& r) {
  const auto& mo = r.modes.at(Mode::mocobo).summary.modes[0];
  const auto& po = r.modes.at(Mode::per_objective).summary.modes[0];
  if (!po.t_solution_mean) return {false, "per_objective runs reported no T-solution score"};
  const double ratio = mo.final_mean / *po.t_solution_mean;
  return {ratio >= 0.9, "mocobo K=3 mean " + fmt("%.4f", mo.final_mean) + " vs T-solution mean " +
                            fmt("%.4f", *po.t_solution_mean) + ": ratio " + fmt("%.3f", ratio) + " (>= 0.9)"};
}

Outcome rover_analog(const ModeRuns& rover) {
  int clean = 0;
  std::ostringstream worst;
  const Task task = make_task("rover");
  for (const auto& run : rover.runs) {
    if (run.error || run.final_set.members.empty()) continue;
    std::vector<double> per_course(task.num_objectives, std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < task.num_objectives; ++t) {
      // The member serving course t is the one with the best objective there.
      std::size_t best = run.final_set.members.front();
      for (auto i : run.final_set.members) {
        if (run.log[i].y[t] > run.log[best].y[t]) best = i;
      }
      per_course[t] = task.rover->penetrations(run.log[best].x)[t];
    }
    const double max_pen = *std::max_element(per_course.begin(), per_course.end());
    clean += max_pen < 1e-3;
    worst << (worst.tellp() > 0 ? ", " : "") << fmt("%.1e", max_pen);
  }
  return {clean >= 3, std::to_string(clean) + "/" + std::to_string(rover.runs.size()) +
                          " replications clear all four courses (>= 3 of 5); worst penetration per run: " +
                          worst.str() + "; " + fmt("%.0f", rover.seconds) + " s"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome accounting_determinism(const std::vector<const ModeRuns*>& mocobo_runs, const fs::path& out) {
  int checked = 0, bad = 0;
  for (const auto* mr : mocobo_runs) {
    for (const auto& run : mr->runs) {
      ++checked;
      const std::size_t q = run.config.acquisition.batch_size;
      if (run.evaluations() != run.config.n_init + run.steps * run.config.k * q) ++bad;
    }
  }
  ExperimentSpec spec;
  spec.config = synthetic_config(Mode::mocobo);
  spec.replications = 2;
  spec.stride = 50;
  spec.output_dir = out / "determinism";
  const auto a = run_experiment(spec);
  const auto b = run_experiment(spec);
  const std::string csv_a = slurp(a.output_dir / "trajectory.csv");
  const std::string csv_b = slurp(b.output_dir / "trajectory.csv");
  const bool same = !csv_a.empty() && csv_a == csv_b;
  return {bad == 0 && same, std::to_string(checked - bad) + "/" + std::to_string(checked) +
                                " runs with evaluations = n_init + steps*K*q; repeated experiment trajectory.csv " +
                                (same ? "byte-identical" : "DIFFERS") + " (" + std::to_string(csv_a.size()) +
                                " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covebo acceptance suite"};
  fs::path out = fs::temp_directory_path() / "covebo_acceptance";
  std::vector<int> only;
  app.add_option("--out", out, "directory for run artifacts");
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };
  fs::create_directories(out);
  out = fresh_directory(out / "session");

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& check) {
    if (!wanted(id)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << " ("
              << fmt("%.1f", seconds_since(t0)) << " s)" << std::endl;
  };

  report(1, "greedy approximation guarantee", greedy_ratio);
  report(2, "monotonicity and submodularity", monotone_submodular);
  report(3, "exactness edges", exact_edges);
  report(4, "greedy runtime scaling", greedy_scaling);
  report(5, "surrogate numerics", surrogate_numerics);
  report(6, "trust-region state machine", trust_region_automaton);

  std::optional<SyntheticResults> synthetic;
  if (wanted(7) || wanted(8) || wanted(10)) {
    std::cerr << "running synthetic experiments (4 modes x 10 replications)\n";
    synthetic = run_synthetic(out);
  }
  report(7, "synthetic end-to-end", [&] { return synthetic_end_to_end(*synthetic); });
  report(8, "covering set vs individual optima", [&] { return covering_vs_individual(*synthetic); });

  std::optional<ModeRuns> rover;
  if (wanted(9) || wanted(10)) {
    RunConfig c;
    c.task_id = "rover";
    c.task_params = {{"T", 4}, {"d", 20}};
    c.k = 2;
    c.n_init = 100;
    c.budget = 4000;
    c.max_train = 256;
    c.gp.restarts = 1;
    std::cerr << "running rover experiment (5 replications)\n";
    rover = run_mode(c, 5, out / "rover_mocobo");
  }
  report(9, "rover analog", [&] { return rover_analog(*rover); });
  report(10, "accounting and determinism", [&] {
    std::vector<const ModeRuns*> runs;
    if (synthetic) runs.push_back(&synthetic->modes.at(Mode::mocobo));
    if (rover) runs.push_back(&*rover);
    return accounting_determinism(runs, out);
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
