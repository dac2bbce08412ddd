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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "covebo/harness.hpp"

namespace covebo {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("covebo_test_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentSpec small_spec(Mode mode, std::size_t reps) {
  ExperimentSpec spec;
  spec.config.task_params = {{"T", 4}, {"K", 2}, {"d", 4}};
  spec.config.k = 2;
  spec.config.n_init = 10;
  spec.config.budget = 10 + 2 * 2 * 4;
  spec.config.acquisition.batch_size = 4;
  spec.config.acquisition.num_candidates = 32;
  spec.config.gp.restarts = 1;
  spec.config.gp.max_iterations = 30;
  spec.config.max_train = 32;
  spec.config.mode = mode;
  spec.replications = reps;
  spec.base_seed = 40;
  spec.stride = 2;
  spec.workers = 1;
  return spec;
}

TEST(MeanStderrTest, Basics) {
  EXPECT_EQ(mean_stderr({}), std::make_pair(0.0, 0.0));
  EXPECT_EQ(mean_stderr({3.5}), std::make_pair(3.5, 0.0));
  const auto [m, se] = mean_stderr({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m, 2.5);
  // Sample sd = sqrt(5/3), divided by sqrt(4).
  EXPECT_NEAR(se, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
}

TEST(RunExperimentTest, SingleReplicationHasZeroStderr) {
  auto spec = small_spec(Mode::random, 1);
  const auto summary = run_experiment(spec);
  ASSERT_EQ(summary.modes.size(), 1u);
  ASSERT_FALSE(summary.modes[0].series.empty());
  for (const auto& p : summary.modes[0].series) EXPECT_EQ(p.stderr_, 0.0);
}

TEST(RunExperimentTest, IdenticalSpecsGiveIdenticalCsv) {
  TempDir tmp;
  auto spec = small_spec(Mode::mocobo, 2);
  spec.output_dir = tmp.path() / "exp";
  const auto a = run_experiment(spec);
  const auto b = run_experiment(spec);
  ASSERT_NE(a.output_dir, b.output_dir);
  EXPECT_EQ(b.output_dir, tmp.path() / "exp-1");
  const auto csv_a = slurp(a.output_dir / "trajectory.csv");
  EXPECT_FALSE(csv_a.empty());
  EXPECT_EQ(csv_a, slurp(b.output_dir / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(a.output_dir / "run_1" / "evaluations.jsonl"));
  EXPECT_TRUE(fs::exists(a.output_dir / "run_0" / "summary.json"));
}

TEST(RunExperimentTest, ParallelWorkersMatchSequential) {
  auto spec = small_spec(Mode::random, 4);
  const auto seq = run_experiment(spec);
  spec.workers = 3;
  const auto par = run_experiment(spec);
  EXPECT_EQ(to_json(seq).dump(), to_json(par).dump());
}

TEST(RunExperimentTest, RandomMeanIsMonotone) {
  auto spec = small_spec(Mode::random, 10);
  spec.config.budget = 200;
  spec.stride = 5;
  const auto summary = run_experiment(spec);
  const auto& series = summary.modes[0].series;
  ASSERT_EQ(series.size(), 40u);
  for (std::size_t i = 1; i < series.size(); ++i) EXPECT_GE(series[i].mean, series[i - 1].mean);
  EXPECT_EQ(summary.modes[0].completed, 10u);
  EXPECT_FALSE(summary.partial());
}

TEST(RunExperimentTest, OutputsReparse) {
  TempDir tmp;
  auto spec = small_spec(Mode::per_objective, 2);
  spec.output_dir = tmp.path() / "po";
  const auto summary = run_experiment(spec);
  std::ifstream csv(summary.output_dir / "trajectory.csv");
  const auto rows = read_trajectory_csv(csv);
  const auto& series = summary.modes[0].series;
  ASSERT_EQ(rows.size(), series.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].evaluations, series[i].evaluations);
    EXPECT_EQ(rows[i].mode, "per_objective");
    EXPECT_EQ(rows[i].mean, series[i].mean);
    EXPECT_EQ(rows[i].stderr_, series[i].stderr_);
  }
  std::ifstream js(summary.output_dir / "summary.json");
  const auto back = summary_from_json(nlohmann::json::parse(js));
  EXPECT_EQ(to_json(back).dump(), to_json(summary).dump());
  ASSERT_TRUE(back.modes[0].t_solution_mean.has_value());
}

TEST(RunExperimentTest, FailedRunsAreRecorded) {
  auto spec = small_spec(Mode::random, 2);
  spec.replications = 0;
  EXPECT_THROW(run_experiment(spec), InputError);
  // Runs that raise are counted as incomplete rather than aborting.
  RunResult bad;
  bad.error = "boom";
  RunResult good;
  good.config.budget = 2;
  good.trajectory = {1.0, 2.0};
  const auto m = aggregate_runs("random", {good, bad}, 2, 1);
  EXPECT_EQ(m.completed, 1u);
  EXPECT_EQ(m.errors, std::vector<std::string>{"boom"});
  EXPECT_DOUBLE_EQ(m.final_mean, 2.0);
}

AggregateSummary fake_summary(const std::string& mode, std::optional<double> t_solution) {
  AggregateSummary s;
  s.task = "synthetic";
  s.task_params = {{"T", 4}};
  s.k = 2;
  s.budget = 30;
  s.stride = 10;
  ModeSummary m;
  m.mode = mode;
  m.series = {{10, 1.0, 0.1}, {20, 1.5, 0.1}, {30, 2.0, 0.1}};
  m.t_solution_mean = t_solution;
  s.modes.push_back(m);
  return s;
}

TEST(CompareModesTest, AddsConstantCeiling) {
  const auto table = compare_modes({fake_summary("mocobo", std::nullopt), fake_summary("per_objective", 3.25)});
  std::map<std::string, std::vector<std::size_t>> xs;
  for (const auto& r : table.rows) {
    xs[r.mode].push_back(r.evaluations);
    if (r.mode == kCeilingSeries) {
      EXPECT_EQ(r.mean, 3.25);
      EXPECT_EQ(r.stderr_, 0.0);
    }
  }
  ASSERT_EQ(xs.size(), 3u);
  for (const auto& [mode, v] : xs) EXPECT_EQ(v, (std::vector<std::size_t>{10, 20, 30})) << mode;
}

TEST(CompareModesTest, NoCeilingWithoutPerObjective) {
  const auto table = compare_modes({fake_summary("mocobo", std::nullopt), fake_summary("random", std::nullopt)});
  EXPECT_EQ(table.rows.size(), 6u);
}

TEST(CompareModesTest, MismatchThrows) {
  auto other = fake_summary("random", std::nullopt);
  other.budget = 40;
  EXPECT_THROW(compare_modes({fake_summary("mocobo", std::nullopt), other}), InputError);
  other = fake_summary("random", std::nullopt);
  other.task = "rover";
  EXPECT_THROW(compare_modes({fake_summary("mocobo", std::nullopt), other}), InputError);
  EXPECT_THROW(compare_modes({}), InputError);
}

TEST(CsvTest, DoublesRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_THROW(parse_double("1.5x"), InputError);
}

TEST(CsvTest, MatrixRoundTrip) {
  ObjectiveMatrix m(2, 3, {0.1, 0.2, 1.0 / 3.0, -4.0, 5e-300, 6.0});
  std::stringstream ss;
  write_matrix_csv(ss, m);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "obj_1,obj_2,obj_3");
  const auto back = read_matrix_csv(ss);
  ASSERT_EQ(back.rows(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(back.row(i)[t], m.row(i)[t]);
  }
  std::stringstream ragged("a,b\n1,2\n3\n");
  EXPECT_THROW(read_matrix_csv(ragged), InputError);
}

TEST(FreshDirectoryTest, Suffixes) {
  TempDir tmp;
  const auto a = fresh_directory(tmp.path() / "out");
  const auto b = fresh_directory(tmp.path() / "out");
  const auto c = fresh_directory(tmp.path() / "out");
  EXPECT_EQ(a, tmp.path() / "out");
  EXPECT_EQ(b, tmp.path() / "out-1");
  EXPECT_EQ(c, tmp.path() / "out-2");
}

}  // namespace
}  // namespace covebo
