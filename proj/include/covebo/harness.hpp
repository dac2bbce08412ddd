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
// Replicated experiments: run R seeds of one configuration, persist every
// run, and aggregate mean / standard-error coverage trajectories.
//
// Output layout under the experiment directory:
//
//   run_<r>/evaluations.jsonl   one JSON object per evaluation
//   run_<r>/summary.json        per-run summary and diagnostics
//   trajectory.csv              evaluations,mode,mean,stderr
//   summary.json                aggregate statistics
//

#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "covebo/coverage.hpp"
#include "covebo/errors.hpp"
#include "covebo/optimizer.hpp"
#include "covebo/tasks.hpp"

namespace covebo {

// ---------------------------------------------------------------------------
// CSV helpers

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InputError("CSV: cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

/// Reads an objective matrix: a header row (obj_1,...,obj_T) and one row per point.
inline ObjectiveMatrix read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV: missing header row");
  const auto header = split_csv_line(line);
  if (header.empty() || header.front().empty()) throw InputError("CSV: empty header row");
  ObjectiveMatrix m(header.size());
  std::size_t line_no = 1;
  std::vector<double> row(header.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw InputError("CSV: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    }
    for (std::size_t t = 0; t < cells.size(); ++t) row[t] = parse_double(cells[t]);
    m.append_row(row);
  }
  return m;
}

inline void write_matrix_csv(std::ostream& out, const ObjectiveMatrix& m) {
  for (std::size_t t = 0; t < m.objectives(); ++t) out << (t ? "," : "") << "obj_" << (t + 1);
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t t = 0; t < m.objectives(); ++t) out << (t ? "," : "") << format_double(m(i, t));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentSpec {
  RunConfig config;
  std::size_t replications = 10;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir;  // empty: keep everything in memory
  std::size_t stride = 100;
  unsigned workers = 0;  // 0: COVEBO_WORKERS, else hardware concurrency
};

struct SeriesPoint {
  std::size_t evaluations = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

struct ModeSummary {
  std::string mode;
  std::size_t requested = 0;
  std::size_t completed = 0;
  std::vector<SeriesPoint> series;
  std::vector<double> final_scores;
  double final_mean = 0.0;
  double final_stderr = 0.0;
  std::vector<double> t_solution_scores;
  std::optional<double> t_solution_mean;
  std::optional<double> t_solution_stderr;
  std::vector<std::string> errors;
};

struct AggregateSummary {
  std::string task;
  nlohmann::json task_params;
  std::size_t k = 0;
  std::size_t budget = 0;
  std::size_t stride = 0;
  std::optional<double> ceiling;
  std::vector<ModeSummary> modes;
  std::filesystem::path output_dir;

  bool partial() const {
    return std::any_of(modes.begin(), modes.end(), [](const ModeSummary& m) { return m.completed < m.requested; });
  }
};

/// Mean and standard error (sample stddev / sqrt(R)); zero error for R = 1.
inline std::pair<double, double> mean_stderr(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(xs.size()))};
}

/// First of `path`, `path-1`, `path-2`, ... that does not exist yet; created.
inline std::filesystem::path fresh_directory(const std::filesystem::path& path) {
  std::filesystem::path candidate = path;
  for (int suffix = 1; std::filesystem::exists(candidate); ++suffix) {
    candidate = path;
    candidate += "-" + std::to_string(suffix);
  }
  std::filesystem::create_directories(candidate);
  return candidate;
}

inline unsigned worker_limit(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("COVEBO_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Aggregates completed runs of one mode.
inline ModeSummary aggregate_runs(const std::string& mode, const std::vector<RunResult>& runs, std::size_t requested,
                                  std::size_t stride) {
  ModeSummary s;
  s.mode = mode;
  s.requested = requested;
  std::vector<std::vector<TrajectoryPoint>> series;
  for (const auto& r : runs) {
    if (r.error) {
      s.errors.push_back(*r.error);
      continue;
    }
    ++s.completed;
    series.push_back(extract_trajectory(r, stride));
    s.final_scores.push_back(r.final_score());
    if (r.t_solution_score) s.t_solution_scores.push_back(*r.t_solution_score);
  }
  if (!series.empty()) {
    std::size_t len = series.front().size();
    for (const auto& ser : series) len = std::min(len, ser.size());
    for (std::size_t p = 0; p < len; ++p) {
      std::vector<double> vals;
      for (const auto& ser : series) vals.push_back(ser[p].best_coverage);
      const auto [m, se] = mean_stderr(vals);
      s.series.push_back({series.front()[p].evaluations, m, se});
    }
  }
  std::tie(s.final_mean, s.final_stderr) = mean_stderr(s.final_scores);
  if (!s.t_solution_scores.empty()) {
    const auto [m, se] = mean_stderr(s.t_solution_scores);
    s.t_solution_mean = m;
    s.t_solution_stderr = se;
  }
  return s;
}

inline void write_trajectory_csv(std::ostream& out, const std::vector<ModeSummary>& modes) {
  out << "evaluations,mode,mean,stderr\n";
  for (const auto& m : modes) {
    for (const auto& p : m.series) {
      out << p.evaluations << ',' << m.mode << ',' << format_double(p.mean) << ',' << format_double(p.stderr_) << '\n';
    }
  }
}

struct TrajectoryRow {
  std::size_t evaluations = 0;
  std::string mode;
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "evaluations,mode,mean,stderr") {
    throw InputError("trajectory.csv: unexpected header");
  }
  std::vector<TrajectoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw InputError("trajectory.csv: malformed row '" + line + "'");
    rows.push_back({static_cast<std::size_t>(std::stoull(cells[0])), cells[1], parse_double(cells[2]),
                    parse_double(cells[3])});
  }
  return rows;
}

inline nlohmann::json to_json(const ModeSummary& m) {
  nlohmann::json series = nlohmann::json::array();
  for (const auto& p : m.series) series.push_back({p.evaluations, p.mean, p.stderr_});
  nlohmann::json j = {{"mode", m.mode},
                      {"requested", m.requested},
                      {"completed", m.completed},
                      {"series", series},
                      {"final_scores", m.final_scores},
                      {"final_mean", m.final_mean},
                      {"final_stderr", m.final_stderr},
                      {"t_solution_scores", m.t_solution_scores},
                      {"errors", m.errors}};
  j["t_solution_mean"] = m.t_solution_mean ? nlohmann::json(*m.t_solution_mean) : nlohmann::json();
  j["t_solution_stderr"] = m.t_solution_stderr ? nlohmann::json(*m.t_solution_stderr) : nlohmann::json();
  return j;
}

inline nlohmann::json to_json(const AggregateSummary& s) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : s.modes) modes.push_back(to_json(m));
  nlohmann::json j = {{"task", s.task},   {"task_params", s.task_params}, {"k", s.k},
                      {"budget", s.budget}, {"stride", s.stride},         {"modes", modes}};
  j["ceiling"] = s.ceiling ? nlohmann::json(*s.ceiling) : nlohmann::json();
  return j;
}

inline AggregateSummary summary_from_json(const nlohmann::json& j) {
  AggregateSummary s;
  s.task = j.at("task").get<std::string>();
  s.task_params = j.at("task_params");
  s.k = j.at("k").get<std::size_t>();
  s.budget = j.at("budget").get<std::size_t>();
  s.stride = j.at("stride").get<std::size_t>();
  if (!j.at("ceiling").is_null()) s.ceiling = j.at("ceiling").get<double>();
  for (const auto& mj : j.at("modes")) {
    ModeSummary m;
    m.mode = mj.at("mode").get<std::string>();
    m.requested = mj.at("requested").get<std::size_t>();
    m.completed = mj.at("completed").get<std::size_t>();
    for (const auto& p : mj.at("series")) m.series.push_back({p[0].get<std::size_t>(), p[1].get<double>(), p[2].get<double>()});
    m.final_scores = mj.at("final_scores").get<std::vector<double>>();
    m.final_mean = mj.at("final_mean").get<double>();
    m.final_stderr = mj.at("final_stderr").get<double>();
    m.t_solution_scores = mj.at("t_solution_scores").get<std::vector<double>>();
    if (!mj.at("t_solution_mean").is_null()) m.t_solution_mean = mj.at("t_solution_mean").get<double>();
    if (!mj.at("t_solution_stderr").is_null()) m.t_solution_stderr = mj.at("t_solution_stderr").get<double>();
    m.errors = mj.at("errors").get<std::vector<std::string>>();
    s.modes.push_back(std::move(m));
  }
  return s;
}

/// Runs every replication (seed = base_seed + r) and aggregates them.
/// Individual run failures are recorded; see AggregateSummary::partial().
inline AggregateSummary run_experiment(const ExperimentSpec& spec, std::vector<RunResult>* runs_out = nullptr) {
  if (spec.replications < 1) throw InputError("ExperimentSpec: need at least one replication");
  if (spec.stride < 1) throw InputError("ExperimentSpec: stride must be positive");
  const Task task = make_task(spec.config.task_id, spec.config.task_params);
  validate_config(spec.config, task);

  AggregateSummary summary;
  summary.task = spec.config.task_id;
  summary.task_params = spec.config.task_params;
  summary.k = spec.config.k;
  summary.budget = spec.config.budget;
  summary.stride = spec.stride;
  summary.ceiling = task.ceiling;
  if (!spec.output_dir.empty()) summary.output_dir = fresh_directory(spec.output_dir);

  std::vector<RunResult> runs(spec.replications);
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  auto worker = [&] {
    for (std::size_t r = next++; r < spec.replications; r = next++) {
      RunConfig config = spec.config;
      config.seed = spec.base_seed + r;
      try {
        runs[r] = run(config, task);
      } catch (const std::exception& e) {
        runs[r].config = config;
        runs[r].error = e.what();
      }
      if (!summary.output_dir.empty()) {
        const auto dir = summary.output_dir / ("run_" + std::to_string(r));
        std::filesystem::create_directories(dir);
        std::ofstream log(dir / "evaluations.jsonl");
        write_evaluation_log(log, runs[r]);
        std::ofstream sum(dir / "summary.json");
        sum << summary_json(runs[r]).dump(2) << '\n';
      }
    }
  };
  const unsigned workers = std::min<unsigned>(worker_limit(spec.workers), static_cast<unsigned>(spec.replications));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  summary.modes.push_back(aggregate_runs(to_string(spec.config.mode), runs, spec.replications, spec.stride));
  if (!summary.output_dir.empty()) {
    std::ofstream csv(summary.output_dir / "trajectory.csv");
    write_trajectory_csv(csv, summary.modes);
    std::ofstream js(summary.output_dir / "summary.json");
    js << to_json(summary).dump(2) << '\n';
  }
  if (runs_out) *runs_out = std::move(runs);
  return summary;
}

inline constexpr const char* kCeilingSeries = "t_solution_ceiling";

struct ComparisonTable {
  std::vector<TrajectoryRow> rows;
};

/// Aligns per-mode mean trajectories. When a per_objective summary is
/// present its mean T-solution score is added as a constant series.
inline ComparisonTable compare_modes(const std::vector<AggregateSummary>& summaries) {
  if (summaries.empty()) throw InputError("compare_modes: nothing to compare");
  const auto& ref = summaries.front();
  for (const auto& s : summaries) {
    if (s.task != ref.task || s.task_params != ref.task_params || s.k != ref.k || s.budget != ref.budget ||
        s.stride != ref.stride) {
      throw InputError("compare_modes: summaries differ in task, K, budget or stride");
    }
  }
  ComparisonTable table;
  std::optional<double> ceiling;
  std::vector<std::size_t> xs;
  for (const auto& s : summaries) {
    for (const auto& m : s.modes) {
      for (const auto& p : m.series) {
        table.rows.push_back({p.evaluations, m.mode, p.mean, p.stderr_});
        if (std::find(xs.begin(), xs.end(), p.evaluations) == xs.end()) xs.push_back(p.evaluations);
      }
      if (m.mode == "per_objective" && m.t_solution_mean) ceiling = *m.t_solution_mean;
    }
  }
  if (ceiling) {
    std::sort(xs.begin(), xs.end());
    for (auto x : xs) table.rows.push_back({x, kCeilingSeries, *ceiling, 0.0});
  }
  return table;
}

inline void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
  out << "evaluations,mode,mean,stderr\n";
  for (const auto& r : table.rows) {
    out << r.evaluations << ',' << r.mode << ',' << format_double(r.mean) << ',' << format_double(r.stderr_) << '\n';
  }
}

}  // namespace covebo
