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

// Command-line front end.
//
//   covebo run --task synthetic --k 3 --budget 2000 --mode mocobo,random --reps 10 --out results
//   covebo cover --k 3 --input matrix.csv [--exact]
//   covebo tasks list
//   covebo tasks export --task rover
//   covebo defaults

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "covebo/covebo.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

std::vector<std::string> split_modes(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw covebo::InputError("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw covebo::InputError("config file " + path + ": " + e.what());
  }
}

nlohmann::json task_geometry(const covebo::Task& task) {
  nlohmann::json j = {{"task", task.id}, {"dim", task.dim}, {"num_objectives", task.num_objectives}};
  if (task.rover) j["rover"] = task.rover->geometry_json();
  if (task.clustered) {
    j["objective_centers"] = task.clustered->objective_centers;
    j["sigma"] = task.clustered->sigma;
    j["partition"] = task.clustered->partition;
  }
  if (task.ceiling) j["ceiling"] = *task.ceiling;
  return j;
}

struct RunOptions {
  std::string task = "synthetic";
  std::size_t k = 3;
  std::size_t budget = 2000;
  std::string modes = "mocobo";
  std::uint64_t seed = 0;
  std::size_t reps = 10;
  std::string out = "covebo_results";
  std::string config_path;
  std::size_t stride = 100;
};

int do_run(const RunOptions& opt) {
  covebo::RunConfig config;
  config.task_id = opt.task;
  config.k = opt.k;
  config.budget = opt.budget;
  std::uint64_t base_seed = opt.seed;
  std::size_t reps = opt.reps;
  std::size_t stride = opt.stride;
  std::vector<std::string> modes = split_modes(opt.modes);

  if (!opt.config_path.empty()) {
    const auto j = load_json(opt.config_path);
    covebo::apply_json(config, j);
    if (j.contains("seed")) base_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("reps")) reps = j.at("reps").get<std::size_t>();
    if (j.contains("stride")) stride = j.at("stride").get<std::size_t>();
    if (j.contains("modes")) modes = j.at("modes").get<std::vector<std::string>>();
    else if (j.contains("mode")) modes = {j.at("mode").get<std::string>()};
  }
  if (modes.empty()) throw covebo::InputError("no mode given");
  for (const auto& m : modes) covebo::parse_mode(m);

  const auto root = covebo::fresh_directory(opt.out);
  std::vector<covebo::AggregateSummary> summaries;
  bool partial = false;
  for (const auto& m : modes) {
    covebo::ExperimentSpec spec;
    spec.config = config;
    spec.config.mode = covebo::parse_mode(m);
    spec.replications = reps;
    spec.base_seed = base_seed;
    spec.stride = stride;
    spec.output_dir = modes.size() == 1 ? root / "experiment" : root / m;
    auto summary = covebo::run_experiment(spec);
    for (const auto& ms : summary.modes) {
      std::fprintf(stderr, "%s: %zu/%zu runs, final coverage %.6g +- %.3g\n", ms.mode.c_str(), ms.completed,
                   ms.requested, ms.final_mean, ms.final_stderr);
      for (const auto& e : ms.errors) std::fprintf(stderr, "  run failed: %s\n", e.c_str());
    }
    partial = partial || summary.partial();
    summaries.push_back(std::move(summary));
  }

  const auto table = covebo::compare_modes(summaries);
  {
    std::ofstream csv(root / "trajectory.csv");
    covebo::write_comparison_csv(csv, table);
  }
  {
    nlohmann::json all = nlohmann::json::array();
    for (const auto& s : summaries) all.push_back(covebo::to_json(s));
    std::ofstream js(root / "summary.json");
    js << nlohmann::json{{"experiments", all}}.dump(2) << '\n';
  }
  std::printf("%s\n", root.string().c_str());
  if (partial) {
    std::fprintf(stderr, "warning: some replications failed\n");
    return kExitPartial;
  }
  return kExitOk;
}

int do_cover(std::size_t k, const std::string& input, bool exact) {
  std::ifstream in(input);
  if (!in) throw covebo::InputError("cannot open " + input);
  const auto matrix = covebo::read_matrix_csv(in);
  const auto set = exact ? covebo::brute_force_cover(matrix, k) : covebo::greedy_cover(matrix, k);
  nlohmann::json j = {{"members", set.members}, {"incumbent", set.incumbent}, {"score", set.score},
                      {"method", exact ? "exact" : "greedy"}};
  std::printf("%s\n", j.dump(2).c_str());
  return kExitOk;
}

int do_tasks_list() {
  std::printf("%-12s %5s %5s  %s\n", "id", "dim", "T", "description");
  for (const auto& t : covebo::list_tasks()) {
    std::printf("%-12s %5zu %5zu  %s\n", t.id.c_str(), t.dim, t.num_objectives, t.description.c_str());
  }
  return kExitOk;
}

int do_tasks_export(const std::string& id, const std::string& params) {
  const auto task = covebo::make_task(id, params.empty() ? nlohmann::json::object() : nlohmann::json::parse(params));
  std::printf("%s\n", task_geometry(task).dump(2).c_str());
  return kExitOk;
}

int do_defaults() {
  covebo::RunConfig config;
  nlohmann::json j = covebo::to_json(config);
  j["reps"] = 10;
  j["stride"] = 100;
  j["modes"] = {"mocobo"};
  j["acquisition"]["perturbation_probability"] = "min(1, 20/d)";
  j["trust_region"] = covebo::to_json(covebo::TrustRegionConfig{});
  j["trust_region"]["failure_tolerance"] = "max(4, ceil(d/q))";
  j["workers_env"] = "COVEBO_WORKERS";
  std::printf("%s\n", j.dump(2).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage-oriented multi-objective Bayesian optimization"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "Run replicated experiments");
  run->add_option("--task", run_opt.task, "Task id")->capture_default_str();
  run->add_option("--k", run_opt.k, "Covering set size")->capture_default_str();
  run->add_option("--budget", run_opt.budget, "Evaluations per run")->capture_default_str();
  run->add_option("--mode", run_opt.modes, "mocobo, random, per_objective, oracle_partition (comma list)")
      ->capture_default_str();
  run->add_option("--seed", run_opt.seed, "Base seed")->capture_default_str();
  run->add_option("--reps", run_opt.reps, "Replications")->capture_default_str();
  run->add_option("--out", run_opt.out, "Output directory")->capture_default_str();
  run->add_option("--stride", run_opt.stride, "Trajectory stride")->capture_default_str();
  run->add_option("--config", run_opt.config_path, "JSON config; its keys override flags");

  std::size_t cover_k = 1;
  std::string cover_input;
  bool cover_exact = false;
  auto* cover = app.add_subcommand("cover", "Select a covering set from a CSV objective matrix");
  cover->add_option("--k", cover_k, "Covering set size")->required();
  cover->add_option("--input", cover_input, "CSV with header obj_1,...,obj_T")->required();
  cover->add_flag("--exact", cover_exact, "Exhaustive search instead of greedy");

  auto* tasks = app.add_subcommand("tasks", "Task registry");
  tasks->require_subcommand(1);
  auto* tasks_list = tasks->add_subcommand("list", "List task ids");
  std::string export_id;
  std::string export_params;
  auto* tasks_export = tasks->add_subcommand("export", "Print task geometry as JSON");
  tasks_export->add_option("--task", export_id, "Task id")->required();
  tasks_export->add_option("--params", export_params, "Task parameters as JSON");

  auto* defaults = app.add_subcommand("defaults", "Print every default setting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return do_run(run_opt);
    if (*cover) return do_cover(cover_k, cover_input, cover_exact);
    if (*tasks_list) return do_tasks_list();
    if (*tasks_export) return do_tasks_export(export_id, export_params);
    if (*defaults) return do_defaults();
  } catch (const covebo::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
