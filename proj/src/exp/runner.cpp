#include "bchg/exp/runner.hpp"

#include <atomic>
#include <map>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <sstream>
#include <thread>

#include "bchg/errors.hpp"

namespace bchg {

int default_worker_count() {
  if (const char* env = std::getenv("BCHG_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

std::vector<MetricsRecord> run_seed_dispatch(const ExperimentConfig& config,
                                             std::uint64_t seed) {
  switch (config.task) {
    case Task::kFourRooms:
    case Task::kCustom:
      return run_tabular_cmdp_seed(config, seed);
    case Task::kToyMg:
      return run_toy_mg_seed(config, seed);
    case Task::kThermal:
      return run_thermal_seed(config, seed);
    case Task::kBilevelLqr:
      return run_bilevel_lqr_seed(config, seed);
  }
  throw ConfigurationError("run_experiment: unknown task");
}

}  // namespace

RunResult run_experiment_in_memory(const ExperimentConfig& config) {
  config.validate();
  const int n_seeds = static_cast<int>(config.seeds.size());
  std::vector<std::vector<MetricsRecord>> per_seed(n_seeds);
  std::atomic<int> next{0};
  const int workers = std::min(default_worker_count(), n_seeds);

  auto work = [&]() {
    while (true) {
      const int idx = next.fetch_add(1);
      if (idx >= n_seeds) break;
      const std::uint64_t seed = config.seeds[idx];
      try {
        per_seed[idx] = run_seed_dispatch(config, seed);
      } catch (const std::exception&) {
        MetricsRecord failure;
        failure.seed = seed;
        failure.iter = -1;
        failure.objective = std::numeric_limits<double>::quiet_NaN();
        per_seed[idx] = {failure};
      }
    }
  };

  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  RunResult result;
  for (const auto& rows : per_seed) {
    result.records.insert(result.records.end(), rows.begin(), rows.end());
  }
  return result;
}

std::string run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                           int seed_offset) {
  ExperimentConfig shifted = config;
  if (seed_offset != 0) {
    for (auto& s : shifted.seeds) s += static_cast<std::uint64_t>(seed_offset);
  }
  const RunResult result = run_experiment_in_memory(shifted);
  std::filesystem::create_directories(out_dir);
  const std::string path =
      out_dir + "/" + task_name(config.task) + "_" + method_name(config.method) + ".csv";
  write_metrics_csv(path, result.records);
  return path;
}

double mean_final_objective(const std::vector<MetricsRecord>& records) {
  // last evaluated row per seed; a seed whose rows are all failure markers is
  // excluded
  std::map<std::uint64_t, MetricsRecord> finals;
  for (const auto& r : records) {
    if (r.iter < 0) continue;
    auto it = finals.find(r.seed);
    if (it == finals.end() || r.iter > it->second.iter) finals[r.seed] = r;
  }
  double acc = 0.0;
  int count = 0;
  for (const auto& [seed, r] : finals) {
    if (!std::isfinite(r.objective)) continue;
    acc += r.objective;
    ++count;
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return acc / static_cast<double>(count);
}

ExperimentConfig apply_grid_assignment(ExperimentConfig config,
                                       const std::map<std::string, double>& assignment) {
  for (const auto& [key, value] : assignment) {
    if (key == "actor_lr") {
      config.actor_lr = value;
    } else if (key == "critic_lr") {
      config.critic_lr = value;
    } else if (key == "actor_updates") {
      config.actor_updates = static_cast<int>(value);
    } else if (key == "critic_updates") {
      config.critic_updates = static_cast<int>(value);
    } else if (key == "beta") {
      config.beta = value;
    } else if (key == "batch_size") {
      config.batch_size = static_cast<int>(value);
    } else if (key == "off_policy") {
      config.off_policy = value != 0.0;
    } else {
      throw ConfigurationError("grid_search: unsupported grid key '" + key + "'");
    }
  }
  return config;
}

GridSearchResult grid_search(const ExperimentConfig& base,
                             const std::map<std::string, std::vector<double>>& grid,
                             const std::string& out_dir) {
  if (grid.empty()) throw ConfigurationError("grid_search: empty grid");
  for (const auto& [key, values] : grid) {
    if (values.empty()) throw ConfigurationError("grid_search: empty grid axis '" + key + "'");
  }
  std::filesystem::create_directories(out_dir);

  // cross product
  std::vector<std::map<std::string, double>> cells;
  cells.push_back({});
  for (const auto& [key, values] : grid) {
    std::vector<std::map<std::string, double>> expanded;
    for (const auto& cell : cells) {
      for (double v : values) {
        auto next = cell;
        next[key] = v;
        expanded.push_back(std::move(next));
      }
    }
    cells = std::move(expanded);
  }

  GridSearchResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < cells.size(); ++i) {
    const ExperimentConfig config = apply_grid_assignment(base, cells[i]);
    const RunResult run = run_experiment_in_memory(config);
    std::ostringstream name;
    name << out_dir << "/" << task_name(config.task) << "_" << method_name(config.method)
         << "_cell" << i << ".csv";
    write_metrics_csv(name.str(), run.records);

    GridCell cell;
    cell.assignment = cells[i];
    cell.mean_final_objective = mean_final_objective(run.records);
    cell.metrics_path = name.str();
    result.cells.push_back(cell);
    if (std::isfinite(cell.mean_final_objective) && cell.mean_final_objective > best) {
      best = cell.mean_final_objective;
      result.best_index = static_cast<int>(i);
      result.best_config = config;
    }
  }
  if (result.best_index < 0) throw NumericError("grid_search: every cell failed");
  return result;
}

}  // namespace bchg
