#pragma once

#include <map>
#include <string>
#include <vector>

#include "bchg/envs/four_rooms.hpp"
#include "bchg/exp/config.hpp"
#include "bchg/exp/metrics.hpp"
#include "bchg/tabular_cmdp.hpp"

namespace bchg {

struct RunResult {
  std::vector<MetricsRecord> records;
};

// Per-seed runners. Each is deterministic in (config, seed); a failed seed
// surfaces as an exception from these and as a logged failure row (iter = -1,
// objective = nan) from the multi-seed drivers.
std::vector<MetricsRecord> run_tabular_cmdp_seed(const ExperimentConfig& config,
                                                 std::uint64_t seed);
std::vector<MetricsRecord> run_toy_mg_seed(const ExperimentConfig& config, std::uint64_t seed);
std::vector<MetricsRecord> run_thermal_seed(const ExperimentConfig& config, std::uint64_t seed);
std::vector<MetricsRecord> run_bilevel_lqr_seed(const ExperimentConfig& config,
                                                std::uint64_t seed);

// Runs every seed (parallel workers, BCHG_WORKERS or hardware concurrency) and
// returns rows ordered by (seed list position, iter).
RunResult run_experiment_in_memory(const ExperimentConfig& config);

// Writes <out_dir>/<task>_<method>.csv and returns its path.
std::string run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                           int seed_offset = 0);

// Exact upper-level objective for tabular tasks (value of the initial
// distribution under the re-solved best response).
double evaluate_leader_exact(const TabularCmdpFamily& family, const Eigen::VectorXd& theta,
                             double beta, double solve_tol = 1e-10);

struct GridCell {
  std::map<std::string, double> assignment;
  double mean_final_objective = 0.0;
  std::string metrics_path;
};

struct GridSearchResult {
  std::vector<GridCell> cells;
  int best_index = -1;
  ExperimentConfig best_config;
};

// Cross-product search; cells are scored by the mean final-iteration objective
// across seeds. Supported keys: actor_lr, critic_lr, actor_updates,
// critic_updates, beta, batch_size, off_policy.
GridSearchResult grid_search(const ExperimentConfig& base,
                             const std::map<std::string, std::vector<double>>& grid,
                             const std::string& out_dir);

ExperimentConfig apply_grid_assignment(ExperimentConfig config,
                                       const std::map<std::string, double>& assignment);

int default_worker_count();

// Mean final objective per seed list, from a metrics record set.
double mean_final_objective(const std::vector<MetricsRecord>& records);

}  // namespace bchg
