#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "bchg/envs/toy_mg.hpp"
#include "bchg/errors.hpp"
#include "bchg/exp/config.hpp"
#include "bchg/exp/metrics.hpp"
#include "bchg/exp/runner.hpp"
#include "bchg/exp/svg.hpp"
#include "bchg/exp/toml.hpp"
#include "bchg/hypergrad.hpp"
#include "bchg/lqr.hpp"

namespace fs = std::filesystem;
using namespace bchg;

namespace {

std::vector<std::string> expand_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const std::string name = p.filename().string();
  if (name.find('*') == std::string::npos) return {pattern};
  const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
  const size_t star = name.find('*');
  const std::string prefix = name.substr(0, star);
  const std::string suffix = name.substr(star + 1);
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string f = entry.path().filename().string();
    if (f.size() >= prefix.size() + suffix.size() && f.rfind(prefix, 0) == 0 &&
        f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

PlotSeries series_from_csv(const std::string& path) {
  const auto records = read_metrics_csv(path);
  std::map<std::uint64_t, std::map<int, double>> by_seed;
  for (const auto& r : records) {
    if (r.iter >= 0) by_seed[r.seed][r.iter] = r.objective;
  }
  PlotSeries series;
  series.label = fs::path(path).stem().string();
  bool first = true;
  for (const auto& [seed, curve] : by_seed) {
    if (first) {
      for (const auto& [iter, value] : curve) series.iters.push_back(iter);
      first = false;
    }
    std::vector<double> vals;
    for (int iter : series.iters) {
      auto it = curve.find(iter);
      vals.push_back(it == curve.end() ? std::nan("") : it->second);
    }
    series.per_seed.push_back(std::move(vals));
  }
  return series;
}

int run_check() {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
  };

  // covariance-trick equivalence on a few random models
  {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 3; ++s) {
      RandomCmdpOptions opt;
      opt.n_states = 4;
      opt.n_actions = 3;
      opt.dim = 2;
      const auto family = random_cmdp_family(opt, 11 + s);
      const auto model = family.build(Eigen::VectorXd::Constant(2, 0.1));
      const auto sol = exact_cmdp_solution(model, 0.1);
      const Eigen::VectorXd cov = exact_guiding_term_cmdp(model, sol, GuidingForm::kCovariance);
      const Eigen::VectorXd hp = exact_guiding_term_cmdp(model, sol, GuidingForm::kHpgd);
      worst = std::max(worst, (cov - hp).cwiseAbs().maxCoeff());
    }
    report("covariance-trick equivalence", worst < 1e-8, "max diff " + std::to_string(worst));
  }

  // hypergradient vs central finite differences
  {
    RandomCmdpOptions opt;
    opt.n_states = 3;
    opt.n_actions = 2;
    opt.dim = 2;
    const auto family = random_cmdp_family(opt, 3);
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(2, -0.2);
    const auto est = exact_hypergradient_cmdp(family.build(theta), 0.1);
    Eigen::VectorXd fd(2);
    for (int k = 0; k < 2; ++k) {
      Eigen::VectorXd up = theta, dn = theta;
      up[k] += 1e-5;
      dn[k] -= 1e-5;
      fd[k] = (exact_leader_objective(family.build(up), 0.1, 1e-12) -
               exact_leader_objective(family.build(dn), 0.1, 1e-12)) /
              2e-5;
    }
    const double rel = (est.total - fd).norm() / std::max(1e-12, fd.norm());
    report("hypergradient finite-difference oracle", rel < 1e-3,
           "rel err " + std::to_string(rel));
  }

  // scalar Riccati root
  {
    Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    const Eigen::MatrixXd p = riccati_solve(one, one, one, one, 0.9);
    report("scalar Riccati root", std::abs(p(0, 0) - 1.58840) < 1e-4,
           "P = " + std::to_string(p(0, 0)));
  }

  // benefit zero-mean under the exact best response
  {
    RandomCmdpOptions opt;
    const auto family = random_cmdp_family(opt, 5);
    const auto model = family.build(Eigen::VectorXd::Zero(opt.dim));
    const auto sol = exact_cmdp_solution(model, 0.1);
    const double worst =
        (sol.benefit_table.array() * sol.best_response.probs.array()).rowwise().sum().abs().maxCoeff();
    report("benefit zero-mean", worst < 1e-10, "max " + std::to_string(worst));
  }

  // determinism of a tiny experiment
  {
    ExperimentConfig config = ExperimentConfig::preset(Task::kCustom, Method::kBchg);
    config.outer_iters = 3;
    config.seeds = {5};
    config.zero_wall_clock = true;
    const auto a = run_experiment_in_memory(config);
    const auto b = run_experiment_in_memory(config);
    bool same = a.records.size() == b.records.size();
    for (size_t i = 0; same && i < a.records.size(); ++i) {
      same = a.records[i].objective == b.records[i].objective &&
             a.records[i].total_norm == b.records[i].total_norm;
    }
    report("deterministic rerun", same);
  }

  // missing-revisit surfacing
  {
    RandomCmdpOptions opt;
    opt.n_states = 3;
    opt.n_actions = 2;
    const auto family = random_cmdp_family(opt, 9);
    const auto model = family.build(Eigen::VectorXd::Zero(opt.dim));
    std::vector<Segment> empty;
    bool raised = false;
    try {
      follower_q_grad_cmdp(empty, model, Eigen::VectorXd::Zero(3));
    } catch (const MissingDataError&) {
      raised = true;
    }
    report("missing-data surfacing", raised);
  }

  std::cout << (failures == 0 ? "check passed" : "check FAILED") << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized bi-level RL experiments (hypergradient leader updates)"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run one experiment configuration");
  std::string run_config_path;
  std::string run_task = "four_rooms", run_method = "bchg", run_out = "out";
  int seed_offset = 0;
  bool full_scale = false;
  run->add_option("--config", run_config_path, "TOML config path");
  run->add_option("--task", run_task, "preset task when no config file is given");
  run->add_option("--method", run_method, "preset method when no config file is given");
  run->add_option("--seed-offset", seed_offset, "shift every seed by k");
  run->add_option("--out", run_out, "output directory");
  run->add_flag("--full", full_scale, "full-scale preset (default: desk scale)");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "grid search over hyperparameters");
  std::string grid_config_path, grid_spec_path, grid_out = "out/grid";
  grid_cmd->add_option("--config", grid_config_path, "TOML config path")->required();
  grid_cmd->add_option("--grid", grid_spec_path, "TOML grid spec ([grid] key = [values])")
      ->required();
  grid_cmd->add_option("--out", grid_out, "output directory");

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "render mean+-std learning curves to SVG");
  std::vector<std::string> plot_patterns;
  std::string plot_out = "plot.svg", plot_title;
  bool trimmed = false;
  plot_cmd->add_option("--metrics", plot_patterns, "metrics CSV paths or globs")->required();
  plot_cmd->add_option("--out", plot_out, "output SVG path");
  plot_cmd->add_option("--title", plot_title, "plot title");
  plot_cmd->add_flag("--trimmed", trimmed, "drop per-iteration min/max before aggregating");

  // check
  auto* check_cmd = app.add_subcommand("check", "run the oracle/invariant quick suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentConfig config =
          run_config_path.empty()
              ? ExperimentConfig::preset(task_from_name(run_task),
                                         method_from_name(run_method), !full_scale)
              : ExperimentConfig::from_toml_file(run_config_path);
      config.validate();
      const std::string path = run_experiment(config, run_out, seed_offset);
      std::cout << path << "\n";
      return 0;
    }
    if (grid_cmd->parsed()) {
      const ExperimentConfig base = ExperimentConfig::from_toml_file(grid_config_path);
      const TomlTable spec = TomlTable::parse_file(grid_spec_path);
      std::map<std::string, std::vector<double>> axes;
      for (const auto& [key, value] : spec.values()) {
        if (key.rfind("grid.", 0) == 0 && value.kind == TomlValue::Kind::kNumberArray) {
          axes[key.substr(5)] = value.numbers;
        }
      }
      const GridSearchResult result = grid_search(base, axes, grid_out);
      std::cout << "cells: " << result.cells.size() << "\n";
      for (size_t i = 0; i < result.cells.size(); ++i) {
        std::cout << "cell " << i << " mean_final=" << result.cells[i].mean_final_objective;
        for (const auto& [k, v] : result.cells[i].assignment) std::cout << " " << k << "=" << v;
        std::cout << "\n";
      }
      std::cout << "best cell: " << result.best_index << "\n";
      return 0;
    }
    if (plot_cmd->parsed()) {
      std::vector<PlotSeries> series;
      for (const auto& pattern : plot_patterns) {
        for (const auto& path : expand_glob(pattern)) series.push_back(series_from_csv(path));
      }
      if (series.empty()) throw ConfigurationError("plot: no metrics files matched");
      PlotOptions options;
      options.title = plot_title;
      options.trimmed = trimmed;
      emit_plot(plot_out, series, options);
      std::cout << plot_out << "\n";
      return 0;
    }
    if (check_cmd->parsed()) return run_check();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
