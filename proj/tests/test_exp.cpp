#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bchg/errors.hpp"
#include "bchg/exp/buffer.hpp"
#include "bchg/exp/config.hpp"
#include "bchg/exp/metrics.hpp"
#include "bchg/exp/runner.hpp"
#include "bchg/exp/svg.hpp"
#include "bchg/exp/toml.hpp"

using namespace bchg;

namespace {

std::string temp_dir() {
  const std::string dir =
      (std::filesystem::temp_directory_path() / "bchg_test_out").string();
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("toml subset: sections, scalars, arrays, comments") {
  const std::string text =
      "# comment\n"
      "[experiment]\n"
      "task = \"four_rooms\"  # trailing comment\n"
      "beta = 1e-3\n"
      "desk_scale = true\n"
      "seeds = [1, 2, 3]\n"
      "names = [\"a\", \"b\"]\n";
  const TomlTable t = TomlTable::parse(text);
  CHECK(t.get_string("experiment.task") == "four_rooms");
  CHECK(t.get_number("experiment.beta") == doctest::Approx(1e-3));
  CHECK(t.get_bool("experiment.desk_scale"));
  CHECK(t.get_numbers("experiment.seeds") == std::vector<double>{1, 2, 3});
  CHECK(t.get_strings("experiment.names") == std::vector<std::string>{"a", "b"});
  CHECK(t.get_number_or("experiment.missing", 7.0) == 7.0);
  CHECK_THROWS_AS(t.get_number("experiment.task"), ConfigurationError);
  CHECK_THROWS_AS(TomlTable::parse("key value\n"), ConfigurationError);
}

TEST_CASE("config from toml overrides the preset") {
  const std::string text =
      "[experiment]\n"
      "task = \"custom\"\n"
      "method = \"bchg\"\n"
      "outer_iters = 7\n"
      "beta = 0.25\n"
      "seeds = [11, 12]\n";
  const ExperimentConfig c = ExperimentConfig::from_toml_text(text);
  CHECK(c.task == Task::kCustom);
  CHECK(c.outer_iters == 7);
  CHECK(c.beta == doctest::Approx(0.25));
  REQUIRE(c.seeds.size() == 2);
  CHECK(c.seeds[0] == 11);
}

TEST_CASE("method/task compatibility matrix") {
  auto cfg = [](Task t, Method m) {
    ExperimentConfig c = ExperimentConfig::preset(t, m);
    return c;
  };
  CHECK_THROWS_AS(cfg(Task::kThermal, Method::kSobirl).validate(), ConfigurationError);
  CHECK_THROWS_AS(cfg(Task::kThermal, Method::kHpgdOracle).validate(), ConfigurationError);
  CHECK_THROWS_AS(cfg(Task::kThermal, Method::kHpgdMc).validate(), ConfigurationError);
  CHECK_THROWS_AS(cfg(Task::kBilevelLqr, Method::kBiac).validate(), ConfigurationError);
  CHECK_THROWS_AS(cfg(Task::kBilevelLqr, Method::kHpgdTd).validate(), ConfigurationError);
  CHECK_THROWS_AS(cfg(Task::kToyMg, Method::kSobirl).validate(), ConfigurationError);
  CHECK_THROWS_AS(cfg(Task::kFourRooms, Method::kBiac).validate(), ConfigurationError);
  CHECK_THROWS_AS(cfg(Task::kFourRooms, Method::kHpgdTd).validate(), ConfigurationError);
  CHECK_NOTHROW(cfg(Task::kFourRooms, Method::kSobirl).validate());
  CHECK_NOTHROW(cfg(Task::kFourRooms, Method::kHpgdOracle).validate());
  CHECK_NOTHROW(cfg(Task::kThermal, Method::kHpgdTd).validate());
  CHECK_NOTHROW(cfg(Task::kToyMg, Method::kBiac).validate());

  // custom task with leader-dependent transitions rejects the truncation method
  ExperimentConfig custom = ExperimentConfig::preset(Task::kCustom, Method::kSobirl);
  CHECK_THROWS_AS(custom.validate(), ConfigurationError);
  custom.custom_theta_transitions = false;
  CHECK_NOTHROW(custom.validate());
}

TEST_CASE("on-policy presets size the buffer to one fresh batch") {
  const ExperimentConfig toy = ExperimentConfig::preset(Task::kToyMg, Method::kBchg);
  CHECK(toy.buffer_steps == toy.batch_size);
  const ExperimentConfig lqr = ExperimentConfig::preset(Task::kBilevelLqr, Method::kBchg);
  CHECK(lqr.buffer_steps == lqr.batch_size);
}

TEST_CASE("trajectory buffer evicts everything older than its capacity") {
  TrajectoryBuffer buffer;
  buffer.capacity_steps = 6;
  auto traj = [](int label) {
    DiscreteTrajectory t;
    for (int i = 0; i < 3; ++i) t.steps.push_back({label, -1, 0, 0.0, 0.0, label});
    return t;
  };
  buffer.push(traj(1));
  buffer.push(traj(2));
  CHECK(buffer.trajs.size() == 2);
  buffer.push(traj(3));
  buffer.push(traj(4));
  REQUIRE(buffer.trajs.size() == 2);
  CHECK(buffer.trajs[0].steps[0].state == 3);
  CHECK(buffer.trajs[1].steps[0].state == 4);
}

TEST_CASE("metrics csv round trip") {
  std::vector<MetricsRecord> rows(2);
  rows[0].seed = 3;
  rows[0].iter = 0;
  rows[0].objective = 1.25;
  rows[0].comp_2 = -0.5;
  rows[1].seed = 3;
  rows[1].iter = 1;
  rows[1].objective = 2.5;
  rows[1].wall_ms = 12;
  const std::string path = temp_dir() + "/roundtrip.csv";
  write_metrics_csv(path, rows);
  const auto back = read_metrics_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].objective == 1.25);
  CHECK(back[0].comp_2 == -0.5);
  CHECK(back[1].wall_ms == 12);
  const std::string text = read_file(path);
  CHECK(text.rfind("seed,iter,objective", 0) == 0);
}

TEST_CASE("series aggregation: mean, band, trimming") {
  // two seeds 0 and 1: mean 0.5, std 0.5
  const SeriesStats plain = aggregate_series({{0.0, 0.0}, {1.0, 1.0}}, false);
  CHECK(plain.mean[0] == doctest::Approx(0.5));
  CHECK(plain.stddev[0] == doctest::Approx(0.5));

  // trimmed statistics drop the outlier
  std::vector<std::vector<double>> seeds;
  for (int i = 0; i < 9; ++i) seeds.push_back({1.0});
  seeds.push_back({100.0});
  const SeriesStats trimmed = aggregate_series(seeds, true);
  CHECK(trimmed.mean[0] == doctest::Approx(1.0));
  const SeriesStats untrimmed = aggregate_series(seeds, false);
  CHECK(untrimmed.mean[0] > 5.0);

  CHECK_THROWS_AS(aggregate_series({{1.0}, {1.0, 2.0}}, false), ConfigurationError);
}

TEST_CASE("emit_plot writes an SVG with one polyline per series") {
  PlotSeries s;
  s.label = "flat";
  s.iters = {0, 1, 2};
  s.per_seed = {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
  const std::string path = temp_dir() + "/plot.svg";
  emit_plot(path, {s}, PlotOptions{});
  const std::string text = read_file(path);
  CHECK(text.find("<svg") != std::string::npos);
  CHECK(text.find("polyline") != std::string::npos);
  CHECK(text.find("flat") != std::string::npos);
}

TEST_CASE("run_experiment: zero iterations record only the initial evaluation") {
  ExperimentConfig config = ExperimentConfig::preset(Task::kCustom, Method::kBchg);
  config.outer_iters = 0;
  config.seeds = {4, 5};
  config.zero_wall_clock = true;
  const RunResult result = run_experiment_in_memory(config);
  REQUIRE(result.records.size() == 2);
  CHECK(result.records[0].iter == 0);
  CHECK(result.records[1].iter == 0);
}

TEST_CASE("run_experiment: theta-free direct effects keep naive descent still") {
  ExperimentConfig config = ExperimentConfig::preset(Task::kCustom, Method::kNaivePgd);
  config.outer_iters = 5;
  config.seeds = {9};
  config.zero_wall_clock = true;
  config.custom_theta_leader_reward = false;
  config.custom_theta_transitions = false;
  config.custom_theta_initial = false;
  const RunResult result = run_experiment_in_memory(config);
  REQUIRE(result.records.size() == 6);
  const double first = result.records.front().objective;
  for (const auto& r : result.records) {
    CHECK(r.objective == doctest::Approx(first).epsilon(1e-12));
    CHECK(r.total_norm == 0.0);
  }
}

TEST_CASE("run_experiment: byte-identical rerun with zeroed wall clock") {
  ExperimentConfig config = ExperimentConfig::preset(Task::kCustom, Method::kBchg);
  config.outer_iters = 4;
  config.seeds = {1, 2};
  config.zero_wall_clock = true;
  const std::string dir = temp_dir();
  const std::string a = run_experiment(config, dir + "/detA");
  const std::string b = run_experiment(config, dir + "/detB");
  CHECK(read_file(a) == read_file(b));
}

TEST_CASE("run_experiment: a failing seed leaves a logged failure row") {
  ExperimentConfig config = ExperimentConfig::preset(Task::kCustom, Method::kHpgdSarsa);
  config.outer_iters = 2;
  config.seeds = {3};
  config.batch_size = 1;
  config.horizon = 1;  // single one-step trajectory cannot support revisits
  config.hpgd_lenient = false;
  config.zero_wall_clock = true;
  const RunResult result = run_experiment_in_memory(config);
  REQUIRE(result.records.size() == 1);
  CHECK(result.records[0].iter == -1);
  CHECK(std::isnan(result.records[0].objective));
}

TEST_CASE("grid search scores cells by mean final objective") {
  ExperimentConfig base = ExperimentConfig::preset(Task::kCustom, Method::kBchg);
  base.outer_iters = 3;
  base.seeds = {1, 2};
  base.zero_wall_clock = true;
  const std::string dir = temp_dir() + "/grid";

  // single cell: identity
  const GridSearchResult single = grid_search(base, {{"actor_lr", {0.05}}}, dir);
  REQUIRE(single.cells.size() == 1);
  CHECK(single.best_index == 0);
  CHECK(single.best_config.actor_lr == doctest::Approx(0.05));

  // two cells: the selection matches the reported means
  const GridSearchResult two = grid_search(base, {{"actor_lr", {0.0, 0.05}}}, dir);
  REQUIRE(two.cells.size() == 2);
  const int argmax =
      two.cells[0].mean_final_objective >= two.cells[1].mean_final_objective ? 0 : 1;
  CHECK(two.best_index == argmax);
  CHECK(std::filesystem::exists(two.cells[0].metrics_path));

  CHECK_THROWS_AS(grid_search(base, {}, dir), ConfigurationError);
  CHECK_THROWS_AS(grid_search(base, {{"actor_lr", {}}}, dir), ConfigurationError);
  CHECK_THROWS_AS(grid_search(base, {{"unknown_key", {1.0}}}, dir), ConfigurationError);
}

TEST_CASE("evaluate_leader_exact is reproducible and matches the runner's metric") {
  RandomCmdpOptions opt;
  const auto family = random_cmdp_family(opt, 7);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(opt.dim);
  const double a = evaluate_leader_exact(family, theta, 0.1);
  const double b = evaluate_leader_exact(family, theta, 0.1);
  CHECK(a == b);
}
