#include "bchg/exp/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bchg/errors.hpp"
#include "bchg/exp/toml.hpp"

namespace bchg {

std::string task_name(Task task) {
  switch (task) {
    case Task::kFourRooms: return "four_rooms";
    case Task::kToyMg: return "toy_mg";
    case Task::kThermal: return "thermal";
    case Task::kBilevelLqr: return "bilevel_lqr";
    case Task::kCustom: return "custom";
  }
  return "unknown";
}

std::string method_name(Method method) {
  switch (method) {
    case Method::kBchg: return "bchg";
    case Method::kNaivePgd: return "naive_pgd";
    case Method::kHpgdOracle: return "hpgd_oracle";
    case Method::kHpgdMc: return "hpgd_mc";
    case Method::kHpgdSarsa: return "hpgd_sarsa";
    case Method::kHpgdTd: return "hpgd_td";
    case Method::kSobirl: return "sobirl";
    case Method::kBiac: return "biac";
  }
  return "unknown";
}

Task task_from_name(const std::string& name) {
  for (Task t : {Task::kFourRooms, Task::kToyMg, Task::kThermal, Task::kBilevelLqr,
                 Task::kCustom}) {
    if (task_name(t) == name) return t;
  }
  throw ConfigurationError("unknown task '" + name + "'");
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::kBchg, Method::kNaivePgd, Method::kHpgdOracle, Method::kHpgdMc,
                   Method::kHpgdSarsa, Method::kHpgdTd, Method::kSobirl, Method::kBiac}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigurationError("unknown method '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (beta <= 0.0) throw DomainError("config: beta must be positive");
  if (horizon < 1 || batch_size < 1 || outer_iters < 0) {
    throw ConfigurationError("config: horizon, batch_size and outer_iters must be positive");
  }
  if (seeds.empty()) throw ConfigurationError("config: at least one seed required");

  const bool tabular = task == Task::kFourRooms || task == Task::kToyMg || task == Task::kCustom;
  const bool markov_game = task == Task::kToyMg || task == Task::kBilevelLqr;
  const bool continuous = task == Task::kThermal || task == Task::kBilevelLqr;

  auto reject = [&](const std::string& why) {
    throw ConfigurationError("config: " + method_name(method) + " on " + task_name(task) +
                             " rejected: " + why);
  };

  if (markov_game) {
    if (method == Method::kSobirl || method == Method::kHpgdOracle ||
        method == Method::kHpgdMc || method == Method::kHpgdSarsa ||
        method == Method::kHpgdTd) {
      reject("configurable-MDP estimator on a Markov game");
    }
    if (method == Method::kBiac && task == Task::kBilevelLqr) {
      reject("stage-game argmax needs finite action sets");
    }
  } else {
    if (method == Method::kBiac) reject("stage-game target needs a Markov game");
    if (method == Method::kSobirl) {
      if (task == Task::kThermal) {
        reject("one-step truncation is infeasible with leader-dependent transitions");
      }
      if (task == Task::kCustom && custom_theta_transitions) {
        reject("one-step truncation is infeasible with leader-dependent transitions");
      }
    }
    if (continuous) {
      if (method == Method::kHpgdOracle) reject("arbitrary-state resets unavailable");
      if (method == Method::kHpgdMc || method == Method::kHpgdSarsa) {
        reject(
            "continuous states make every (s,b) key a single-segment key, so the "
            "advantage-gradient difference has no revisit support (missing-data regime)");
      }
    }
    if (!continuous && method == Method::kHpgdTd) {
      reject("the vector TD regressor variant targets continuous states");
    }
  }
  if (eval_exact && continuous) {
    throw ConfigurationError("config: exact evaluation unsupported on continuous tasks");
  }
  (void)tabular;
}

ExperimentConfig ExperimentConfig::preset(Task task, Method method, bool desk_scale) {
  ExperimentConfig c;
  c.task = task;
  c.method = method;
  switch (task) {
    case Task::kFourRooms:
      c.beta = 1e-3;
      c.batch_size = 100;
      c.horizon = 100;
      c.outer_iters = 1000;
      c.actor_lr = 0.1;
      c.critic_lr = 0.5;
      c.grad_clip = 1.0;
      c.eval_exact = true;
      c.eval_every = 1;
      c.oracle_rollouts = desk_scale ? 200 : 10000;
      c.hpgd_lenient = true;
      c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
      break;
    case Task::kToyMg:
      c.beta = 5e-2;
      c.batch_size = 450;  // 3 trajectories
      c.horizon = 150;
      c.outer_iters = desk_scale ? 1500 : 3000;
      c.actor_lr = 1e-4;
      c.critic_lr = 1e-3;
      c.actor_updates = 5;
      c.critic_updates = 5;
      c.minibatch = 64;
      c.buffer_steps = 450;
      c.grad_clip = 1.0;
      c.target_smoothing = 1e-2;
      c.eval_exact = false;
      c.eval_every = 1;
      c.eval_rollouts = 10;
      c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
      break;
    case Task::kThermal:
      c.beta = 1e-1;
      c.batch_size = 10000;  // 100 trajectories of 100 steps
      c.horizon = 100;
      c.outer_iters = desk_scale ? 50 : 250;
      c.actor_lr = 1e-2;
      c.td_updates = desk_scale ? 1000 : 5000;
      c.td_lr = 1e-4;
      c.v_l_samples = 256;
      c.critic_reinit = true;
      c.minibatch = 64;
      c.grad_clip = 1.0;
      c.eval_exact = false;
      c.eval_every = 10;
      c.eval_rollouts = 50;
      c.max_riccati_iters = 50000;
      c.solve_tol = 1e-10;
      c.target_smoothing = 1e-2;
      c.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
      break;
    case Task::kBilevelLqr:
      c.beta = 1e-1;
      c.batch_size = 400;  // 4 trajectories of 100 steps
      c.horizon = 100;
      c.outer_iters = desk_scale ? 310 : 310;
      c.actor_lr = 1e-1;
      c.critic_lr = 1e-1;
      c.actor_updates = 5;
      c.critic_updates = 5;
      c.minibatch = 64;
      c.buffer_steps = 400;
      c.warmup_steps = 4000;
      c.grad_clip = 1.0;
      c.target_smoothing = 1e-2;
      c.eval_exact = false;
      c.eval_every = 10;
      c.eval_rollouts = 10;
      c.v_l_samples = 64;
      c.max_riccati_iters = 1000;
      c.solve_tol = 1e-10;
      c.seeds = {1,  2,  3,  4,  5,  6,  7,  8,  9,  10,
                 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
      break;
    case Task::kCustom:
      c.beta = 1e-1;
      c.batch_size = 200;
      c.horizon = 50;
      c.outer_iters = 50;
      c.actor_lr = 0.05;
      c.critic_lr = 0.5;
      c.grad_clip = 1.0;
      c.eval_exact = true;
      c.hpgd_lenient = true;
      c.seeds = {1, 2, 3};
      break;
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_toml_text(const std::string& text) {
  const TomlTable t = TomlTable::parse(text);
  const Task task = task_from_name(t.get_string("experiment.task"));
  const Method method = method_from_name(t.get_string("experiment.method"));
  const bool desk = t.get_bool_or("experiment.desk_scale", true);
  ExperimentConfig c = preset(task, method, desk);

  auto num = [&](const char* key, double& field) {
    if (t.has(std::string("experiment.") + key)) field = t.get_number(std::string("experiment.") + key);
  };
  auto integer = [&](const char* key, int& field) {
    if (t.has(std::string("experiment.") + key)) {
      field = static_cast<int>(t.get_integer(std::string("experiment.") + key));
    }
  };
  auto boolean = [&](const char* key, bool& field) {
    if (t.has(std::string("experiment.") + key)) field = t.get_bool(std::string("experiment.") + key);
  };

  num("beta", c.beta);
  integer("batch_size", c.batch_size);
  integer("horizon", c.horizon);
  integer("outer_iters", c.outer_iters);
  num("actor_lr", c.actor_lr);
  num("critic_lr", c.critic_lr);
  integer("actor_updates", c.actor_updates);
  integer("critic_updates", c.critic_updates);
  integer("minibatch", c.minibatch);
  if (t.has("experiment.buffer_steps")) c.buffer_steps = t.get_integer("experiment.buffer_steps");
  boolean("off_policy", c.off_policy);
  num("grad_clip", c.grad_clip);
  integer("oracle_rollouts", c.oracle_rollouts);
  integer("eval_every", c.eval_every);
  integer("eval_rollouts", c.eval_rollouts);
  boolean("eval_exact", c.eval_exact);
  integer("v_l_samples", c.v_l_samples);
  integer("td_updates", c.td_updates);
  num("td_lr", c.td_lr);
  boolean("critic_reinit", c.critic_reinit);
  num("target_smoothing", c.target_smoothing);
  num("solve_tol", c.solve_tol);
  integer("max_riccati_iters", c.max_riccati_iters);
  integer("warmup_steps", c.warmup_steps);
  boolean("zero_wall_clock", c.zero_wall_clock);
  boolean("hpgd_lenient", c.hpgd_lenient);
  if (t.has("experiment.map_path")) c.map_path = t.get_string("experiment.map_path");
  integer("custom_states", c.custom_states);
  integer("custom_actions", c.custom_actions);
  integer("custom_dim", c.custom_dim);
  if (t.has("experiment.custom_seed")) {
    c.custom_seed = static_cast<std::uint64_t>(t.get_integer("experiment.custom_seed"));
  }
  boolean("custom_theta_transitions", c.custom_theta_transitions);
  boolean("custom_theta_rewards", c.custom_theta_rewards);
  boolean("custom_theta_initial", c.custom_theta_initial);
  boolean("custom_theta_leader_reward", c.custom_theta_leader_reward);

  if (t.has("experiment.seeds")) {
    c.seeds.clear();
    for (double s : t.get_numbers("experiment.seeds")) {
      c.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_toml_text(buffer.str());
}

}  // namespace bchg
