#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bchg {

enum class Task { kFourRooms, kToyMg, kThermal, kBilevelLqr, kCustom };
enum class Method { kBchg, kNaivePgd, kHpgdOracle, kHpgdMc, kHpgdSarsa, kHpgdTd, kSobirl, kBiac };

std::string task_name(Task task);
std::string method_name(Method method);
Task task_from_name(const std::string& name);
Method method_from_name(const std::string& name);

struct ExperimentConfig {
  Task task = Task::kFourRooms;
  Method method = Method::kBchg;

  double beta = 1e-3;
  int batch_size = 100;  // transitions sampled per outer iteration
  int horizon = 100;     // episode length
  int outer_iters = 250;

  double actor_lr = 0.1;
  double critic_lr = 0.5;  // SARSA or TD learning rate
  int actor_updates = 1;
  int critic_updates = 1;
  int minibatch = 64;
  long buffer_steps = 0;  // 0: fresh batch only
  bool off_policy = false;

  double grad_clip = 1.0;  // <= 0 disables clipping
  std::vector<std::uint64_t> seeds;

  int oracle_rollouts = 10000;  // trajectories per outer iteration (hpgd_oracle)
  int eval_every = 1;
  int eval_rollouts = 10;
  bool eval_exact = true;

  int v_l_samples = 256;  // follower-action draws for the critic-based V_L
  int td_updates = 5000;  // per-outer-iteration TD steps (thermal presets)
  double td_lr = 1e-4;
  bool critic_reinit = false;
  double target_smoothing = 1e-2;

  double solve_tol = 1e-10;
  int max_riccati_iters = 50000;
  int warmup_steps = 0;  // env steps with random leader actions (bilevel LQR)

  bool zero_wall_clock = false;
  bool hpgd_lenient = false;  // experiment-loop behavior for sparse revisits

  std::string map_path;  // four rooms; empty -> canonical layout

  // synthetic tabular task
  int custom_states = 4;
  int custom_actions = 2;
  int custom_dim = 2;
  std::uint64_t custom_seed = 7;
  bool custom_theta_transitions = true;
  bool custom_theta_rewards = true;
  bool custom_theta_initial = true;
  bool custom_theta_leader_reward = true;

  int trajectories_per_iter() const { return std::max(1, batch_size / horizon); }

  // Method/task compatibility and parameter sanity; throws ConfigurationError.
  void validate() const;

  static ExperimentConfig preset(Task task, Method method, bool desk_scale = true);
  static ExperimentConfig from_toml_file(const std::string& path);
  static ExperimentConfig from_toml_text(const std::string& text);
};

}  // namespace bchg
