#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

namespace bchg {

// Tabular configurable MDP frozen at one leader configuration theta.
//
// Gradient hooks return d-vectors (d = theta.size()); an empty std::function
// means the quantity does not depend on theta and the gradient is identically
// zero. Instances are immutable after construction and safe to share across
// threads.
struct TabularCmdp {
  int n_states = 0;
  int n_actions = 0;  // follower actions
  Eigen::VectorXd theta;

  std::vector<Eigen::MatrixXd> transition;  // transition[b](s, s'), row-stochastic
  Eigen::VectorXd initial;                  // rho0
  Eigen::MatrixXd reward_follower;          // (s, b)
  Eigen::MatrixXd reward_leader;            // (s, b)
  double gamma_follower = 0.99;
  double gamma_leader = 0.99;

  std::function<Eigen::VectorXd(int s, int b)> grad_reward_follower;
  std::function<Eigen::VectorXd(int s, int b)> grad_reward_leader;
  std::function<Eigen::VectorXd(int s, int b, int s_next)> grad_log_transition;
  std::function<Eigen::VectorXd(int s)> grad_log_initial;
  std::function<double()> regularizer;
  std::function<Eigen::VectorXd()> grad_regularizer;

  int dim() const { return static_cast<int>(theta.size()); }
  bool theta_free_transitions() const { return !grad_log_transition; }

  // Row sums, simplex checks and shape consistency; throws ConfigurationError.
  void validate() const;
};

// Rebuilds the model at a new configuration. Finite differencing and
// best-response re-solves go through the family.
struct TabularCmdpFamily {
  int dim = 0;
  bool theta_free_transitions = false;
  bool theta_free_initial = false;
  std::function<TabularCmdp(const Eigen::VectorXd&)> build;
};

struct RandomCmdpOptions {
  int n_states = 4;
  int n_actions = 2;
  int dim = 2;
  double gamma_follower = 0.9;
  double gamma_leader = 0.9;
  bool theta_rewards = true;
  bool theta_transitions = true;
  bool theta_initial = true;
  bool theta_leader_reward = true;
  bool with_regularizer = false;
};

// Seeded random family with analytic gradient hooks: linear-in-theta rewards
// and softmax-parameterized transition rows / initial distribution.
TabularCmdpFamily random_cmdp_family(const RandomCmdpOptions& options, std::uint64_t seed);

}  // namespace bchg
