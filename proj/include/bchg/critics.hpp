#pragma once

#include <Eigen/Core>
#include <vector>

#include "bchg/mlp.hpp"
#include "bchg/policies.hpp"
#include "bchg/trajectory.hpp"

namespace bchg {

// Dense leader Q-table over (sbar, b); sbar is the state for configurable MDPs
// and the (state, leader action) pair for Markov games.
struct TabularCritic {
  Eigen::MatrixXd q;
  double learning_rate = 0.1;
};

struct TabularTransition {
  int sbar = 0;
  int b = 0;
  double reward = 0.0;
  int sbar_next = 0;
  int b_next = 0;
};

// One SARSA pass, transitions applied in order on a copy:
//   Q(sbar,b) += lr (r + gamma Q(sbar',b') - Q(sbar,b))
TabularCritic sarsa_update(TabularCritic critic, const std::vector<TabularTransition>& batch,
                           double gamma);

// One gradient step on the mean squared error against targets
//   y_j = r_j + gamma * target(next_inputs_j),
// with the target network treated as a constant. rewards has one column per
// critic output (scalar critics use a single column). Throws NumericError on a
// non-finite loss.
void td_update(Mlp& critic, const Mlp& target_net, const Eigen::MatrixXd& inputs,
               const Eigen::MatrixXd& rewards, const Eigen::MatrixXd& next_inputs,
               double gamma, double learning_rate);

// Discounted-return averages over suffix segments keyed by (sbar, b) and by
// sbar. Zero-count keys raise MissingDataError on access.
struct TabularMcValues {
  Eigen::MatrixXd q;
  Eigen::VectorXd v;
  Eigen::MatrixXi q_count;
  Eigen::VectorXi v_count;

  double q_at(int sbar, int b) const;
  double v_at(int sbar) const;
};

TabularMcValues monte_carlo_values(const std::vector<DiscreteTrajectory>& batch, int n_sbar,
                                   int n_actions, double gamma, bool markov_game,
                                   int n_leader_actions = 0);

// SARSA pass followed by V(sbar) = E_{b ~ g}[Q(sbar, b)].
struct TabularValues {
  Eigen::MatrixXd q;
  Eigen::VectorXd v;
};

TabularValues sarsa_values(const std::vector<TabularTransition>& batch, TabularCritic critic,
                           const Eigen::MatrixXd& best_response_probs, double gamma);

// TD regressor for the d-dimensional discounted cumulative vector reward
// (state -> R^d); backs the value-gradient side of HPGD(TD).
class VectorTdRegressor {
 public:
  VectorTdRegressor(int state_dim, int output_dim, Rng& rng, double smoothing = 1e-2);

  void train_step(const Eigen::MatrixXd& states, const Eigen::MatrixXd& vector_rewards,
                  const Eigen::MatrixXd& next_states, double gamma, double learning_rate);

  Eigen::VectorXd predict(const Eigen::VectorXd& state) const { return net_.forward(state); }
  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& states) const {
    return net_.forward_batch(states);
  }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  TargetNetwork target_;
};

}  // namespace bchg
