#include "bchg/critics.hpp"

#include <cmath>

#include "bchg/errors.hpp"

namespace bchg {

TabularCritic sarsa_update(TabularCritic critic, const std::vector<TabularTransition>& batch,
                           double gamma) {
  for (const auto& t : batch) {
    if (t.sbar < 0 || t.sbar >= critic.q.rows() || t.b < 0 || t.b >= critic.q.cols() ||
        t.sbar_next < 0 || t.sbar_next >= critic.q.rows() || t.b_next < 0 ||
        t.b_next >= critic.q.cols()) {
      throw ConfigurationError("sarsa_update: transition index out of range");
    }
    const double target = t.reward + gamma * critic.q(t.sbar_next, t.b_next);
    critic.q(t.sbar, t.b) += critic.learning_rate * (target - critic.q(t.sbar, t.b));
  }
  return critic;
}

void td_update(Mlp& critic, const Mlp& target_net, const Eigen::MatrixXd& inputs,
               const Eigen::MatrixXd& rewards, const Eigen::MatrixXd& next_inputs,
               double gamma, double learning_rate) {
  if (inputs.rows() == 0) throw ConfigurationError("td_update: empty minibatch");
  const Eigen::MatrixXd targets = rewards + gamma * target_net.forward_batch(next_inputs);
  const Eigen::MatrixXd preds = critic.forward_batch(inputs);
  const Eigen::MatrixXd resid = preds - targets;
  const double loss = resid.squaredNorm() / static_cast<double>(inputs.rows());
  if (!std::isfinite(loss)) throw NumericError("td_update: non-finite TD loss");
  // d/dpred of mean_j |pred_j - y_j|^2
  const Eigen::MatrixXd dloss = (2.0 / static_cast<double>(inputs.rows())) * resid;
  critic.apply_gradient(critic.backward_batch(inputs, dloss), learning_rate);
}

double TabularMcValues::q_at(int sbar, int b) const {
  if (q_count(sbar, b) == 0) {
    throw MissingDataError("monte_carlo_values: no segments start at the queried (sbar, b)");
  }
  return q(sbar, b);
}

double TabularMcValues::v_at(int sbar) const {
  if (v_count(sbar) == 0) {
    throw MissingDataError("monte_carlo_values: no segments start at the queried state");
  }
  return v(sbar);
}

TabularMcValues monte_carlo_values(const std::vector<DiscreteTrajectory>& batch, int n_sbar,
                                   int n_actions, double gamma, bool markov_game,
                                   int n_leader_actions) {
  TabularMcValues out;
  out.q = Eigen::MatrixXd::Zero(n_sbar, n_actions);
  out.v = Eigen::VectorXd::Zero(n_sbar);
  out.q_count = Eigen::MatrixXi::Zero(n_sbar, n_actions);
  out.v_count = Eigen::VectorXi::Zero(n_sbar);

  for (const auto& traj : batch) {
    const int horizon = traj.horizon();
    // suffix returns under the leader reward
    std::vector<double> suffix(horizon + 1, 0.0);
    for (int t = horizon - 1; t >= 0; --t) {
      suffix[t] = traj.steps[t].reward_leader + gamma * suffix[t + 1];
    }
    for (int t = 0; t < horizon; ++t) {
      const auto& step = traj.steps[t];
      const int key =
          markov_game ? step.state * n_leader_actions + step.leader_action : step.state;
      out.q(key, step.follower_action) += suffix[t];
      out.q_count(key, step.follower_action) += 1;
      out.v(key) += suffix[t];
      out.v_count(key) += 1;
    }
  }
  for (int s = 0; s < n_sbar; ++s) {
    for (int b = 0; b < n_actions; ++b) {
      if (out.q_count(s, b) > 0) out.q(s, b) /= out.q_count(s, b);
    }
    if (out.v_count(s) > 0) out.v(s) /= out.v_count(s);
  }
  return out;
}

TabularValues sarsa_values(const std::vector<TabularTransition>& batch, TabularCritic critic,
                           const Eigen::MatrixXd& best_response_probs, double gamma) {
  critic = sarsa_update(std::move(critic), batch, gamma);
  TabularValues out;
  out.q = critic.q;
  out.v = (out.q.array() * best_response_probs.array()).rowwise().sum();
  return out;
}

VectorTdRegressor::VectorTdRegressor(int state_dim, int output_dim, Rng& rng, double smoothing)
    : net_({state_dim, 64, 64, output_dim}, rng), target_(net_, smoothing) {}

void VectorTdRegressor::train_step(const Eigen::MatrixXd& states,
                                   const Eigen::MatrixXd& vector_rewards,
                                   const Eigen::MatrixXd& next_states, double gamma,
                                   double learning_rate) {
  if (!vector_rewards.allFinite()) {
    throw NumericError("vector_td_regressor: non-finite vector reward");
  }
  td_update(net_, target_.shadow, states, vector_rewards, next_states, gamma, learning_rate);
  target_.update(net_);
}

}  // namespace bchg
