#pragma once

#include <Eigen/Core>

#include "bchg/lqr.hpp"
#include "bchg/policies.hpp"

namespace bchg {

// Two-state double-integrator game: s' = A s + B b + C a. The leader's
// Gaussian linear policy steers the follower's LQR best response toward the
// target state s* through the reward exp(-0.5 (s - s*)' Sigma (s - s*)).
struct BilevelLqrEnv {
  Eigen::MatrixXd a;  // [[0,1],[0,0]]
  Eigen::MatrixXd b;  // [0, 0.1]'
  Eigen::MatrixXd c;  // [0.1, 0]'
  Eigen::MatrixXd q_bar;
  Eigen::MatrixXd r_bar;
  Eigen::VectorXd initial_state;       // (1, 0)
  Eigen::VectorXd target_state;        // (-0.8, 0)
  Eigen::MatrixXd reward_weight;       // Sigma = diag(5,100)^2
  Eigen::MatrixXd leader_noise;        // U = [1e-3]
  double gamma_leader = 0.99;
  double gamma_follower = 0.95;
  double beta_entropy = 0.1;

  double reward_leader(const Eigen::VectorXd& s) const;
  double reward_follower(const Eigen::VectorXd& s, const Eigen::VectorXd& b_action) const;

  GaussianLinearPolicy leader_policy(const Eigen::MatrixXd& k_theta) const;
  LqrSolution best_response(const Eigen::MatrixXd& k_theta, int max_riccati_iters = 1000) const;

  // Follower soft value (reward form) at (s, a) given the solved best response.
  double follower_value(const LqrSolution& sol, const Eigen::MatrixXd& k_theta,
                        const Eigen::VectorXd& s, const Eigen::VectorXd& a_action) const;
};

BilevelLqrEnv bilevel_lqr_build();

}  // namespace bchg
