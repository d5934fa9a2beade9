#include "bchg/envs/bilevel_lqr.hpp"

#include <cmath>

namespace bchg {

BilevelLqrEnv bilevel_lqr_build() {
  BilevelLqrEnv env;
  env.a.resize(2, 2);
  env.a << 0.0, 1.0, 0.0, 0.0;
  env.b.resize(2, 1);
  env.b << 0.0, 0.1;
  env.c.resize(2, 1);
  env.c << 0.1, 0.0;
  env.q_bar = Eigen::MatrixXd::Identity(2, 2);
  env.r_bar = Eigen::MatrixXd::Identity(1, 1);
  env.initial_state = Eigen::Vector2d(1.0, 0.0);
  env.target_state = Eigen::Vector2d(-0.8, 0.0);
  Eigen::MatrixXd sigma_root(2, 2);
  sigma_root << 5.0, 0.0, 0.0, 100.0;
  env.reward_weight = sigma_root * sigma_root;
  env.leader_noise = 1e-3 * Eigen::MatrixXd::Identity(1, 1);
  return env;
}

double BilevelLqrEnv::reward_leader(const Eigen::VectorXd& s) const {
  const Eigen::VectorXd diff = s - target_state;
  return std::exp(-0.5 * diff.dot(reward_weight * diff));
}

double BilevelLqrEnv::reward_follower(const Eigen::VectorXd& s,
                                      const Eigen::VectorXd& b_action) const {
  return -(s.dot(q_bar * s) + b_action.dot(r_bar * b_action));
}

GaussianLinearPolicy BilevelLqrEnv::leader_policy(const Eigen::MatrixXd& k_theta) const {
  GaussianLinearPolicy f;
  f.gain = k_theta;
  f.cov_factor = leader_noise;
  return f;
}

LqrSolution BilevelLqrEnv::best_response(const Eigen::MatrixXd& k_theta,
                                         int max_riccati_iters) const {
  RiccatiOptions options;
  options.max_iters = max_riccati_iters;
  options.tol = 1e-12;
  return mg_lqr_best_response(a, b, c, q_bar, r_bar, k_theta, gamma_follower, beta_entropy,
                              leader_noise, options);
}

double BilevelLqrEnv::follower_value(const LqrSolution& sol, const Eigen::MatrixXd& k_theta,
                                     const Eigen::VectorXd& s,
                                     const Eigen::VectorXd& a_action) const {
  // disturbance seen by the follower: C (a - K_theta s)
  const Eigen::VectorXd w = c * (a_action - k_theta * s);
  return -sol.value_cost(s, w);
}

}  // namespace bchg
