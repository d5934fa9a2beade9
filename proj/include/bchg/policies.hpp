#pragma once

#include <Eigen/Core>

#include "bchg/rng.hpp"

namespace bchg {

// Stochastic follower (or leader) policy over a finite action set.
struct TabularPolicy {
  Eigen::MatrixXd probs;  // (state, action), rows sum to 1

  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_actions() const { return static_cast<int>(probs.cols()); }
  int sample(int s, Rng& rng) const { return rng.categorical(probs.row(s).transpose()); }
  void validate() const;
};

// Follower policy conditioned on the observed leader action: g(b | s, a).
struct ConditionedTabularPolicy {
  int n_states = 0;
  int n_leader_actions = 0;
  Eigen::MatrixXd probs;  // row s * n_leader_actions + a, column b

  double prob(int s, int a, int b) const { return probs(s * n_leader_actions + a, b); }
  Eigen::VectorXd row(int s, int a) const {
    return probs.row(s * n_leader_actions + a).transpose();
  }
  int sample(int s, int a, Rng& rng) const {
    return rng.categorical(probs.row(s * n_leader_actions + a).transpose());
  }
  void validate() const;
};

// Leader policy with per-state softmax logits; the score is taken with respect
// to the flattened logits, so dim() == n_states * n_actions.
struct SoftmaxTabularLeader {
  Eigen::MatrixXd logits;  // (state, leader action)

  int n_states() const { return static_cast<int>(logits.rows()); }
  int n_actions() const { return static_cast<int>(logits.cols()); }
  int dim() const { return static_cast<int>(logits.size()); }

  TabularPolicy policy() const;
  // grad over flattened logits (state-major) of log f(a | s)
  Eigen::VectorXd score(int s, int a) const;
};

// action ~ Normal(gain * state, cov_factor * cov_factor^T)
struct GaussianLinearPolicy {
  Eigen::MatrixXd gain;        // (action dim, state dim)
  Eigen::MatrixXd cov_factor;  // U, (action dim, action dim)

  Eigen::VectorXd mean(const Eigen::VectorXd& s) const { return gain * s; }
  Eigen::VectorXd sample(const Eigen::VectorXd& s, Rng& rng) const;
  // grad of log density w.r.t. the flattened gain (row-major): (UU^T)^-1 (a - Ks) s^T
  Eigen::VectorXd score_gain(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
};

// Entropy-regularized LQR best response: mean -k_state s - k_cond w with fixed
// covariance. k_cond multiplies the observed disturbance (or leader action) and
// may be empty for the unobservable case.
struct LqrFollowerPolicy {
  Eigen::MatrixXd k_state;
  Eigen::MatrixXd k_cond;  // 0x0 when nothing is observed beyond the state
  Eigen::MatrixXd cov;     // (beta / 2) S^-1
  Eigen::MatrixXd cov_chol;

  Eigen::VectorXd mean(const Eigen::VectorXd& s) const { return -k_state * s; }
  Eigen::VectorXd mean(const Eigen::VectorXd& s, const Eigen::VectorXd& w) const {
    return -k_state * s - k_cond * w;
  }
  Eigen::VectorXd sample(const Eigen::VectorXd& s, Rng& rng) const;
  Eigen::VectorXd sample(const Eigen::VectorXd& s, const Eigen::VectorXd& w, Rng& rng) const;
};

}  // namespace bchg
