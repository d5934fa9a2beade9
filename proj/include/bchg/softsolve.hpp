#pragma once

#include <Eigen/Core>

#include "bchg/policies.hpp"
#include "bchg/tabular_cmdp.hpp"
#include "bchg/tabular_mg.hpp"

namespace bchg {

// Entropy-regularized optimal values for a configurable MDP.
struct SoftValues {
  Eigen::MatrixXd q;  // (s, b)
  Eigen::VectorXd v;  // (s); v = beta * logsumexp(q / beta)
  double beta = 0.0;
  double residual = 0.0;
  int sweeps = 0;
};

// Entropy-regularized optimal values for a Markov game under a fixed leader.
struct MgSoftValues {
  int n_states = 0;
  int n_leader_actions = 0;
  int n_follower_actions = 0;
  Eigen::VectorXd q;  // flat over (s, a, b)
  Eigen::MatrixXd v;  // (s, a)
  double beta = 0.0;
  double residual = 0.0;
  int sweeps = 0;

  int idx(int s, int a, int b) const {
    return (s * n_leader_actions + a) * n_follower_actions + b;
  }
};

// Soft Bellman optimality sweeps
//   Q(s,b) <- r_F(s,b) + gamma_F sum_s' p(s'|s,b) beta log sum_b' exp(Q(s',b')/beta)
// run until the sup-norm change drops below tol. Throws IterationLimitError
// carrying the last residual when max_sweeps is exhausted.
SoftValues soft_value_iteration(const TabularCmdp& model, double beta, double tol = 1e-10,
                                int max_sweeps = 1000000,
                                const Eigen::MatrixXd* warm_start = nullptr);

SoftValues soft_value_iteration(const TabularCmdp& model, double beta, double tol,
                                int max_sweeps, const Eigen::MatrixXd& warm_start);

MgSoftValues soft_q_iteration(const TabularMarkovGame& game, const TabularPolicy& leader,
                              double beta, double tol = 1e-10, int max_sweeps = 1000000,
                              const Eigen::VectorXd* warm_start = nullptr);

// Boltzmann extraction: rows softmax(Q / beta), computed with max subtraction.
TabularPolicy boltzmann_policy(const SoftValues& values);
ConditionedTabularPolicy boltzmann_policy(const MgSoftValues& values);

}  // namespace bchg
