#pragma once

#include <Eigen/Core>

#include "bchg/policies.hpp"
#include "bchg/tabular_cmdp.hpp"
#include "bchg/tabular_mg.hpp"

namespace bchg {

enum class RewardSelector { kLeader, kFollower };

struct PolicyValues {
  Eigen::VectorXd v;  // (s)
  Eigen::MatrixXd q;  // (s, b)
};

struct MgPolicyValues {
  Eigen::MatrixXd v;  // (s, a)
  Eigen::VectorXd q;  // flat over (s, a, b)
};

// Solves the Bellman expectation equation exactly: a direct linear solve for
// small tables, iterative sweeps to a 1e-12 residual otherwise.
PolicyValues exact_policy_evaluation(const TabularCmdp& model, const TabularPolicy& follower,
                                     RewardSelector selector, double gamma);

MgPolicyValues exact_policy_evaluation(const TabularMarkovGame& game,
                                       const TabularPolicy& leader,
                                       const ConditionedTabularPolicy& follower,
                                       RewardSelector selector, double gamma);

struct VisitationDistribution {
  Eigen::VectorXd weights;
  double gamma = 0.0;
};

// Unconditional discounted state visitation d(s) = (1-gamma) sum_t gamma^t
// rho_t(s) including the t=0 term; sums to 1 and satisfies
//   (1-gamma) E_tau[sum_t gamma^t h(s_t,b_t)] = E_{d,policy}[h].
VisitationDistribution discounted_visitation(const TabularCmdp& model,
                                             const TabularPolicy& follower, double gamma);

VisitationDistribution discounted_visitation(const TabularMarkovGame& game,
                                             const TabularPolicy& leader,
                                             const ConditionedTabularPolicy& follower,
                                             double gamma);

// Conditional variant over t >= 1 given the initial pair (s0, b0), renormalized
// to sum to 1.
VisitationDistribution discounted_visitation_from(const TabularCmdp& model,
                                                  const TabularPolicy& follower, double gamma,
                                                  int s0, int b0);

}  // namespace bchg
