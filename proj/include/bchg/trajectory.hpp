#pragma once

#include <Eigen/Core>
#include <vector>

#include "bchg/policies.hpp"
#include "bchg/rng.hpp"
#include "bchg/tabular_cmdp.hpp"
#include "bchg/tabular_mg.hpp"

namespace bchg {

struct DiscreteStep {
  int state = 0;
  int leader_action = -1;  // -1 outside Markov games
  int follower_action = 0;
  double reward_leader = 0.0;
  double reward_follower = 0.0;
  int next_state = 0;
};

struct DiscreteTrajectory {
  std::vector<DiscreteStep> steps;

  int horizon() const { return static_cast<int>(steps.size()); }
  // Successive states must chain; throws ConfigurationError otherwise.
  void validate_chain() const;
};

struct ContinuousStep {
  Eigen::VectorXd state;
  Eigen::VectorXd leader_action;  // empty outside Markov games
  Eigen::VectorXd follower_action;
  double reward_leader = 0.0;
  double reward_follower = 0.0;
  Eigen::VectorXd next_state;
};

struct ContinuousTrajectory {
  std::vector<ContinuousStep> steps;
  int horizon() const { return static_cast<int>(steps.size()); }
};

// Fixed-horizon rollout. forced_initial_state >= 0 overrides rho0 (used by the
// uniform-start oracle rollouts).
DiscreteTrajectory sample_trajectory(const TabularCmdp& model, const TabularPolicy& follower,
                                     int horizon, Rng& rng, int forced_initial_state = -1);

DiscreteTrajectory sample_trajectory(const TabularMarkovGame& game, const TabularPolicy& leader,
                                     const ConditionedTabularPolicy& follower, int horizon,
                                     Rng& rng, int forced_initial_state = -1);

}  // namespace bchg
