#include "bchg/trajectory.hpp"

#include "bchg/errors.hpp"

namespace bchg {

void DiscreteTrajectory::validate_chain() const {
  for (size_t t = 0; t + 1 < steps.size(); ++t) {
    if (steps[t].next_state != steps[t + 1].state) {
      throw ConfigurationError("DiscreteTrajectory: states do not chain");
    }
  }
}

DiscreteTrajectory sample_trajectory(const TabularCmdp& model, const TabularPolicy& follower,
                                     int horizon, Rng& rng, int forced_initial_state) {
  if (horizon < 1) throw ConfigurationError("sample_trajectory: horizon must be >= 1");
  if (follower.n_states() != model.n_states || follower.n_actions() != model.n_actions) {
    throw ConfigurationError("sample_trajectory: policy/model dimension mismatch");
  }
  DiscreteTrajectory traj;
  traj.steps.reserve(horizon);
  int s = forced_initial_state >= 0 ? forced_initial_state : rng.categorical(model.initial);
  for (int t = 0; t < horizon; ++t) {
    DiscreteStep step;
    step.state = s;
    step.follower_action = follower.sample(s, rng);
    step.reward_leader = model.reward_leader(s, step.follower_action);
    step.reward_follower = model.reward_follower(s, step.follower_action);
    step.next_state =
        rng.categorical(model.transition[step.follower_action].row(s).transpose());
    traj.steps.push_back(step);
    s = step.next_state;
  }
  return traj;
}

DiscreteTrajectory sample_trajectory(const TabularMarkovGame& game, const TabularPolicy& leader,
                                     const ConditionedTabularPolicy& follower, int horizon,
                                     Rng& rng, int forced_initial_state) {
  if (horizon < 1) throw ConfigurationError("sample_trajectory: horizon must be >= 1");
  if (leader.n_states() != game.n_states || leader.n_actions() != game.n_leader_actions ||
      follower.n_states != game.n_states ||
      follower.n_leader_actions != game.n_leader_actions ||
      follower.probs.cols() != game.n_follower_actions) {
    throw ConfigurationError("sample_trajectory: policy/game dimension mismatch");
  }
  DiscreteTrajectory traj;
  traj.steps.reserve(horizon);
  int s = forced_initial_state >= 0 ? forced_initial_state : rng.categorical(game.initial);
  for (int t = 0; t < horizon; ++t) {
    DiscreteStep step;
    step.state = s;
    step.leader_action = leader.sample(s, rng);
    step.follower_action = follower.sample(s, step.leader_action, rng);
    const int idx = game.idx(s, step.leader_action, step.follower_action);
    step.reward_leader = game.reward_leader[idx];
    step.reward_follower = game.reward_follower[idx];
    step.next_state = rng.categorical(game.transition[idx]);
    traj.steps.push_back(step);
    s = step.next_state;
  }
  return traj;
}

}  // namespace bchg
