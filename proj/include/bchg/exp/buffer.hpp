#pragma once

#include <vector>

#include "bchg/trajectory.hpp"

namespace bchg {

// FIFO trajectory store with a step-count capacity. On-policy runs size the
// capacity to one fresh batch, so pushing a batch evicts everything sampled
// under the previous leader parameters.
struct TrajectoryBuffer {
  std::vector<DiscreteTrajectory> trajs;
  long capacity_steps = 0;  // 0: unbounded
  long steps = 0;

  void push(DiscreteTrajectory traj) {
    steps += traj.horizon();
    trajs.push_back(std::move(traj));
    while (capacity_steps > 0 && steps > capacity_steps && trajs.size() > 1) {
      steps -= trajs.front().horizon();
      trajs.erase(trajs.begin());
    }
  }
};

}  // namespace bchg
