#pragma once

#include <Eigen/Core>
#include <vector>

namespace bchg {

// Tabular 2-player Markov game. Tables are flat over (s, a, b) via idx().
struct TabularMarkovGame {
  int n_states = 0;
  int n_leader_actions = 0;
  int n_follower_actions = 0;

  Eigen::VectorXd initial;                  // rho0
  std::vector<Eigen::VectorXd> transition;  // [idx(s,a,b)] -> distribution over s'
  Eigen::VectorXd reward_leader;            // [idx(s,a,b)]
  Eigen::VectorXd reward_follower;          // [idx(s,a,b)]
  double gamma_follower = 0.99;
  double gamma_leader = 0.99;

  int idx(int s, int a, int b) const {
    return (s * n_leader_actions + a) * n_follower_actions + b;
  }
  int sbar(int s, int a) const { return s * n_leader_actions + a; }
  int n_sab() const { return n_states * n_leader_actions * n_follower_actions; }

  void validate() const;
};

}  // namespace bchg
