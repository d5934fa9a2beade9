#include "bchg/envs/toy_mg.hpp"

namespace bchg {

TabularMarkovGame toy_mg_build() {
  using namespace toy_mg;
  TabularMarkovGame g;
  g.n_states = 3;
  g.n_leader_actions = 2;
  g.n_follower_actions = 3;
  g.gamma_follower = 0.99;
  g.gamma_leader = 0.99;
  g.initial = Eigen::VectorXd::Zero(3);
  g.initial[kStateS] = 1.0;
  g.transition.assign(g.n_sab(), Eigen::VectorXd::Zero(3));
  g.reward_leader = Eigen::VectorXd::Zero(g.n_sab());
  g.reward_follower = Eigen::VectorXd::Zero(g.n_sab());

  auto set = [&](int s, int a, int b, int s_next, double r_f, double r_l) {
    const int i = g.idx(s, a, b);
    g.transition[i][s_next] = 1.0;
    g.reward_follower[i] = r_f;
    g.reward_leader[i] = r_l;
  };

  for (int a = 0; a < 2; ++a) {
    // At S the leader action is irrelevant.
    set(kStateS, a, kActS, kStateS, 0.0, 0.0);
    set(kStateS, a, kActA, kStateA, 1.0, 1.0);
    set(kStateS, a, kActB, kStateB, 1.0, 0.0);
    // At B only action s leaves, with no reward.
    set(kStateB, a, kActS, kStateS, 0.0, 0.0);
    set(kStateB, a, kActA, kStateB, 0.0, 0.0);
    set(kStateB, a, kActB, kStateB, 0.0, 0.0);
    // At A staying is a costly trap, so the follower exits immediately via b
    // and the leader's routing acts as a lottery.
    set(kStateA, a, kActS, kStateA, -1.0, 0.0);
    set(kStateA, a, kActA, kStateA, -1.0, 0.0);
  }
  set(kStateA, 0, kActB, kStateB, 2.0, 0.0);
  set(kStateA, 1, kActB, kStateS, -1.0, 0.0);

  g.validate();
  return g;
}

}  // namespace bchg
