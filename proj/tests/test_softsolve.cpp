#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bchg/envs/toy_mg.hpp"
#include "bchg/errors.hpp"
#include "bchg/rng.hpp"
#include "bchg/softsolve.hpp"
#include "bchg/tabular_cmdp.hpp"

using namespace bchg;

namespace {

TabularCmdp two_arm_single_state(double r0, double r1, double gamma) {
  TabularCmdp m;
  m.n_states = 1;
  m.n_actions = 2;
  m.theta = Eigen::VectorXd::Zero(1);
  m.transition = {Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1)};
  m.initial = Eigen::VectorXd::Ones(1);
  m.reward_follower.resize(1, 2);
  m.reward_follower << r0, r1;
  m.reward_leader = Eigen::MatrixXd::Zero(1, 2);
  m.gamma_follower = gamma;
  m.gamma_leader = gamma;
  return m;
}

}  // namespace

TEST_CASE("soft values: single-state closed form V = 2 ln 2") {
  const TabularCmdp m = two_arm_single_state(0.0, 0.0, 0.5);
  const SoftValues values = soft_value_iteration(m, 1.0, 1e-12);
  CHECK(values.v[0] == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));
  CHECK(values.residual <= 1e-12);
}

TEST_CASE("soft values: myopic entropy bonus V = r + beta log |B|") {
  TabularCmdp m = two_arm_single_state(0.4, 0.4, 0.0);
  const double beta = 0.3;
  const SoftValues values = soft_value_iteration(m, beta, 1e-12);
  CHECK(values.v[0] == doctest::Approx(0.4 + beta * std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("soft values agree with a brute-force sweep oracle") {
  RandomCmdpOptions opt;
  opt.n_states = 3;
  opt.n_actions = 3;
  const auto family = random_cmdp_family(opt, 31);
  const TabularCmdp m = family.build(Eigen::VectorXd::Constant(opt.dim, 0.2));
  const double beta = 0.2;
  const SoftValues values = soft_value_iteration(m, beta, 1e-12);

  // independent long fixed-point oracle
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3, 3);
  for (int sweep = 0; sweep < 100000; ++sweep) {
    Eigen::VectorXd v(3);
    for (int s = 0; s < 3; ++s) {
      const double mx = q.row(s).maxCoeff();
      double acc = 0.0;
      for (int b = 0; b < 3; ++b) acc += std::exp((q(s, b) - mx) / beta);
      v[s] = mx + beta * std::log(acc);
    }
    for (int s = 0; s < 3; ++s) {
      for (int b = 0; b < 3; ++b) {
        q(s, b) = m.reward_follower(s, b) + m.gamma_follower * m.transition[b].row(s).dot(v);
      }
    }
  }
  CHECK((values.q - q).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("soft values: one extra sweep moves nothing beyond tol") {
  RandomCmdpOptions opt;
  const auto family = random_cmdp_family(opt, 77);
  const TabularCmdp m = family.build(Eigen::VectorXd::Zero(opt.dim));
  const double beta = 0.1, tol = 1e-10;
  const SoftValues values = soft_value_iteration(m, beta, tol);
  Eigen::MatrixXd next(m.n_states, m.n_actions);
  for (int s = 0; s < m.n_states; ++s) {
    for (int b = 0; b < m.n_actions; ++b) {
      next(s, b) = m.reward_follower(s, b) + m.gamma_follower * m.transition[b].row(s).dot(values.v);
    }
  }
  CHECK((next - values.q).cwiseAbs().maxCoeff() <= tol);
}

TEST_CASE("soft values: unique fixed point from different initializations") {
  RandomCmdpOptions opt;
  opt.n_states = 4;
  const auto family = random_cmdp_family(opt, 41);
  const TabularCmdp m = family.build(Eigen::VectorXd::Zero(opt.dim));
  const double tol = 1e-11;
  const SoftValues from_zero = soft_value_iteration(m, 0.05, tol);
  Rng rng(3);
  Eigen::MatrixXd random_init(m.n_states, m.n_actions);
  for (int s = 0; s < m.n_states; ++s)
    for (int b = 0; b < m.n_actions; ++b) random_init(s, b) = rng.uniform(-1.0, 1.0);
  const SoftValues from_random = soft_value_iteration(m, 0.05, tol, 1000000, random_init);
  CHECK((from_zero.q - from_random.q).cwiseAbs().maxCoeff() < 10 * tol);
}

TEST_CASE("soft values: errors for bad beta and iteration limits") {
  const TabularCmdp m = two_arm_single_state(0.0, 1.0, 0.9);
  CHECK_THROWS_AS(soft_value_iteration(m, 0.0), DomainError);
  try {
    soft_value_iteration(m, 1.0, 1e-12, 3);
    FAIL("expected IterationLimitError");
  } catch (const IterationLimitError& e) {
    CHECK(e.residual > 0.0);
  }
}

TEST_CASE("boltzmann extraction matches scalar softmax") {
  const TabularCmdp m = two_arm_single_state(0.0, 0.0, 0.5);
  SoftValues values = soft_value_iteration(m, 1.0, 1e-12);
  values.q(0, 0) = 1.0;
  values.q(0, 1) = 0.0;
  const TabularPolicy pi = boltzmann_policy(values);
  const double e = std::exp(1.0);
  CHECK(pi.probs(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
  CHECK(pi.probs(0, 1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
  CHECK(pi.probs.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));

  // equal Q rows give the uniform policy
  values.q.setConstant(2.5);
  const TabularPolicy uniform = boltzmann_policy(values);
  CHECK(uniform.probs(0, 0) == doctest::Approx(0.5));

  // small beta with a 0.1 gap concentrates on the argmax
  values.q(0, 0) = 0.1;
  values.q(0, 1) = 0.0;
  values.beta = 1e-3;
  const TabularPolicy hard = boltzmann_policy(values);
  CHECK(hard.probs(0, 0) >= 1.0 - 1e-6);
}

TEST_CASE("soft Q-iteration reduces to soft value iteration when the leader is inert") {
  // Markov game whose transition and rewards ignore the leader action
  RandomCmdpOptions opt;
  opt.n_states = 3;
  opt.n_actions = 2;
  const auto family = random_cmdp_family(opt, 53);
  const TabularCmdp base = family.build(Eigen::VectorXd::Zero(opt.dim));

  TabularMarkovGame game;
  game.n_states = 3;
  game.n_leader_actions = 2;
  game.n_follower_actions = 2;
  game.gamma_follower = base.gamma_follower;
  game.gamma_leader = base.gamma_leader;
  game.initial = base.initial;
  game.transition.assign(game.n_sab(), Eigen::VectorXd::Zero(3));
  game.reward_leader = Eigen::VectorXd::Zero(game.n_sab());
  game.reward_follower = Eigen::VectorXd::Zero(game.n_sab());
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        game.transition[game.idx(s, a, b)] = base.transition[b].row(s).transpose();
        game.reward_follower[game.idx(s, a, b)] = base.reward_follower(s, b);
      }
    }
  }
  TabularPolicy leader;
  leader.probs.resize(3, 2);
  leader.probs << 1, 0, 1, 0, 1, 0;  // deterministic

  const double beta = 0.1;
  const MgSoftValues mg = soft_q_iteration(game, leader, beta, 1e-12);
  const SoftValues flat = soft_value_iteration(base, beta, 1e-12);
  for (int s = 0; s < 3; ++s) {
    for (int b = 0; b < 2; ++b) {
      CHECK(mg.q[mg.idx(s, 0, b)] == doctest::Approx(flat.q(s, b)).epsilon(1e-8));
    }
  }
}

TEST_CASE("soft Q-iteration zero rewards give the entropy-only value") {
  TabularMarkovGame game = toy_mg_build();
  game.reward_follower.setZero();
  TabularPolicy leader;
  leader.probs = Eigen::MatrixXd::Constant(3, 2, 0.5);
  const double beta = 0.3;
  const MgSoftValues values = soft_q_iteration(game, leader, beta, 1e-12);
  const double expected = beta * std::log(3.0) / (1.0 - game.gamma_follower);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < 2; ++a) CHECK(values.v(s, a) == doctest::Approx(expected).epsilon(1e-7));
}

TEST_CASE("toy game: follower prefers the exit action at A under leader 0") {
  const TabularMarkovGame game = toy_mg_build();
  TabularPolicy leader;
  leader.probs.resize(3, 2);
  leader.probs << 0.5, 0.5, 1.0, 0.0, 0.5, 0.5;  // f(0|A) = 1
  const MgSoftValues values = soft_q_iteration(game, leader, toy_mg::kBeta, 1e-12);
  const int a_state = toy_mg::kStateA;
  const double q_b = values.q[values.idx(a_state, 0, toy_mg::kActB)];
  CHECK(q_b > values.q[values.idx(a_state, 0, toy_mg::kActS)]);
  CHECK(q_b > values.q[values.idx(a_state, 0, toy_mg::kActA)]);
}

TEST_CASE("gradient identity: grad V equals the best-response average of grad Q") {
  RandomCmdpOptions opt;
  opt.n_states = 3;
  opt.n_actions = 2;
  opt.dim = 2;
  const auto family = random_cmdp_family(opt, 61);
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(2, 0.15);
  const double beta = 0.1, step = 1e-5;
  const SoftValues at = soft_value_iteration(family.build(theta), beta, 1e-13);
  const TabularPolicy g = boltzmann_policy(at);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd up = theta, dn = theta;
    up[k] += step;
    dn[k] -= step;
    const SoftValues vu = soft_value_iteration(family.build(up), beta, 1e-13);
    const SoftValues vd = soft_value_iteration(family.build(dn), beta, 1e-13);
    for (int s = 0; s < 3; ++s) {
      const double dv = (vu.v[s] - vd.v[s]) / (2 * step);
      double expected = 0.0;
      for (int b = 0; b < 2; ++b) {
        expected += g.probs(s, b) * (vu.q(s, b) - vd.q(s, b)) / (2 * step);
      }
      const double scale = std::max(1.0, std::abs(dv));
      CHECK(std::abs(dv - expected) / scale < 1e-3);
    }
  }
}

TEST_CASE("zero-mean score of the best response (finite differences)") {
  const TabularMarkovGame game = toy_mg_build();
  SoftmaxTabularLeader leader;
  leader.logits.resize(3, 2);
  leader.logits << 0.3, -0.2, 0.1, 0.4, -0.5, 0.2;
  const double beta = toy_mg::kBeta, step = 1e-5;

  auto response = [&](const Eigen::MatrixXd& logits) {
    SoftmaxTabularLeader l;
    l.logits = logits;
    return boltzmann_policy(soft_q_iteration(game, l.policy(), beta, 1e-13));
  };
  const ConditionedTabularPolicy g = response(leader.logits);
  for (int k = 0; k < 6; ++k) {
    Eigen::MatrixXd up = leader.logits, dn = leader.logits;
    up(k / 2, k % 2) += step;
    dn(k / 2, k % 2) -= step;
    const ConditionedTabularPolicy gu = response(up);
    const ConditionedTabularPolicy gd = response(dn);
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) {
        double mean_score = 0.0;
        for (int b = 0; b < 3; ++b) {
          const double d_log =
              (std::log(gu.prob(s, a, b)) - std::log(gd.prob(s, a, b))) / (2 * step);
          mean_score += g.prob(s, a, b) * d_log;
        }
        CHECK(std::abs(mean_score) < 1e-6);
      }
    }
  }
}
