#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bchg/envs/toy_mg.hpp"
#include "bchg/errors.hpp"
#include "bchg/hypergrad.hpp"
#include "bchg/rng.hpp"

using namespace bchg;

namespace {

Eigen::VectorXd fd_objective_cmdp(const TabularCmdpFamily& family, const Eigen::VectorXd& theta,
                                  double beta) {
  const double step = 1e-5;
  Eigen::VectorXd fd(family.dim);
  for (int k = 0; k < family.dim; ++k) {
    Eigen::VectorXd up = theta, dn = theta;
    up[k] += step;
    dn[k] -= step;
    fd[k] = (exact_leader_objective(family.build(up), beta, 1e-12) -
             exact_leader_objective(family.build(dn), beta, 1e-12)) /
            (2 * step);
  }
  return fd;
}

}  // namespace

TEST_CASE("benefit table and its zero-mean invariant") {
  Eigen::MatrixXd q(2, 2);
  q << 1.0, 0.0, 0.4, 0.4;
  Eigen::VectorXd v(2);
  v << 0.5, 0.4;
  const Eigen::MatrixXd b = benefit(q, v);
  CHECK(b(0, 0) == doctest::Approx(0.5));
  CHECK(b(0, 1) == doctest::Approx(-0.5));
  CHECK(b(1, 0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(benefit(q, Eigen::VectorXd::Zero(3)), ConfigurationError);

  // exact best-response benefit is zero-mean per state
  RandomCmdpOptions opt;
  opt.n_states = 5;
  opt.n_actions = 3;
  const auto family = random_cmdp_family(opt, 3);
  const auto sol = exact_cmdp_solution(family.build(Eigen::VectorXd::Zero(opt.dim)), 0.1);
  const Eigen::VectorXd mean =
      (sol.benefit_table.array() * sol.best_response.probs.array()).rowwise().sum();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("clip_gradient rescales all components together") {
  HypergradientEstimate e = HypergradientEstimate::zero(2);
  e.partial_term << 1.2, 0.0;
  e.guiding_term << 0.0, 1.6;
  e.assemble();
  const HypergradientEstimate clipped = clip_gradient(e, 1.0);
  CHECK(clipped.total.norm() == doctest::Approx(1.0));
  CHECK(clipped.clipped);
  CHECK(clipped.partial_term[0] == doctest::Approx(1.2 / 2.0));
  CHECK((clipped.partial_term + clipped.guiding_term - clipped.total).norm() < 1e-15);

  HypergradientEstimate small = HypergradientEstimate::zero(2);
  small.partial_term << 0.3, 0.4;
  small.assemble();
  const HypergradientEstimate untouched = clip_gradient(small, 1.0);
  CHECK(untouched.total.norm() == doctest::Approx(0.5));
  CHECK_FALSE(untouched.clipped);

  HypergradientEstimate zero = HypergradientEstimate::zero(2);
  zero.assemble();
  CHECK(clip_gradient(zero, 1.0).total.norm() == 0.0);
  CHECK_THROWS_AS(clip_gradient(zero, 0.0), DomainError);
}

TEST_CASE("partial derivative: theta-free models yield the zero vector") {
  RandomCmdpOptions opt;
  opt.theta_rewards = false;
  opt.theta_transitions = false;
  opt.theta_initial = false;
  opt.theta_leader_reward = false;
  const auto family = random_cmdp_family(opt, 7);
  const TabularCmdp m = family.build(Eigen::VectorXd::Zero(opt.dim));
  Rng rng(1);
  const TabularPolicy pi{Eigen::MatrixXd::Constant(opt.n_states, opt.n_actions,
                                                   1.0 / opt.n_actions)};
  std::vector<DiscreteTrajectory> batch = {sample_trajectory(m, pi, 20, rng)};
  const Eigen::VectorXd g =
      partial_derivative_cmdp(batch, m, Eigen::VectorXd::Zero(opt.n_states));
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("partial derivative: single-step arithmetic v + 2u") {
  // one-step trajectory with grad r_L = v, grad log rho0 = u, V_L(s0) = 2
  TabularCmdp m;
  m.n_states = 1;
  m.n_actions = 1;
  m.theta = Eigen::VectorXd::Zero(2);
  m.transition = {Eigen::MatrixXd::Ones(1, 1)};
  m.initial = Eigen::VectorXd::Ones(1);
  m.reward_follower = Eigen::MatrixXd::Zero(1, 1);
  m.reward_leader = Eigen::MatrixXd::Zero(1, 1);
  const Eigen::VectorXd v = (Eigen::VectorXd(2) << 0.3, -0.7).finished();
  const Eigen::VectorXd u = (Eigen::VectorXd(2) << 1.1, 0.2).finished();
  m.grad_reward_leader = [v](int, int) { return v; };
  m.grad_log_initial = [u](int) { return u; };

  DiscreteTrajectory traj;
  traj.steps.push_back({0, -1, 0, 0.0, 0.0, 0});
  const Eigen::VectorXd v_l = Eigen::VectorXd::Constant(1, 2.0);
  const Eigen::VectorXd g = partial_derivative_cmdp({traj}, m, v_l);
  CHECK((g - (v + 2.0 * u)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("follower Q gradient: geometric series on a one-state chain") {
  TabularCmdp m;
  m.n_states = 1;
  m.n_actions = 1;
  m.theta = Eigen::VectorXd::Zero(2);
  m.transition = {Eigen::MatrixXd::Ones(1, 1)};
  m.initial = Eigen::VectorXd::Ones(1);
  m.reward_follower = Eigen::MatrixXd::Zero(1, 1);
  m.reward_leader = Eigen::MatrixXd::Zero(1, 1);
  m.gamma_follower = 0.9;
  const Eigen::VectorXd v = (Eigen::VectorXd(2) << 0.5, -0.25).finished();
  m.grad_reward_follower = [v](int, int) { return v; };

  const int horizon = 40;
  DiscreteTrajectory traj;
  for (int t = 0; t < horizon; ++t) traj.steps.push_back({0, -1, 0, 0.0, 0.0, 0});
  std::vector<Segment> segments = {{&traj, 0}};
  const Eigen::VectorXd g = follower_q_grad_cmdp(segments, m, Eigen::VectorXd::Zero(1));
  const double mass = (1.0 - std::pow(0.9, horizon)) / 0.1;
  CHECK((g - mass * v).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(follower_q_grad_cmdp({}, m, Eigen::VectorXd::Zero(1)), MissingDataError);
}

TEST_CASE("follower Q gradient: exact recursion matches finite differences") {
  RandomCmdpOptions opt;
  opt.n_states = 3;
  opt.n_actions = 2;
  opt.dim = 2;
  const auto family = random_cmdp_family(opt, 17);
  const Eigen::VectorXd theta = (Eigen::VectorXd(2) << 0.1, -0.3).finished();
  const double beta = 0.1, step = 1e-5;
  const TabularCmdp m = family.build(theta);
  const auto sol = exact_cmdp_solution(m, beta, 1e-13);

  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd up = theta, dn = theta;
    up[k] += step;
    dn[k] -= step;
    const SoftValues vu = soft_value_iteration(family.build(up), beta, 1e-13);
    const SoftValues vd = soft_value_iteration(family.build(dn), beta, 1e-13);
    for (int s = 0; s < 3; ++s) {
      for (int b = 0; b < 2; ++b) {
        const double fd = (vu.q(s, b) - vd.q(s, b)) / (2 * step);
        const double exact = sol.q_f_grad[s * 2 + b][k];
        const double scale = std::max(1.0, std::abs(fd));
        CHECK(std::abs(fd - exact) / scale < 1e-3);
      }
    }
  }
}

TEST_CASE("covariance form and difference form of the guiding term agree") {
  Rng seed_rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    RandomCmdpOptions opt;
    opt.n_states = 3 + trial % 3;
    opt.n_actions = 2 + trial % 2;
    opt.dim = 1 + trial % 3;
    const auto family = random_cmdp_family(opt, 100 + trial);
    const double beta = trial % 2 == 0 ? 0.1 : 1.0;
    const TabularCmdp m = family.build(0.3 * seed_rng.normal_vector(opt.dim));
    const auto sol = exact_cmdp_solution(m, beta, 1e-13);
    const Eigen::VectorXd cov = exact_guiding_term_cmdp(m, sol, GuidingForm::kCovariance);
    const Eigen::VectorXd diff = exact_guiding_term_cmdp(m, sol, GuidingForm::kHpgd);
    CHECK((cov - diff).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("guiding term scales exactly as 1/beta with frozen inputs") {
  RandomCmdpOptions opt;
  const auto family = random_cmdp_family(opt, 2);
  const TabularCmdp m = family.build(Eigen::VectorXd::Zero(opt.dim));
  Rng rng(9);
  const SoftValues soft = soft_value_iteration(m, 0.2, 1e-12);
  const TabularPolicy g = boltzmann_policy(soft);
  std::vector<DiscreteTrajectory> batch;
  for (int j = 0; j < 4; ++j) batch.push_back(sample_trajectory(m, g, 30, rng));
  const PolicyValues lv = exact_policy_evaluation(m, g, RewardSelector::kLeader, m.gamma_leader);
  const Eigen::MatrixXd b_table = benefit(lv.q, lv.v);

  CmdpBatchInputs in;
  in.batch = &batch;
  in.model = &m;
  in.benefit_table = &b_table;
  in.q_l = &lv.q;
  in.v_l = &lv.v;
  in.v_f = &soft.v;
  in.best_response = &g;
  in.beta = 0.2;
  const HypergradientEstimate at_beta = bchg_hypergradient_cmdp(in);
  in.beta = 0.4;
  const HypergradientEstimate at_2beta = bchg_hypergradient_cmdp(in);
  CHECK((at_beta.guiding_term - 2.0 * at_2beta.guiding_term).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((at_beta.partial_term - at_2beta.partial_term).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("hypergradient oracle: exact expectation matches finite differences") {
  Rng rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    RandomCmdpOptions opt;
    opt.n_states = 3;
    opt.n_actions = 2;
    opt.dim = 2;
    opt.with_regularizer = trial == 1;
    const auto family = random_cmdp_family(opt, 300 + trial);
    const Eigen::VectorXd theta = 0.4 * rng.normal_vector(2);
    const double beta = 0.1;
    const HypergradientEstimate est = exact_hypergradient_cmdp(family.build(theta), beta);
    const Eigen::VectorXd fd = fd_objective_cmdp(family, theta, beta);
    const double rel = (est.total - fd).norm() / std::max(1e-9, fd.norm());
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("bchg degenerate splits: constant Q and theta-free leader reward") {
  // constant leader rewards make the benefit vanish: total == partial
  RandomCmdpOptions opt;
  opt.n_states = 3;
  opt.n_actions = 2;
  const auto family = random_cmdp_family(opt, 23);
  TabularCmdp m = family.build(Eigen::VectorXd::Zero(opt.dim));
  m.reward_leader.setConstant(0.5);
  const SoftValues soft = soft_value_iteration(m, 0.1, 1e-12);
  const TabularPolicy g = boltzmann_policy(soft);
  Rng rng(3);
  std::vector<DiscreteTrajectory> batch = {sample_trajectory(m, g, 25, rng)};
  const PolicyValues lv = exact_policy_evaluation(m, g, RewardSelector::kLeader, m.gamma_leader);
  const Eigen::MatrixXd b_table = benefit(lv.q, lv.v);
  CmdpBatchInputs in;
  in.batch = &batch;
  in.model = &m;
  in.benefit_table = &b_table;
  in.q_l = &lv.q;
  in.v_l = &lv.v;
  in.v_f = &soft.v;
  in.best_response = &g;
  in.beta = 0.1;
  const HypergradientEstimate est = bchg_hypergradient_cmdp(in);
  CHECK((est.total - est.partial_term).cwiseAbs().maxCoeff() < 1e-9);

  // theta enters only the follower reward: total == guiding
  RandomCmdpOptions opt2;
  opt2.n_states = 3;
  opt2.n_actions = 2;
  opt2.theta_leader_reward = false;
  opt2.theta_transitions = false;
  opt2.theta_initial = false;
  const auto family2 = random_cmdp_family(opt2, 29);
  const TabularCmdp m2 = family2.build(Eigen::VectorXd::Zero(opt2.dim));
  const auto sol2 = exact_cmdp_solution(m2, 0.1);
  const HypergradientEstimate exact2 = exact_hypergradient_cmdp(m2, 0.1);
  CHECK(exact2.partial_term.cwiseAbs().maxCoeff() == 0.0);
  CHECK((exact2.total - exact2.guiding_term).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hpgd estimator: strictness, equivalence and Monte Carlo consistency") {
  RandomCmdpOptions opt;
  opt.n_states = 3;
  opt.n_actions = 2;
  opt.dim = 2;
  const auto family = random_cmdp_family(opt, 55);
  const TabularCmdp m = family.build(Eigen::VectorXd::Constant(2, 0.2));
  const double beta = 0.5;  // keeps the best response diffuse so revisits occur
  const auto sol = exact_cmdp_solution(m, beta, 1e-13);

  // exact identity: hpgd guiding + partial equals the covariance-form total
  const HypergradientEstimate exact = exact_hypergradient_cmdp(m, beta);
  const Eigen::VectorXd hpgd_guiding = exact_guiding_term_cmdp(m, sol, GuidingForm::kHpgd);
  CHECK((exact.partial_term + hpgd_guiding + exact.regularizer_term - exact.total)
            .cwiseAbs()
            .maxCoeff() < 1e-10);

  // large-batch sampled estimate approaches the exact hypergradient
  Rng rng(101);
  std::vector<DiscreteTrajectory> batch;
  const int n_traj = 1500, horizon = 70;
  for (int j = 0; j < n_traj; ++j) {
    batch.push_back(sample_trajectory(m, sol.best_response, horizon, rng));
  }
  CmdpBatchInputs in;
  in.batch = &batch;
  in.model = &m;
  in.benefit_table = &sol.benefit_table;  // exact benefit isolates the estimator noise
  in.q_l = &sol.leader_values.q;
  in.v_l = &sol.leader_values.v;
  in.v_f = &sol.soft.v;
  in.best_response = &sol.best_response;
  in.beta = beta;
  const HypergradientEstimate mc = hpgd_gradient_cmdp(in, /*strict_revisits=*/true);

  // crude per-coordinate spread estimate from batch halves
  std::vector<DiscreteTrajectory> first_half(batch.begin(), batch.begin() + n_traj / 2);
  std::vector<DiscreteTrajectory> second_half(batch.begin() + n_traj / 2, batch.end());
  CmdpBatchInputs in_a = in, in_b = in;
  in_a.batch = &first_half;
  in_b.batch = &second_half;
  const Eigen::VectorXd half_a = hpgd_gradient_cmdp(in_a, true).total;
  const Eigen::VectorXd half_b = hpgd_gradient_cmdp(in_b, true).total;
  for (int k = 0; k < 2; ++k) {
    const double spread = std::abs(half_a[k] - half_b[k]) + 1e-3;
    CHECK(std::abs(mc.total[k] - exact.total[k]) < 3.0 * spread);
  }

  // a single one-step trajectory cannot support the difference form
  std::vector<DiscreteTrajectory> tiny = {batch.front()};
  tiny.front().steps.resize(1);
  CmdpBatchInputs strict = in;
  strict.batch = &tiny;
  strict.segment_source = &tiny;
  CHECK_THROWS_AS(hpgd_gradient_cmdp(strict, true), MissingDataError);
  CHECK_NOTHROW(hpgd_gradient_cmdp(strict, false));
}

TEST_CASE("sobirl estimator: truncation behavior and infeasibility") {
  RandomCmdpOptions opt;
  opt.n_states = 3;
  opt.n_actions = 2;
  opt.dim = 2;
  opt.theta_transitions = false;
  opt.theta_initial = false;
  const auto family = random_cmdp_family(opt, 71);
  TabularCmdp m = family.build(Eigen::VectorXd::Zero(2));
  m.gamma_follower = 0.0;  // one-step truncation exact at horizon 1
  const double beta = 0.2;
  const SoftValues soft = soft_value_iteration(m, beta, 1e-13);
  const TabularPolicy g = boltzmann_policy(soft);
  const PolicyValues lv = exact_policy_evaluation(m, g, RewardSelector::kLeader, m.gamma_leader);
  const Eigen::MatrixXd b_table = benefit(lv.q, lv.v);

  Rng rng(11);
  std::vector<DiscreteTrajectory> batch;
  for (int j = 0; j < 4000; ++j) batch.push_back(sample_trajectory(m, g, 1, rng));

  CmdpBatchInputs in;
  in.batch = &batch;
  in.model = &m;
  in.benefit_table = &b_table;
  in.q_l = &lv.q;
  in.v_l = &lv.v;
  in.v_f = &soft.v;
  in.best_response = &g;
  in.beta = beta;
  const HypergradientEstimate sobirl = sobirl_gradient_cmdp(in);

  // at gamma_F = 0 the one-step truncation is the exact follower-Q gradient,
  // so over horizon-1 trajectories the guiding term converges to the rho0
  // expectation of Q_L (grad r_F - E_b grad r_F) / beta
  const auto sol = exact_cmdp_solution(m, beta, 1e-13);
  Eigen::VectorXd exact_h1 = Eigen::VectorXd::Zero(2);
  for (int s = 0; s < 3; ++s) {
    Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(2);
    for (int b = 0; b < 2; ++b) {
      mean_grad += sol.best_response.probs(s, b) * m.grad_reward_follower(s, b);
    }
    for (int b = 0; b < 2; ++b) {
      exact_h1 += m.initial[s] * sol.best_response.probs(s, b) *
                  (sol.leader_values.q(s, b) / beta) *
                  (m.grad_reward_follower(s, b) - mean_grad);
    }
  }
  CHECK((sobirl.guiding_term - exact_h1).norm() < 0.2 * exact_h1.norm() + 0.02);

  // deterministic best response: the inner difference vanishes stepwise
  TabularPolicy det;
  det.probs = Eigen::MatrixXd::Zero(3, 2);
  det.probs.col(0).setOnes();
  std::vector<DiscreteTrajectory> det_batch;
  Rng rng_det(13);
  for (int j = 0; j < 5; ++j) det_batch.push_back(sample_trajectory(m, det, 6, rng_det));
  CmdpBatchInputs in_det = in;
  in_det.batch = &det_batch;
  in_det.best_response = &det;
  CHECK(sobirl_gradient_cmdp(in_det).guiding_term.cwiseAbs().maxCoeff() < 1e-12);

  // theta-free follower rewards zero the guiding term
  RandomCmdpOptions opt_zero = opt;
  opt_zero.theta_rewards = false;
  const auto family_zero = random_cmdp_family(opt_zero, 72);
  TabularCmdp mz = family_zero.build(Eigen::VectorXd::Zero(2));
  CmdpBatchInputs in_zero = in;
  in_zero.model = &mz;
  const HypergradientEstimate zero_est = sobirl_gradient_cmdp(in_zero);
  CHECK(zero_est.guiding_term.cwiseAbs().maxCoeff() == 0.0);

  // leader-dependent transitions are rejected
  RandomCmdpOptions opt_p;
  const auto family_p = random_cmdp_family(opt_p, 73);
  TabularCmdp mp = family_p.build(Eigen::VectorXd::Zero(opt_p.dim));
  CmdpBatchInputs in_p = in;
  in_p.model = &mp;
  CHECK_THROWS_AS(sobirl_gradient_cmdp(in_p), ConfigurationError);
}

TEST_CASE("markov game: follower Q gradient forms and the t=0 subtraction") {
  const TabularMarkovGame game = toy_mg_build();
  SoftmaxTabularLeader leader;
  leader.logits.resize(3, 2);
  leader.logits << 0.2, -0.1, 0.35, -0.35, 0.0, 0.1;
  const double beta = toy_mg::kBeta;
  const auto sol = exact_mg_solution(game, leader, beta, 1e-13);

  // benefit weighting cancels the b-independent subtraction exactly
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      Eigen::VectorXd weighted_eq9 = Eigen::VectorXd::Zero(leader.dim());
      Eigen::VectorXd weighted_pointwise = Eigen::VectorXd::Zero(leader.dim());
      for (int b = 0; b < 3; ++b) {
        const int sab = game.idx(s, a, b);
        const double gb = sol.best_response.prob(s, a, b);
        weighted_eq9 += gb * sol.benefit_values[sab] * sol.q_f_grad[sab];
        weighted_pointwise += gb * sol.benefit_values[sab] * sol.q_f_grad_pointwise[sab];
      }
      CHECK((weighted_eq9 - weighted_pointwise).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  // the guiding terms built from either form agree
  const Eigen::VectorXd g9 = exact_guiding_term_mg(game, sol, leader, true);
  const Eigen::VectorXd g64 = exact_guiding_term_mg(game, sol, leader, false);
  CHECK((g9 - g64).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("markov game: zero score and single-term reductions") {
  const TabularMarkovGame game = toy_mg_build();
  Eigen::MatrixXd v_f = Eigen::MatrixXd::Constant(3, 2, 2.0);
  DiscreteTrajectory traj;
  traj.steps.push_back({toy_mg::kStateS, 0, toy_mg::kActA, 1.0, 1.0, toy_mg::kStateA});
  traj.steps.push_back({toy_mg::kStateA, 1, toy_mg::kActB, 0.0, -1.0, toy_mg::kStateS});

  LeaderScoreFn zero_score = [](int, int) { return Eigen::VectorXd::Zero(4); };
  const Eigen::VectorXd z = follower_q_grad_mg_segment(traj, 0, zero_score, v_f, 0.9);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);

  // gamma_F = 0 keeps only V_F(s0, a0) score(s0, a0)
  LeaderScoreFn unit_score = [](int s, int a) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(6);
    g[s * 2 + a] = 1.0;
    return g;
  };
  const Eigen::VectorXd single = follower_q_grad_mg_segment(traj, 0, unit_score, v_f, 0.0);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(6);
  expected[toy_mg::kStateS * 2 + 0] = 2.0;
  CHECK((single - expected).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(follower_q_grad_mg({}, unit_score, v_f, 0.9), MissingDataError);
}

TEST_CASE("markov game hypergradient oracle vs finite differences") {
  const TabularMarkovGame game = toy_mg_build();
  Rng rng(404);
  const double beta = toy_mg::kBeta, step = 1e-5;
  for (int trial = 0; trial < 2; ++trial) {
    SoftmaxTabularLeader leader;
    leader.logits = 0.5 * Eigen::MatrixXd::NullaryExpr(3, 2, [&](int, int) { return rng.normal(); });
    const HypergradientEstimate est = exact_hypergradient_mg(game, leader, beta, 1e-13);
    Eigen::VectorXd fd(6);
    for (int k = 0; k < 6; ++k) {
      SoftmaxTabularLeader up = leader, dn = leader;
      up.logits(k / 2, k % 2) += step;
      dn.logits(k / 2, k % 2) -= step;
      fd[k] = (exact_leader_objective_mg(game, up, beta, 1e-13) -
               exact_leader_objective_mg(game, dn, beta, 1e-13)) /
              (2 * step);
    }
    const double rel = (est.total - fd).norm() / std::max(1e-9, fd.norm());
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("markov game sampled assembly: benefit-free reduction and beta scaling") {
  MgGradientSamples samples;
  samples.dim = 2;
  samples.beta = 0.1;
  samples.gamma_l = 0.9;
  samples.q_l = {1.0, 2.0};
  samples.benefit_values = {0.0, 0.0};
  samples.time_index = {0, 1};
  samples.score = {(Eigen::VectorXd(2) << 1.0, 0.0).finished(),
                   (Eigen::VectorXd(2) << 0.0, 1.0).finished()};
  samples.q_f_grad = {(Eigen::VectorXd(2) << 3.0, 3.0).finished(),
                      (Eigen::VectorXd(2) << -1.0, 2.0).finished()};
  const HypergradientEstimate est = bchg_hypergradient_mg(samples);
  CHECK((est.total - est.partial_term).cwiseAbs().maxCoeff() == 0.0);
  CHECK(est.partial_term[0] == doctest::Approx(0.5));
  CHECK(est.partial_term[1] == doctest::Approx(1.0));

  samples.benefit_values = {0.5, -0.5};
  const HypergradientEstimate at_beta = bchg_hypergradient_mg(samples);
  samples.beta = 0.2;
  const HypergradientEstimate at_2beta = bchg_hypergradient_mg(samples);
  CHECK((at_beta.guiding_term - 2.0 * at_2beta.guiding_term).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("biac target: argmax plumbing") {
  const TabularMarkovGame game = toy_mg_build();
  // best response table: at s'=1, leader 0 prefers b=2; leader 1 prefers b=0
  ConditionedTabularPolicy g;
  g.n_states = 3;
  g.n_leader_actions = 2;
  g.probs = Eigen::MatrixXd::Constant(6, 3, 0.1);
  for (int row = 0; row < 6; ++row) g.probs.row(row) /= g.probs.row(row).sum();
  g.probs.row(game.sbar(1, 0)) << 0.1, 0.1, 0.8;
  g.probs.row(game.sbar(1, 1)) << 0.8, 0.1, 0.1;

  auto q_l = [](int, int a, int b) { return a == 1 && b == 0 ? 5.0 : (a == 0 && b == 2 ? 3.0 : 0.0); };
  // a' = argmax_a Q(s',a,b*(a)): Q(1,0,b*=2)=3 vs Q(1,1,b*=0)=5 -> a'=1, y = r + gamma*5
  const double y = biac_target(1.0, 1, q_l, g, 0.99);
  CHECK(y == doctest::Approx(1.0 + 0.99 * 5.0));

  // single-action degenerate case: y = r + gamma Q(s', a0, b0)
  ConditionedTabularPolicy single;
  single.n_states = 1;
  single.n_leader_actions = 1;
  single.probs = Eigen::MatrixXd::Ones(1, 1);
  auto q_one = [](int, int, int) { return 2.0; };
  CHECK(biac_target(0.5, 0, q_one, single, 0.9) == doctest::Approx(0.5 + 0.9 * 2.0));
}
