#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>

#include "bchg/envs/bilevel_lqr.hpp"
#include "bchg/errors.hpp"
#include "bchg/lqr.hpp"
#include "bchg/rng.hpp"

using namespace bchg;

namespace {

Eigen::MatrixXd ones1() { return Eigen::MatrixXd::Ones(1, 1); }

LqrProblem scalar_problem(double beta) {
  LqrProblem p;
  p.a = ones1();
  p.b = ones1();
  p.q_bar = ones1();
  p.r_bar = ones1();
  p.noise_factor = 0.5 * ones1();
  p.gamma = 0.9;
  p.beta = beta;
  return p;
}

}  // namespace

TEST_CASE("riccati: no dynamics or no lookahead leaves Qbar") {
  const Eigen::MatrixXd q = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd b(2, 1);
  b << 0.0, 1.0;
  CHECK((riccati_solve(Eigen::MatrixXd::Zero(2, 2), b, q, r, 0.9) - q).cwiseAbs().maxCoeff() <
        1e-12);
  Eigen::MatrixXd a(2, 2);
  a << 0.3, 0.1, 0.0, 0.4;
  CHECK((riccati_solve(a, b, q, r, 0.0) - q).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("riccati: scalar quadratic root 0.9 P^2 - 0.8 P - 1 = 0") {
  const Eigen::MatrixXd p = riccati_solve(ones1(), ones1(), ones1(), ones1(), 0.9);
  const double expected = (0.8 + std::sqrt(0.64 + 3.6)) / 1.8;
  CHECK(p(0, 0) == doctest::Approx(expected).epsilon(1e-10));
  // verify by substitution into the quadratic
  const double v = p(0, 0);
  CHECK(std::abs(0.9 * v * v - 0.8 * v - 1.0) < 1e-9);
  CHECK(riccati_residual(p, ones1(), ones1(), ones1(), ones1(), 0.9) <= 1e-9);
}

TEST_CASE("riccati: divergence reported for uncontrollable unstable dynamics") {
  const Eigen::MatrixXd a = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(
      riccati_solve(a, b, Eigen::MatrixXd::Identity(2, 2), ones1(), 0.9), IterationLimitError);
}

TEST_CASE("riccati: residual decreases monotonically from P0 = 0") {
  std::vector<double> history;
  RiccatiOptions opts;
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  opts.initial = &zero;
  opts.residual_history = &history;
  riccati_solve(ones1(), ones1(), ones1(), ones1(), 0.9, opts);
  REQUIRE(history.size() > 8);
  for (size_t i = 2; i + 1 < history.size(); ++i) CHECK(history[i + 1] <= history[i] + 1e-15);

  // nilpotent dynamics converge almost immediately but still monotonically
  const BilevelLqrEnv env = bilevel_lqr_build();
  std::vector<double> short_history;
  RiccatiOptions opts2;
  const Eigen::MatrixXd zero2 = Eigen::MatrixXd::Zero(2, 2);
  opts2.initial = &zero2;
  opts2.residual_history = &short_history;
  riccati_solve(env.a, env.b, env.q_bar, env.r_bar, 0.95, opts2);
  for (size_t i = 1; i + 1 < short_history.size(); ++i) {
    CHECK(short_history[i + 1] <= short_history[i] + 1e-15);
  }
}

TEST_CASE("unobservable case: costless state gives pure exploration") {
  LqrProblem p = scalar_problem(0.2);
  p.q_bar = Eigen::MatrixXd::Zero(1, 1);
  const LqrSolution sol = entreg_lqr_unobservable(p);
  CHECK(sol.p(0, 0) == doctest::Approx(0.0));
  CHECK(sol.gain_state(0, 0) == doctest::Approx(0.0));
  CHECK(sol.policy_cov(0, 0) == doctest::Approx(0.5 * 0.2 / p.r_bar(0, 0)));
}

TEST_CASE("unobservable case: scalar gains and covariance") {
  const LqrSolution sol = entreg_lqr_unobservable(scalar_problem(0.1));
  const double p = (0.8 + std::sqrt(4.24)) / 1.8;
  const double s = 1.0 + 0.9 * p;
  CHECK(sol.gain_state(0, 0) == doctest::Approx(0.9 * p / s).epsilon(1e-8));
  CHECK(sol.gain_state(0, 0) == doctest::Approx(0.5884).epsilon(1e-3));
  CHECK(sol.policy_cov(0, 0) == doctest::Approx(0.05 / s).epsilon(1e-8));
  CHECK(sol.policy_cov(0, 0) == doctest::Approx(0.0206).epsilon(1e-2));
}

TEST_CASE("unobservable case: value constant with zero disturbance") {
  LqrProblem p = scalar_problem(1.0);
  p.noise_factor = Eigen::MatrixXd::Zero(1, 1);
  p.gamma = 0.5;
  const LqrSolution sol = entreg_lqr_unobservable(p);
  const double s = sol.s(0, 0);
  const double expected = (1.0 / 0.5) * (-0.5 * std::log(M_PI) + 0.5 * std::log(s));
  CHECK(sol.value_const == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("observable case: gains collapse onto the unobservable ones") {
  const LqrProblem p = scalar_problem(0.1);
  const LqrSolution obs = entreg_lqr_observable(p);
  const LqrSolution unobs = entreg_lqr_unobservable(p);
  // with w = 0 the means agree
  Eigen::VectorXd s(1);
  s << 1.3;
  const Eigen::VectorXd w = Eigen::VectorXd::Zero(1);
  CHECK(obs.policy().mean(s, w)[0] == doctest::Approx(unobs.policy().mean(s)[0]));
  // A = 1 makes K_w equal K_s
  CHECK(obs.gain_cond(0, 0) == doctest::Approx(obs.gain_state(0, 0)).epsilon(1e-10));

  LqrProblem costless = p;
  costless.q_bar = Eigen::MatrixXd::Zero(1, 1);
  const LqrSolution zero = entreg_lqr_observable(costless);
  CHECK(zero.gain_state(0, 0) == doctest::Approx(0.0));
  CHECK(zero.gain_cond(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("soft Bellman self-consistency by numerical quadrature (scalar)") {
  const LqrProblem p = scalar_problem(0.1);
  const LqrSolution sol = entreg_lqr_unobservable(p);
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd s(1);
    s << 3.0 * rng.normal();
    // V(s) = -beta log int exp(-Q(s,b)/beta) db via Simpson quadrature
    const double mean = -sol.gain_state(0, 0) * s[0];
    const double half_width = 12.0 * std::sqrt(sol.policy_cov(0, 0));
    const int n = 4000;
    const double h = 2.0 * half_width / n;
    double integral = 0.0;
    const double q_ref = sol.q_cost(s, (Eigen::VectorXd(1) << mean).finished());
    for (int i = 0; i <= n; ++i) {
      const double b = mean - half_width + i * h;
      const double q = sol.q_cost(s, (Eigen::VectorXd(1) << b).finished());
      const double weight = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      integral += weight * std::exp(-(q - q_ref) / p.beta);
    }
    integral *= h / 3.0;
    const double v_quad = q_ref - p.beta * std::log(integral);
    CHECK(std::abs(sol.value_cost(s) - v_quad) < 1e-6);
  }
}

TEST_CASE("markov-game substitution: identities and reductions") {
  const BilevelLqrEnv env = bilevel_lqr_build();
  Eigen::MatrixXd k_theta(1, 2);
  k_theta << 0.4, -0.3;

  const LqrSolution sol = mg_lqr_best_response(env.a, env.b, env.c, env.q_bar, env.r_bar,
                                               k_theta, 0.95, 0.1, env.leader_noise);
  // cancellation identity: -K_s' s - K_w' C (a - K_theta s) == -K_s s - K_a a
  const Eigen::MatrixXd a_eff = env.a + env.c * k_theta;
  const Eigen::LDLT<Eigen::MatrixXd> s_ldlt(sol.s);
  const Eigen::MatrixXd k_s_eff = 0.95 * s_ldlt.solve(env.b.transpose() * sol.p * a_eff);
  const Eigen::MatrixXd k_w = 0.95 * s_ldlt.solve(env.b.transpose() * sol.p);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd s = rng.normal_vector(2);
    const Eigen::VectorXd a = rng.normal_vector(1);
    const Eigen::VectorXd lhs = -k_s_eff * s - k_w * (env.c * (a - k_theta * s));
    const Eigen::VectorXd rhs = -sol.gain_state * s - sol.gain_cond * a;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }

  // C = 0 removes the leader influence
  const LqrSolution no_c =
      mg_lqr_best_response(env.a, env.b, Eigen::MatrixXd::Zero(2, 1), env.q_bar, env.r_bar,
                           k_theta, 0.95, 0.1, env.leader_noise);
  const LqrProblem base{env.a, env.b, env.q_bar, env.r_bar,
                        Eigen::MatrixXd::Zero(2, 2), 0.95, 0.1};
  const LqrSolution plain = entreg_lqr_unobservable(base);
  CHECK((no_c.gain_state - plain.gain_state).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(no_c.gain_cond.cwiseAbs().maxCoeff() < 1e-12);

  // K_theta = 0 reduces to the Riccati solution at the base A
  const LqrSolution k0 = mg_lqr_best_response(env.a, env.b, env.c, env.q_bar, env.r_bar,
                                              Eigen::MatrixXd::Zero(1, 2), 0.95, 0.1,
                                              env.leader_noise);
  const Eigen::MatrixXd p_base = riccati_solve(env.a, env.b, env.q_bar, env.r_bar, 0.95);
  CHECK((k0.p - p_base).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("markov-game gains match a finite-horizon DP oracle") {
  const BilevelLqrEnv env = bilevel_lqr_build();
  Eigen::MatrixXd k_theta(1, 2);
  k_theta << 0.0, 0.0;
  const LqrSolution sol = mg_lqr_best_response(env.a, env.b, env.c, env.q_bar, env.r_bar,
                                               k_theta, 0.95, 0.1, env.leader_noise);
  CHECK(riccati_residual(sol.p, env.a + env.c * k_theta, env.b, env.q_bar, env.r_bar, 0.95) <=
        1e-9);

  // independent oracle: 1000-step backward dynamic programming from P = 0
  const Eigen::MatrixXd a_eff = env.a + env.c * k_theta;
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
  for (int step = 0; step < 1000; ++step) {
    const Eigen::MatrixXd s = env.r_bar + 0.95 * env.b.transpose() * p * env.b;
    const Eigen::MatrixXd bpa = env.b.transpose() * p * a_eff;
    p = env.q_bar + 0.95 * a_eff.transpose() * p * a_eff -
        0.95 * 0.95 * bpa.transpose() * s.inverse() * bpa;
  }
  CHECK((sol.p - p).cwiseAbs().maxCoeff() < 1e-8);
  const Eigen::MatrixXd s_dp = env.r_bar + 0.95 * env.b.transpose() * p * env.b;
  const Eigen::MatrixXd k_s_dp = 0.95 * s_dp.inverse() * env.b.transpose() * p * env.a;
  const Eigen::MatrixXd k_a_dp = 0.95 * s_dp.inverse() * env.b.transpose() * p * env.c;
  CHECK((sol.gain_state - k_s_dp).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sol.gain_cond - k_a_dp).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("closed-form policy beats perturbed gains in Monte Carlo cost") {
  const LqrProblem p = scalar_problem(0.1);
  const LqrSolution sol = entreg_lqr_unobservable(p);

  const int n_rollouts = 10000, horizon = 150;
  auto mc_costs = [&](double gain, std::uint64_t seed) {
    // common random numbers across gains
    Rng rng(seed);
    std::vector<double> costs(n_rollouts);
    const double cov_chol = std::sqrt(sol.policy_cov(0, 0));
    for (int k = 0; k < n_rollouts; ++k) {
      double s = 1.0 + 0.2 * rng.normal();
      double cost = 0.0, w = 1.0;
      for (int t = 0; t < horizon; ++t) {
        const double b = -gain * s + cov_chol * rng.normal();
        cost += w * (s * s + b * b);
        w *= p.gamma;
        s = s + b + 0.5 * rng.normal();
      }
      costs[k] = cost;
    }
    return costs;
  };

  const std::vector<double> closed = mc_costs(sol.gain_state(0, 0), 999);
  for (double delta : {0.05, -0.05}) {
    const std::vector<double> perturbed = mc_costs(sol.gain_state(0, 0) + delta, 999);
    // paired comparison under common random numbers
    double mean_diff = 0.0, sq = 0.0;
    for (int k = 0; k < n_rollouts; ++k) {
      const double d = perturbed[k] - closed[k];
      mean_diff += d;
      sq += d * d;
    }
    mean_diff /= n_rollouts;
    const double var = sq / n_rollouts - mean_diff * mean_diff;
    const double se = std::sqrt(var / n_rollouts);
    CHECK(mean_diff >= 2.0 * se);
  }
}

TEST_CASE("problem validation rejects indefinite weights") {
  LqrProblem p = scalar_problem(0.1);
  p.q_bar = -ones1();
  CHECK_THROWS_AS(p.validate(), ConfigurationError);
  LqrProblem p2 = scalar_problem(0.1);
  p2.r_bar = Eigen::MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(p2.validate(), ConfigurationError);
}
