#include "bchg/envs/thermal.hpp"

#include <cmath>

#include "bchg/errors.hpp"

namespace bchg {

namespace {

// heat-exchange coefficients; the 4<->1 coupling reuses h41 in both directions
constexpr double kK[4] = {0.04, 0.03, 0.06, 0.05};
constexpr double kH12 = 0.05, kH21 = 0.03;
constexpr double kH23 = 0.04, kH32 = 0.04;
constexpr double kH34 = 0.06, kH43 = 0.03;
constexpr double kH41 = 0.05;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd assemble_a(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  auto delta = [&](int i) { return kK[i] * (1.0 - alpha[i]); };
  a(0, 0) = 1.0 + delta(0) - kH12 * beta[0] - kH41 * beta[3];
  a(0, 1) = kH12 * beta[0];
  a(0, 3) = kH41 * beta[3];
  a(1, 0) = kH21 * beta[0];
  a(1, 1) = 1.0 + delta(1) - kH23 * beta[1] - kH21 * beta[0];
  a(1, 2) = kH23 * beta[1];
  a(2, 1) = kH32 * beta[1];
  a(2, 2) = 1.0 + delta(2) - kH34 * beta[2] - kH32 * beta[1];
  a(2, 3) = kH34 * beta[2];
  a(3, 0) = kH41 * beta[3];
  a(3, 2) = kH43 * beta[2];
  a(3, 3) = 1.0 + delta(3) - kH41 * beta[3] - kH43 * beta[2];
  return a;
}

// dA/dalpha_i and dA/dbeta_i before the sigmoid chain rule
Eigen::MatrixXd a_partial(int param) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(4, 4);
  if (param < 4) {
    d(param, param) = -kK[param];
    return d;
  }
  switch (param - 4) {
    case 0:  // beta_1: zones 1<->2
      d(0, 0) = -kH12;
      d(0, 1) = kH12;
      d(1, 0) = kH21;
      d(1, 1) = -kH21;
      break;
    case 1:  // beta_2: zones 2<->3
      d(1, 1) = -kH23;
      d(1, 2) = kH23;
      d(2, 1) = kH32;
      d(2, 2) = -kH32;
      break;
    case 2:  // beta_3: zones 3<->4
      d(2, 2) = -kH34;
      d(2, 3) = kH34;
      d(3, 2) = kH43;
      d(3, 3) = -kH43;
      break;
    case 3:  // beta_4: zones 4<->1
      d(0, 0) = -kH41;
      d(0, 3) = kH41;
      d(3, 0) = kH41;
      d(3, 3) = -kH41;
      break;
    default:
      break;
  }
  return d;
}

}  // namespace

ThermalEnv thermal_build(const Eigen::VectorXd& theta_unconstrained) {
  if (theta_unconstrained.size() != ThermalEnv::kDim) {
    throw ConfigurationError("thermal_build: theta must have 8 entries");
  }
  ThermalEnv env;
  env.theta_unconstrained = theta_unconstrained;
  env.alpha.resize(4);
  env.airflow.resize(4);
  for (int i = 0; i < 4; ++i) {
    env.alpha[i] = sigmoid(theta_unconstrained[i]);
    env.airflow[i] = sigmoid(theta_unconstrained[4 + i]);
  }
  env.a = assemble_a(env.alpha, env.airflow);
  env.a_grad.resize(ThermalEnv::kDim);
  for (int k = 0; k < ThermalEnv::kDim; ++k) {
    const double constrained = k < 4 ? env.alpha[k] : env.airflow[k - 4];
    env.a_grad[k] = a_partial(k) * (constrained * (1.0 - constrained));
  }
  env.b.resize(4, 2);
  env.b << 0.10, 0.0, 0.6, 0.0, 0.0, 0.55, 0.0, 0.30;
  env.noise_factor = 0.02 * Eigen::MatrixXd::Identity(4, 4);
  env.q_bar = Eigen::Vector4d(8.0, 1.0, 5.0, 6.0).asDiagonal();
  env.r_bar = 0.01 * Eigen::MatrixXd::Identity(2, 2);
  return env;
}

double ThermalEnv::stability(const Eigen::VectorXd& s) const {
  const double mean = s.mean();
  return -(s.array() - mean).square().sum() / static_cast<double>(kZones);
}

double ThermalEnv::energy_cost(const Eigen::VectorXd& b_action) const {
  return b_action.squaredNorm();
}

double ThermalEnv::configuration_cost() const {
  return alpha.squaredNorm() + airflow.squaredNorm();
}

double ThermalEnv::reward_leader(const Eigen::VectorXd& s,
                                 const Eigen::VectorXd& b_action) const {
  return stability(s) - 0.5 * energy_cost(b_action) - 0.1 * configuration_cost();
}

double ThermalEnv::reward_follower(const Eigen::VectorXd& s,
                                   const Eigen::VectorXd& b_action) const {
  return -(s.dot(q_bar * s) + b_action.dot(r_bar * b_action));
}

Eigen::VectorXd ThermalEnv::grad_reward_leader() const {
  Eigen::VectorXd g(kDim);
  for (int i = 0; i < 4; ++i) {
    g[i] = -0.1 * 2.0 * alpha[i] * alpha[i] * (1.0 - alpha[i]);
    g[4 + i] = -0.1 * 2.0 * airflow[i] * airflow[i] * (1.0 - airflow[i]);
  }
  return g;
}

Eigen::VectorXd ThermalEnv::grad_log_transition(const Eigen::VectorXd& s,
                                                const Eigen::VectorXd& b_action,
                                                const Eigen::VectorXd& s_next) const {
  const double inv_var = 1.0 / (0.02 * 0.02);
  const Eigen::VectorXd resid = s_next - a * s - b * b_action;
  Eigen::VectorXd g(kDim);
  for (int k = 0; k < kDim; ++k) g[k] = inv_var * (a_grad[k] * s).dot(resid);
  return g;
}

LqrProblem ThermalEnv::follower_problem() const {
  LqrProblem p;
  p.a = a;
  p.b = b;
  p.q_bar = q_bar;
  p.r_bar = r_bar;
  p.noise_factor = noise_factor;
  p.gamma = gamma;
  p.beta = beta_entropy;
  return p;
}

}  // namespace bchg
