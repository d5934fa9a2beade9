#pragma once

#include <Eigen/Core>
#include <vector>

#include "bchg/lqr.hpp"

namespace bchg {

// Four-zone building model: temperature deviations evolve as
// s' = A(theta) s + B b + w with two HVAC inputs. The leader's unconstrained
// parameters map through a sigmoid to insulation levels alpha and airflow
// levels beta_air, which assemble A(theta).
struct ThermalEnv {
  static constexpr int kZones = 4;
  static constexpr int kUnits = 2;
  static constexpr int kDim = 8;

  Eigen::VectorXd theta_unconstrained;  // R^8
  Eigen::VectorXd alpha;                // sigmoid(theta[0:4])
  Eigen::VectorXd airflow;              // sigmoid(theta[4:8])
  Eigen::MatrixXd a;                    // A(theta)
  std::vector<Eigen::MatrixXd> a_grad;  // dA/dtheta_k (chain rule applied)
  Eigen::MatrixXd b;
  Eigen::MatrixXd noise_factor;  // U
  Eigen::MatrixXd q_bar;
  Eigen::MatrixXd r_bar;
  double gamma = 0.9;  // both players
  double beta_entropy = 0.1;
  double initial_state_stddev = 5.0;

  double stability(const Eigen::VectorXd& s) const;
  double energy_cost(const Eigen::VectorXd& b_action) const;
  double configuration_cost() const;
  double reward_leader(const Eigen::VectorXd& s, const Eigen::VectorXd& b_action) const;
  double reward_follower(const Eigen::VectorXd& s, const Eigen::VectorXd& b_action) const;

  // Only the configuration cost depends on theta.
  Eigen::VectorXd grad_reward_leader() const;
  // grad_theta log N(s'; A s + B b, UU')
  Eigen::VectorXd grad_log_transition(const Eigen::VectorXd& s, const Eigen::VectorXd& b_action,
                                      const Eigen::VectorXd& s_next) const;

  LqrProblem follower_problem() const;
};

ThermalEnv thermal_build(const Eigen::VectorXd& theta_unconstrained);

}  // namespace bchg
