#pragma once

#include <Eigen/Core>
#include <vector>

#include "bchg/policies.hpp"

namespace bchg {

// Discounted LQR with additive Gaussian disturbance and entropy-regularized
// follower. Cost per step: s'Qbar s + b'Rbar b (reward is the negative).
struct LqrProblem {
  Eigen::MatrixXd a;             // n x n
  Eigen::MatrixXd b;             // n x m
  Eigen::MatrixXd q_bar;         // n x n, symmetric PSD
  Eigen::MatrixXd r_bar;         // m x m, symmetric PD
  Eigen::MatrixXd noise_factor;  // U, disturbance covariance factor (n x n)
  double gamma = 0.9;
  double beta = 0.1;

  void validate() const;
};

struct RiccatiOptions {
  int max_iters = 50000;
  double tol = 1e-12;
  const Eigen::MatrixXd* initial = nullptr;       // defaults to q_bar
  std::vector<double>* residual_history = nullptr;
};

// Fixed-point iteration on
//   P <- Qbar + gamma A'PA - gamma^2 A'PB (Rbar + gamma B'PB)^-1 B'PA,
// symmetrized each sweep. Throws IterationLimitError on divergence or when
// max_iters is exhausted above tol.
Eigen::MatrixXd riccati_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const Eigen::MatrixXd& q_bar, const Eigen::MatrixXd& r_bar,
                              double gamma, const RiccatiOptions& options = {});

double riccati_residual(const Eigen::MatrixXd& p, const Eigen::MatrixXd& a,
                        const Eigen::MatrixXd& b, const Eigen::MatrixXd& q_bar,
                        const Eigen::MatrixXd& r_bar, double gamma);

// Closed-form entropy-regularized best response and value function.
struct LqrSolution {
  Eigen::MatrixXd p;           // Riccati solution (P_ss)
  Eigen::MatrixXd s;           // Rbar + gamma B'PB
  Eigen::MatrixXd gain_state;  // K_s = gamma S^-1 B'PA
  Eigen::MatrixXd gain_cond;   // K_w = gamma S^-1 B'P (observable) or K_a = gamma S^-1 B'PC
  Eigen::MatrixXd policy_cov;  // (beta/2) S^-1
  Eigen::MatrixXd p_cond;      // P_ww = gamma P - gamma^2 P B S^-1 B'P
  double value_const = 0.0;    // v
  double beta = 0.0;
  double gamma = 0.0;
  double trace_term = 0.0;     // Tr(carrier * UU')
  Eigen::MatrixXd q_bar_copy;
  Eigen::MatrixXd r_bar_copy;
  Eigen::MatrixXd b_mat;
  Eigen::MatrixXd a_copy;      // effective A used for the value quadratic

  // Optimal cost-to-go of the minimization problem (reward form is the negative).
  double value_cost(const Eigen::VectorXd& state) const;
  double value_cost(const Eigen::VectorXd& state, const Eigen::VectorXd& disturbance) const;
  // Q(s, b) = cost(s,b) + gamma E_w[V(next)]
  double q_cost(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const;

  LqrFollowerPolicy policy() const;
};

// Proposition-style solution when the disturbance is not observed before
// acting: g(b|s) = N(-K_s s, (beta/2) S^-1).
LqrSolution entreg_lqr_unobservable(const LqrProblem& problem,
                                    const RiccatiOptions& options = {});

// Disturbance observed before acting: g(b|s,w) = N(-K_s s - K_w w, (beta/2) S^-1).
LqrSolution entreg_lqr_observable(const LqrProblem& problem, const RiccatiOptions& options = {});

// Markov-game follower: transition s' = As + Bb + Ca with leader policy
// N(K_theta s, UU'). Substituting A -> A + C K_theta and w -> C(a - K_theta s)
// into the observable solution collapses to mean -K_s s - K_a a with gains
// taken at the base A and C.
LqrSolution mg_lqr_best_response(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& c, const Eigen::MatrixXd& q_bar,
                                 const Eigen::MatrixXd& r_bar, const Eigen::MatrixXd& k_theta,
                                 double gamma_f, double beta,
                                 const Eigen::MatrixXd& leader_noise_factor,
                                 const RiccatiOptions& options = {});

}  // namespace bchg
