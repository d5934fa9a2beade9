#include "bchg/lqr.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>

#include "bchg/errors.hpp"

namespace bchg {

void LqrProblem::validate() const {
  const long n = a.rows();
  const long m = b.cols();
  if (a.cols() != n || b.rows() != n || q_bar.rows() != n || q_bar.cols() != n ||
      r_bar.rows() != m || r_bar.cols() != m) {
    throw ConfigurationError("LqrProblem: dimension mismatch");
  }
  if ((q_bar - q_bar.transpose()).cwiseAbs().maxCoeff() > 1e-9 ||
      (r_bar - r_bar.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ConfigurationError("LqrProblem: Qbar and Rbar must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(q_bar), er(r_bar);
  if (eq.eigenvalues().minCoeff() < -1e-10) {
    throw ConfigurationError("LqrProblem: Qbar must be positive semidefinite");
  }
  if (er.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigurationError("LqrProblem: Rbar must be positive definite");
  }
  if (gamma < 0.0 || gamma >= 1.0) throw DomainError("LqrProblem: gamma must lie in [0, 1)");
  if (beta <= 0.0) throw DomainError("LqrProblem: beta must be positive");
}

namespace {

Eigen::MatrixXd riccati_rhs(const Eigen::MatrixXd& p, const Eigen::MatrixXd& a,
                            const Eigen::MatrixXd& b, const Eigen::MatrixXd& q_bar,
                            const Eigen::MatrixXd& r_bar, double gamma) {
  const Eigen::MatrixXd s = r_bar + gamma * b.transpose() * p * b;
  const Eigen::MatrixXd bpa = b.transpose() * p * a;
  return q_bar + gamma * a.transpose() * p * a -
         gamma * gamma * bpa.transpose() * s.ldlt().solve(bpa);
}

}  // namespace

double riccati_residual(const Eigen::MatrixXd& p, const Eigen::MatrixXd& a,
                        const Eigen::MatrixXd& b, const Eigen::MatrixXd& q_bar,
                        const Eigen::MatrixXd& r_bar, double gamma) {
  return (riccati_rhs(p, a, b, q_bar, r_bar, gamma) - p).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd riccati_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const Eigen::MatrixXd& q_bar, const Eigen::MatrixXd& r_bar,
                              double gamma, const RiccatiOptions& options) {
  Eigen::MatrixXd p = options.initial ? *options.initial : q_bar;
  double residual = riccati_residual(p, a, b, q_bar, r_bar, gamma);
  if (options.residual_history) options.residual_history->push_back(residual);
  for (int it = 0; it < options.max_iters; ++it) {
    Eigen::MatrixXd next = riccati_rhs(p, a, b, q_bar, r_bar, gamma);
    next = 0.5 * (next + next.transpose());
    residual = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (options.residual_history) options.residual_history->push_back(residual);
    if (p.cwiseAbs().maxCoeff() > 1e12) {
      throw IterationLimitError("riccati_solve: iteration diverged", residual);
    }
    if (residual <= options.tol) return p;
  }
  throw IterationLimitError("riccati_solve: max_iters reached", residual);
}

double LqrSolution::value_cost(const Eigen::VectorXd& state) const {
  const Eigen::VectorXd as = a_copy * state;
  return state.dot(q_bar_copy * state) + as.dot(p_cond * as) + value_const;
}

double LqrSolution::value_cost(const Eigen::VectorXd& state,
                               const Eigen::VectorXd& disturbance) const {
  const Eigen::VectorXd z = a_copy * state + disturbance;
  return state.dot(q_bar_copy * state) + z.dot(p_cond * z) + value_const;
}

double LqrSolution::q_cost(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const {
  // One-step cost plus discounted expected next value under the quadratic form
  // V(x) = x'Px + v; the Tr term carries the disturbance.
  const Eigen::VectorXd next_mean = a_copy * state + b_mat * action;
  return state.dot(q_bar_copy * state) + action.dot(r_bar_copy * action) +
         gamma * (next_mean.dot(p * next_mean) + trace_term + value_const);
}

LqrFollowerPolicy LqrSolution::policy() const {
  LqrFollowerPolicy g;
  g.k_state = gain_state;
  g.k_cond = gain_cond;
  g.cov = policy_cov;
  g.cov_chol = Eigen::LLT<Eigen::MatrixXd>(policy_cov).matrixL();
  return g;
}

namespace {

LqrSolution solve_common(const Eigen::MatrixXd& a_eff, const LqrProblem& problem,
                         const Eigen::MatrixXd& value_noise_factor,
                         const RiccatiOptions& options, bool noise_through_p_cond) {
  LqrSolution sol;
  sol.p = riccati_solve(a_eff, problem.b, problem.q_bar, problem.r_bar, problem.gamma, options);
  sol.gamma = problem.gamma;
  sol.beta = problem.beta;
  sol.q_bar_copy = problem.q_bar;
  sol.r_bar_copy = problem.r_bar;
  sol.b_mat = problem.b;
  sol.a_copy = a_eff;
  sol.s = problem.r_bar + problem.gamma * problem.b.transpose() * sol.p * problem.b;
  const Eigen::LDLT<Eigen::MatrixXd> s_ldlt(sol.s);
  sol.gain_state = problem.gamma * s_ldlt.solve(problem.b.transpose() * sol.p * a_eff);
  sol.policy_cov = 0.5 * problem.beta * s_ldlt.solve(Eigen::MatrixXd::Identity(
                                             sol.s.rows(), sol.s.cols()));
  sol.p_cond = problem.gamma * sol.p -
               problem.gamma * problem.gamma * sol.p * problem.b *
                   s_ldlt.solve(problem.b.transpose() * sol.p);
  const long m = problem.b.cols();
  const Eigen::MatrixXd noise_cov = value_noise_factor * value_noise_factor.transpose();
  const Eigen::MatrixXd& carrier = noise_through_p_cond ? sol.p_cond : sol.p;
  sol.trace_term = (carrier * noise_cov).trace();
  const double log_det_s = std::log(sol.s.determinant());
  sol.value_const = (1.0 / (1.0 - problem.gamma)) *
                    (-0.5 * problem.beta * static_cast<double>(m) *
                         std::log(M_PI * problem.beta) +
                     0.5 * problem.beta * log_det_s + problem.gamma * sol.trace_term);
  return sol;
}

}  // namespace

LqrSolution entreg_lqr_unobservable(const LqrProblem& problem, const RiccatiOptions& options) {
  problem.validate();
  // Unobservable case: P_ww coincides with P, so the value constant carries Tr(P UU').
  return solve_common(problem.a, problem, problem.noise_factor, options,
                      /*noise_through_p_cond=*/false);
}

LqrSolution entreg_lqr_observable(const LqrProblem& problem, const RiccatiOptions& options) {
  problem.validate();
  LqrSolution sol = solve_common(problem.a, problem, problem.noise_factor, options,
                                 /*noise_through_p_cond=*/true);
  sol.gain_cond = problem.gamma * Eigen::LDLT<Eigen::MatrixXd>(sol.s).solve(
                                      problem.b.transpose() * sol.p);
  return sol;
}

LqrSolution mg_lqr_best_response(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 const Eigen::MatrixXd& c, const Eigen::MatrixXd& q_bar,
                                 const Eigen::MatrixXd& r_bar, const Eigen::MatrixXd& k_theta,
                                 double gamma_f, double beta,
                                 const Eigen::MatrixXd& leader_noise_factor,
                                 const RiccatiOptions& options) {
  LqrProblem problem;
  problem.a = a;
  problem.b = b;
  problem.q_bar = q_bar;
  problem.r_bar = r_bar;
  problem.noise_factor = c * leader_noise_factor;
  problem.gamma = gamma_f;
  problem.beta = beta;
  problem.validate();

  const Eigen::MatrixXd a_eff = a + c * k_theta;
  LqrSolution sol = solve_common(a_eff, problem, problem.noise_factor, options,
                                 /*noise_through_p_cond=*/true);
  // -K_s' s - K_w' C (a - K_theta s) collapses to -K_s s - K_a a with the base A.
  const Eigen::LDLT<Eigen::MatrixXd> s_ldlt(sol.s);
  sol.gain_state = gamma_f * s_ldlt.solve(b.transpose() * sol.p * a);
  sol.gain_cond = gamma_f * s_ldlt.solve(b.transpose() * sol.p * c);
  return sol;
}

}  // namespace bchg
