#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "bchg/exact_eval.hpp"
#include "bchg/policies.hpp"
#include "bchg/softsolve.hpp"
#include "bchg/tabular_cmdp.hpp"
#include "bchg/tabular_mg.hpp"
#include "bchg/trajectory.hpp"

namespace bchg {

// Leader-parameter-dimension gradient with the direct and best-response-shift
// components separated for diagnostics. total = partial + guiding + regularizer.
struct HypergradientEstimate {
  Eigen::VectorXd total;
  Eigen::VectorXd partial_term;
  Eigen::VectorXd guiding_term;
  Eigen::VectorXd regularizer_term;
  int sample_count = 0;
  bool clipped = false;

  static HypergradientEstimate zero(int dim);
  void assemble();  // total <- partial + guiding + regularizer
};

// B_L = Q_L - V_L. Under exact values sum_b g(b|sbar) B_L(sbar,b) = 0.
Eigen::MatrixXd benefit(const Eigen::MatrixXd& q_l, const Eigen::VectorXd& v_l);

// Rescales total and all components by the same factor so |total| <= max_norm.
HypergradientEstimate clip_gradient(HypergradientEstimate estimate, double max_norm);

// ---------------------------------------------------------------------------
// Suffix segments: every occurrence of a key contributes the tail of its own
// trajectory starting at that occurrence.
// ---------------------------------------------------------------------------

struct Segment {
  const DiscreteTrajectory* traj = nullptr;
  int start = 0;
};

std::vector<std::vector<Segment>> segments_by_state_action(
    const std::vector<DiscreteTrajectory>& batch, int n_states, int n_actions);
std::vector<std::vector<Segment>> segments_by_state(
    const std::vector<DiscreteTrajectory>& batch, int n_states);

// ---------------------------------------------------------------------------
// Configurable-MDP estimators (sampled)
// ---------------------------------------------------------------------------

// Discounted direct-effect sum, trajectory-averaged:
//   (1/|B|) sum_tau sum_t gamma_L^t ( grad r_L(s_t,b_t)
//                                     + V_L(s_t) grad log p(s_t | s_{t-1}, b_{t-1}) )
// where the t=0 transition score is grad log rho0(s_0). Adds the regularizer
// gradient when the model carries one.
Eigen::VectorXd partial_derivative_cmdp(const std::vector<DiscreteTrajectory>& batch,
                                        const TabularCmdp& model, const Eigen::VectorXd& v_l);

// Segment-averaged estimate of grad_theta Q_F at the segments' common root:
//   mean over segments of sum_t gamma_F^{t-k} grad r_F(s_t,b_t)
//                         + gamma_F^{t-k+1} V_F(s_{t+1}) grad log p(s_{t+1}|s_t,b_t).
Eigen::VectorXd follower_q_grad_cmdp(const std::vector<Segment>& segments,
                                     const TabularCmdp& model, const Eigen::VectorXd& v_f);

struct CmdpBatchInputs {
  const std::vector<DiscreteTrajectory>* batch = nullptr;
  // Segment source for follower-gradient estimates; defaults to batch. The
  // oracle variant passes its uniform-start rollouts here.
  const std::vector<DiscreteTrajectory>* segment_source = nullptr;
  const TabularCmdp* model = nullptr;
  const Eigen::MatrixXd* benefit_table = nullptr;  // B_L(s, b)
  const Eigen::MatrixXd* q_l = nullptr;            // Q_L(s, b)
  const Eigen::VectorXd* v_l = nullptr;            // V_L(s)
  const Eigen::VectorXd* v_f = nullptr;            // follower soft state values
  const TabularPolicy* best_response = nullptr;
  double beta = 0.0;
};

// Algorithm-style assembly: partial + (1/(beta |B|)) sum_tau sum_t gamma_L^t
// B_L(s_t,b_t) * followerQgrad(s_t,b_t).
HypergradientEstimate bchg_hypergradient_cmdp(const CmdpBatchInputs& in);

// Partial derivative only.
HypergradientEstimate naive_pgd_gradient_cmdp(const CmdpBatchInputs& in);

// Benefit-weighted difference form: guiding uses grad Q_F(s,b) - grad V_F(s)
// with the V side estimated from per-state segments. In strict mode a visited
// state whose segments carry fewer than two distinct follower actions raises
// MissingDataError; lenient mode reproduces the zero-difference behavior of
// the published experiment loop.
HypergradientEstimate hpgd_gradient_cmdp(const CmdpBatchInputs& in, bool strict_revisits = true);

// One-step-truncation guiding term
//   (1/(beta |B|)) sum_tau Q_L(s_0,b_0) sum_t ( grad r_F(s_t,b_t)
//                                               - E_{b~g(.|s_t)}[grad r_F(s_t,b)] ).
// Requires theta-free transitions.
HypergradientEstimate sobirl_gradient_cmdp(const CmdpBatchInputs& in);

// ---------------------------------------------------------------------------
// Markov-game estimators (sampled)
// ---------------------------------------------------------------------------

using LeaderScoreFn = std::function<Eigen::VectorXd(int s, int a)>;

// Discounted score-weighted sum along one suffix, t=0 term included:
//   sum_{u>=k} gamma_F^{u-k} V_F(s_u,a_u) grad log f(a_u | s_u).
Eigen::VectorXd follower_q_grad_mg_segment(const DiscreteTrajectory& traj, int start,
                                           const LeaderScoreFn& score,
                                           const Eigen::MatrixXd& v_f, double gamma_f);

Eigen::VectorXd follower_q_grad_mg(const std::vector<Segment>& segments,
                                   const LeaderScoreFn& score, const Eigen::MatrixXd& v_f,
                                   double gamma_f);

// Sampled transitions (with precomputed per-sample quantities) feeding the
// Markov-game hypergradient. q_f_grad holds the per-sample follower-Q-gradient
// estimate; time_index drives the gamma_L^t weight of the guiding term.
struct MgGradientSamples {
  int dim = 0;
  double beta = 0.0;
  double gamma_l = 0.0;
  std::vector<double> q_l;
  std::vector<double> benefit_values;
  std::vector<int> time_index;
  std::vector<Eigen::VectorXd> score;
  std::vector<Eigen::VectorXd> q_f_grad;
  const Eigen::VectorXd* grad_regularizer = nullptr;
};

// Plain minibatch mean of Q_L grad log f (the Markov-game partial derivative).
Eigen::VectorXd partial_derivative_mg(const MgGradientSamples& samples);

HypergradientEstimate bchg_hypergradient_mg(const MgGradientSamples& samples);
HypergradientEstimate naive_pgd_gradient_mg(const MgGradientSamples& samples);

// Stackelberg stage-game critic target:
//   b*(a') = argmax_b g(b | s', a'),  a* = argmax_a Q(s', a, b*(a)),
//   y = r + gamma_L Q(s', a*, b*(a*)).
double biac_target(double reward, int s_next,
                   const std::function<double(int s, int a, int b)>& q_l,
                   const ConditionedTabularPolicy& best_response, double gamma_l);

// ---------------------------------------------------------------------------
// Exact oracles (tabular enumeration)
// ---------------------------------------------------------------------------

enum class GuidingForm { kCovariance, kHpgd };

struct ExactCmdpSolution {
  SoftValues soft;
  TabularPolicy best_response;
  PolicyValues leader_values;
  Eigen::MatrixXd benefit_table;
  VisitationDistribution visitation;        // gamma_L, t=0 included
  std::vector<Eigen::VectorXd> q_f_grad;    // per (s * n_actions + b)
  std::vector<Eigen::VectorXd> v_f_grad;    // per s
};

ExactCmdpSolution exact_cmdp_solution(const TabularCmdp& model, double beta,
                                      double solve_tol = 1e-12);

// Exact-expectation guiding term in either algebraic form; the two agree by
// the covariance identity. Enumeration limit n_states * n_actions <= 1000.
Eigen::VectorXd exact_guiding_term_cmdp(const TabularCmdp& model, const ExactCmdpSolution& sol,
                                        GuidingForm form);

HypergradientEstimate exact_hypergradient_cmdp(const TabularCmdp& model, double beta,
                                               double solve_tol = 1e-12);

double exact_leader_objective(const TabularCmdp& model, double beta, double solve_tol = 1e-12);

struct ExactMgSolution {
  MgSoftValues soft;
  ConditionedTabularPolicy best_response;
  MgPolicyValues leader_values;
  Eigen::VectorXd benefit_values;              // flat (s,a,b)
  VisitationDistribution visitation;           // over states, gamma_L
  std::vector<Eigen::VectorXd> q_f_grad;       // t=0-inclusive form, flat (s,a,b)
  std::vector<Eigen::VectorXd> q_f_grad_pointwise;  // subtracted form
};

ExactMgSolution exact_mg_solution(const TabularMarkovGame& game,
                                  const SoftmaxTabularLeader& leader, double beta,
                                  double solve_tol = 1e-12);

Eigen::VectorXd exact_guiding_term_mg(const TabularMarkovGame& game, const ExactMgSolution& sol,
                                      const SoftmaxTabularLeader& leader, bool t0_inclusive);

HypergradientEstimate exact_hypergradient_mg(const TabularMarkovGame& game,
                                             const SoftmaxTabularLeader& leader, double beta,
                                             double solve_tol = 1e-12);

double exact_leader_objective_mg(const TabularMarkovGame& game,
                                 const SoftmaxTabularLeader& leader, double beta,
                                 double solve_tol = 1e-12);

// ---------------------------------------------------------------------------
// Continuous-state configurable MDP (per-occurrence keys)
// ---------------------------------------------------------------------------

// Per-trajectory per-step precomputed quantities; the runner fills these from
// the environment hooks and the critic.
struct ContinuousCmdpBatch {
  int dim = 0;
  double beta = 0.0;
  double gamma_l = 0.0;
  double gamma_f = 0.0;
  std::vector<std::vector<double>> q_l;
  std::vector<std::vector<double>> v_l;
  std::vector<std::vector<double>> v_f_next;             // V_F(s_{t+1})
  std::vector<std::vector<Eigen::VectorXd>> grad_r_l;
  std::vector<std::vector<Eigen::VectorXd>> grad_r_f;    // may be empty (theta-free r_F)
  std::vector<std::vector<Eigen::VectorXd>> score_p;     // grad log p(s_{t+1}|s_t,b_t)
  const Eigen::VectorXd* grad_regularizer = nullptr;
};

HypergradientEstimate bchg_hypergradient_continuous(const ContinuousCmdpBatch& batch);
HypergradientEstimate naive_pgd_gradient_continuous(const ContinuousCmdpBatch& batch);
// v_f_grad_pred[i][t]: regressor estimate of grad V_F at s_t of trajectory i.
HypergradientEstimate hpgd_td_gradient_continuous(
    const ContinuousCmdpBatch& batch,
    const std::vector<std::vector<Eigen::VectorXd>>& v_f_grad_pred);

}  // namespace bchg
