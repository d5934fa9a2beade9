#include "bchg/hypergrad.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "bchg/errors.hpp"

namespace bchg {

HypergradientEstimate HypergradientEstimate::zero(int dim) {
  HypergradientEstimate e;
  e.total = Eigen::VectorXd::Zero(dim);
  e.partial_term = Eigen::VectorXd::Zero(dim);
  e.guiding_term = Eigen::VectorXd::Zero(dim);
  e.regularizer_term = Eigen::VectorXd::Zero(dim);
  return e;
}

void HypergradientEstimate::assemble() {
  total = partial_term + guiding_term + regularizer_term;
}

Eigen::MatrixXd benefit(const Eigen::MatrixXd& q_l, const Eigen::VectorXd& v_l) {
  if (q_l.rows() != v_l.size()) throw ConfigurationError("benefit: shape mismatch");
  return q_l.colwise() - v_l;
}

HypergradientEstimate clip_gradient(HypergradientEstimate estimate, double max_norm) {
  if (max_norm <= 0.0) throw DomainError("clip_gradient: max_norm must be positive");
  const double norm = estimate.total.norm();
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    estimate.total *= scale;
    estimate.partial_term *= scale;
    estimate.guiding_term *= scale;
    estimate.regularizer_term *= scale;
    estimate.clipped = true;
  }
  return estimate;
}

std::vector<std::vector<Segment>> segments_by_state_action(
    const std::vector<DiscreteTrajectory>& batch, int n_states, int n_actions) {
  std::vector<std::vector<Segment>> out(static_cast<size_t>(n_states) * n_actions);
  for (const auto& traj : batch) {
    for (int t = 0; t < traj.horizon(); ++t) {
      const auto& step = traj.steps[t];
      out[step.state * n_actions + step.follower_action].push_back({&traj, t});
    }
  }
  return out;
}

std::vector<std::vector<Segment>> segments_by_state(
    const std::vector<DiscreteTrajectory>& batch, int n_states) {
  std::vector<std::vector<Segment>> out(n_states);
  for (const auto& traj : batch) {
    for (int t = 0; t < traj.horizon(); ++t) out[traj.steps[t].state].push_back({&traj, t});
  }
  return out;
}

namespace {

Eigen::VectorXd zero_vec(int dim) { return Eigen::VectorXd::Zero(dim); }

void check_cmdp_inputs(const CmdpBatchInputs& in) {
  if (!in.batch || in.batch->empty()) throw ConfigurationError("estimator: empty batch");
  if (!in.model) throw ConfigurationError("estimator: model missing");
}

// Suffix sums W_k of Eq.-(6)-style rewards computed backward along a
// trajectory: W_k = grad r_F(k) + gamma V_F(s_{k+1}) score(k) + gamma W_{k+1}.
std::vector<Eigen::VectorXd> follower_grad_suffixes(const DiscreteTrajectory& traj,
                                                    const TabularCmdp& model,
                                                    const Eigen::VectorXd& v_f) {
  const int d = model.dim();
  const double gamma = model.gamma_follower;
  std::vector<Eigen::VectorXd> w(traj.horizon());
  Eigen::VectorXd acc = zero_vec(d);
  for (int t = traj.horizon() - 1; t >= 0; --t) {
    const auto& step = traj.steps[t];
    Eigen::VectorXd term = zero_vec(d);
    if (model.grad_reward_follower) {
      term += model.grad_reward_follower(step.state, step.follower_action);
    }
    if (model.grad_log_transition) {
      term += gamma * v_f[step.next_state] *
              model.grad_log_transition(step.state, step.follower_action, step.next_state);
    }
    acc = term + gamma * acc;
    w[t] = acc;
  }
  return w;
}

struct KeyedGradTables {
  std::vector<Eigen::VectorXd> by_state_action;  // mean W over occurrences of (s,b)
  std::vector<Eigen::VectorXd> by_state;         // mean W over occurrences of s
  std::vector<int> count_state_action;
  std::vector<int> count_state;
  std::vector<std::set<int>> actions_seen;       // distinct follower actions per state
};

KeyedGradTables follower_grad_tables(const std::vector<DiscreteTrajectory>& source,
                                     const TabularCmdp& model, const Eigen::VectorXd& v_f) {
  const int d = model.dim();
  KeyedGradTables tables;
  tables.by_state_action.assign(static_cast<size_t>(model.n_states) * model.n_actions,
                                zero_vec(d));
  tables.by_state.assign(model.n_states, zero_vec(d));
  tables.count_state_action.assign(static_cast<size_t>(model.n_states) * model.n_actions, 0);
  tables.count_state.assign(model.n_states, 0);
  tables.actions_seen.assign(model.n_states, {});
  for (const auto& traj : source) {
    const auto suffixes = follower_grad_suffixes(traj, model, v_f);
    for (int t = 0; t < traj.horizon(); ++t) {
      const auto& step = traj.steps[t];
      const int key = step.state * model.n_actions + step.follower_action;
      tables.by_state_action[key] += suffixes[t];
      tables.count_state_action[key] += 1;
      tables.by_state[step.state] += suffixes[t];
      tables.count_state[step.state] += 1;
      tables.actions_seen[step.state].insert(step.follower_action);
    }
  }
  for (size_t k = 0; k < tables.by_state_action.size(); ++k) {
    if (tables.count_state_action[k] > 0) {
      tables.by_state_action[k] /= tables.count_state_action[k];
    }
  }
  for (int s = 0; s < model.n_states; ++s) {
    if (tables.count_state[s] > 0) tables.by_state[s] /= tables.count_state[s];
  }
  return tables;
}

Eigen::VectorXd partial_core(const std::vector<DiscreteTrajectory>& batch,
                             const TabularCmdp& model, const Eigen::VectorXd& v_l) {
  const int d = model.dim();
  Eigen::VectorXd acc = zero_vec(d);
  for (const auto& traj : batch) {
    double w = 1.0;
    for (int t = 0; t < traj.horizon(); ++t) {
      const auto& step = traj.steps[t];
      if (model.grad_reward_leader) {
        acc += w * model.grad_reward_leader(step.state, step.follower_action);
      }
      if (t == 0) {
        if (model.grad_log_initial) acc += w * v_l[step.state] * model.grad_log_initial(step.state);
      } else if (model.grad_log_transition) {
        const auto& prev = traj.steps[t - 1];
        acc += w * v_l[step.state] *
               model.grad_log_transition(prev.state, prev.follower_action, prev.next_state);
      }
      w *= model.gamma_leader;
    }
  }
  return acc / static_cast<double>(batch.size());
}

}  // namespace

Eigen::VectorXd partial_derivative_cmdp(const std::vector<DiscreteTrajectory>& batch,
                                        const TabularCmdp& model, const Eigen::VectorXd& v_l) {
  if (batch.empty()) throw ConfigurationError("partial_derivative_cmdp: empty batch");
  Eigen::VectorXd g = partial_core(batch, model, v_l);
  if (model.grad_regularizer) g += model.grad_regularizer();
  return g;
}

Eigen::VectorXd follower_q_grad_cmdp(const std::vector<Segment>& segments,
                                     const TabularCmdp& model, const Eigen::VectorXd& v_f) {
  if (segments.empty()) {
    throw MissingDataError("follower_q_grad_cmdp: empty segment set");
  }
  const int d = model.dim();
  const double gamma = model.gamma_follower;
  Eigen::VectorXd acc = zero_vec(d);
  for (const auto& seg : segments) {
    double w = 1.0;
    for (int t = seg.start; t < seg.traj->horizon(); ++t) {
      const auto& step = seg.traj->steps[t];
      if (model.grad_reward_follower) {
        acc += w * model.grad_reward_follower(step.state, step.follower_action);
      }
      if (model.grad_log_transition) {
        acc += w * gamma * v_f[step.next_state] *
               model.grad_log_transition(step.state, step.follower_action, step.next_state);
      }
      w *= gamma;
    }
  }
  return acc / static_cast<double>(segments.size());
}

namespace {

// Shared guiding-term accumulation over the outer batch:
//   (1/(beta |B|)) sum_tau sum_t gamma_L^t weight(s_t,b_t) * table(s_t, b_t)
Eigen::VectorXd guided_accumulate(const std::vector<DiscreteTrajectory>& batch,
                                  const TabularCmdp& model, const Eigen::MatrixXd& weights,
                                  const KeyedGradTables& tables, bool subtract_state_mean,
                                  double beta) {
  const int d = model.dim();
  Eigen::VectorXd acc = zero_vec(d);
  for (const auto& traj : batch) {
    double w = 1.0;
    for (int t = 0; t < traj.horizon(); ++t) {
      const auto& step = traj.steps[t];
      const int key = step.state * model.n_actions + step.follower_action;
      Eigen::VectorXd grad = tables.by_state_action[key];
      if (subtract_state_mean) grad -= tables.by_state[step.state];
      acc += w * weights(step.state, step.follower_action) * grad;
      w *= model.gamma_leader;
    }
  }
  return acc / (beta * static_cast<double>(batch.size()));
}

}  // namespace

HypergradientEstimate bchg_hypergradient_cmdp(const CmdpBatchInputs& in) {
  check_cmdp_inputs(in);
  if (!in.benefit_table || !in.v_l || !in.v_f || in.beta <= 0.0) {
    throw ConfigurationError("bchg_hypergradient_cmdp: benefit, V_L, V_F and beta required");
  }
  const auto& source = in.segment_source ? *in.segment_source : *in.batch;
  const auto tables = follower_grad_tables(source, *in.model, *in.v_f);

  HypergradientEstimate e = HypergradientEstimate::zero(in.model->dim());
  e.partial_term = partial_core(*in.batch, *in.model, *in.v_l);
  e.guiding_term =
      guided_accumulate(*in.batch, *in.model, *in.benefit_table, tables, false, in.beta);
  if (in.model->grad_regularizer) e.regularizer_term = in.model->grad_regularizer();
  e.sample_count = static_cast<int>(in.batch->size());
  e.assemble();
  return e;
}

HypergradientEstimate naive_pgd_gradient_cmdp(const CmdpBatchInputs& in) {
  check_cmdp_inputs(in);
  if (!in.v_l) throw ConfigurationError("naive_pgd_gradient_cmdp: V_L required");
  HypergradientEstimate e = HypergradientEstimate::zero(in.model->dim());
  e.partial_term = partial_core(*in.batch, *in.model, *in.v_l);
  if (in.model->grad_regularizer) e.regularizer_term = in.model->grad_regularizer();
  e.sample_count = static_cast<int>(in.batch->size());
  e.assemble();
  return e;
}

HypergradientEstimate hpgd_gradient_cmdp(const CmdpBatchInputs& in, bool strict_revisits) {
  check_cmdp_inputs(in);
  if (!in.benefit_table || !in.v_l || !in.v_f || in.beta <= 0.0) {
    throw ConfigurationError("hpgd_gradient_cmdp: benefit, V_L, V_F and beta required");
  }
  const auto& source = in.segment_source ? *in.segment_source : *in.batch;
  const auto tables = follower_grad_tables(source, *in.model, *in.v_f);

  if (strict_revisits) {
    for (const auto& traj : *in.batch) {
      for (const auto& step : traj.steps) {
        if (tables.actions_seen[step.state].size() < 2) {
          throw MissingDataError(
              "hpgd_gradient: state visited with a single distinct follower action; the "
              "advantage-gradient difference needs revisits with diverse actions");
        }
      }
    }
  }

  HypergradientEstimate e = HypergradientEstimate::zero(in.model->dim());
  e.partial_term = partial_core(*in.batch, *in.model, *in.v_l);
  e.guiding_term =
      guided_accumulate(*in.batch, *in.model, *in.benefit_table, tables, true, in.beta);
  if (in.model->grad_regularizer) e.regularizer_term = in.model->grad_regularizer();
  e.sample_count = static_cast<int>(in.batch->size());
  e.assemble();
  return e;
}

HypergradientEstimate sobirl_gradient_cmdp(const CmdpBatchInputs& in) {
  check_cmdp_inputs(in);
  if (!in.q_l || !in.v_l || !in.best_response || in.beta <= 0.0) {
    throw ConfigurationError("sobirl_gradient_cmdp: Q_L, V_L, best response and beta required");
  }
  if (!in.model->theta_free_transitions()) {
    throw ConfigurationError(
        "sobirl_gradient_cmdp: one-step truncation is infeasible when transitions depend on "
        "the leader configuration");
  }
  const TabularCmdp& model = *in.model;
  const int d = model.dim();

  // E_{b~g}[grad r_F(s, b)] per state
  std::vector<Eigen::VectorXd> expected_grad(model.n_states, zero_vec(d));
  if (model.grad_reward_follower) {
    for (int s = 0; s < model.n_states; ++s) {
      for (int b = 0; b < model.n_actions; ++b) {
        expected_grad[s] += in.best_response->probs(s, b) * model.grad_reward_follower(s, b);
      }
    }
  }

  HypergradientEstimate e = HypergradientEstimate::zero(d);
  e.partial_term = partial_core(*in.batch, model, *in.v_l);
  Eigen::VectorXd guiding = zero_vec(d);
  for (const auto& traj : *in.batch) {
    const auto& first = traj.steps.front();
    const double q0 = (*in.q_l)(first.state, first.follower_action);
    Eigen::VectorXd inner = zero_vec(d);
    for (const auto& step : traj.steps) {
      if (model.grad_reward_follower) {
        inner += model.grad_reward_follower(step.state, step.follower_action);
      }
      inner -= expected_grad[step.state];
    }
    guiding += q0 * inner;
  }
  e.guiding_term = guiding / (in.beta * static_cast<double>(in.batch->size()));
  if (model.grad_regularizer) e.regularizer_term = model.grad_regularizer();
  e.sample_count = static_cast<int>(in.batch->size());
  e.assemble();
  return e;
}

// ---------------------------------------------------------------------------
// Markov games
// ---------------------------------------------------------------------------

Eigen::VectorXd follower_q_grad_mg_segment(const DiscreteTrajectory& traj, int start,
                                           const LeaderScoreFn& score,
                                           const Eigen::MatrixXd& v_f, double gamma_f) {
  Eigen::VectorXd acc;
  double w = 1.0;
  for (int t = start; t < traj.horizon(); ++t) {
    const auto& step = traj.steps[t];
    const Eigen::VectorXd s = score(step.state, step.leader_action);
    if (acc.size() == 0) acc = Eigen::VectorXd::Zero(s.size());
    acc += w * v_f(step.state, step.leader_action) * s;
    w *= gamma_f;
  }
  return acc;
}

Eigen::VectorXd follower_q_grad_mg(const std::vector<Segment>& segments,
                                   const LeaderScoreFn& score, const Eigen::MatrixXd& v_f,
                                   double gamma_f) {
  if (segments.empty()) throw MissingDataError("follower_q_grad_mg: empty segment set");
  Eigen::VectorXd acc;
  for (const auto& seg : segments) {
    Eigen::VectorXd w = follower_q_grad_mg_segment(*seg.traj, seg.start, score, v_f, gamma_f);
    if (acc.size() == 0) acc = Eigen::VectorXd::Zero(w.size());
    acc += w;
  }
  return acc / static_cast<double>(segments.size());
}

Eigen::VectorXd partial_derivative_mg(const MgGradientSamples& samples) {
  if (samples.q_l.empty()) throw ConfigurationError("partial_derivative_mg: empty sample set");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(samples.dim);
  for (size_t j = 0; j < samples.q_l.size(); ++j) acc += samples.q_l[j] * samples.score[j];
  return acc / static_cast<double>(samples.q_l.size());
}

HypergradientEstimate bchg_hypergradient_mg(const MgGradientSamples& samples) {
  if (samples.beta <= 0.0) throw ConfigurationError("bchg_hypergradient_mg: beta required");
  HypergradientEstimate e = HypergradientEstimate::zero(samples.dim);
  e.partial_term = partial_derivative_mg(samples);
  Eigen::VectorXd guiding = Eigen::VectorXd::Zero(samples.dim);
  for (size_t j = 0; j < samples.q_l.size(); ++j) {
    guiding += std::pow(samples.gamma_l, samples.time_index[j]) * samples.benefit_values[j] *
               samples.q_f_grad[j];
  }
  e.guiding_term = guiding / (samples.beta * static_cast<double>(samples.q_l.size()));
  if (samples.grad_regularizer) e.regularizer_term = *samples.grad_regularizer;
  e.sample_count = static_cast<int>(samples.q_l.size());
  e.assemble();
  return e;
}

HypergradientEstimate naive_pgd_gradient_mg(const MgGradientSamples& samples) {
  HypergradientEstimate e = HypergradientEstimate::zero(samples.dim);
  e.partial_term = partial_derivative_mg(samples);
  if (samples.grad_regularizer) e.regularizer_term = *samples.grad_regularizer;
  e.sample_count = static_cast<int>(samples.q_l.size());
  e.assemble();
  return e;
}

double biac_target(double reward, int s_next,
                   const std::function<double(int s, int a, int b)>& q_l,
                   const ConditionedTabularPolicy& best_response, double gamma_l) {
  const int n_a = best_response.n_leader_actions;
  const int n_b = static_cast<int>(best_response.probs.cols());
  int best_a = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  int best_b_for_a = 0;
  for (int a = 0; a < n_a; ++a) {
    // follower argmax over best-response probabilities at (s', a)
    int b_star = 0;
    double p_star = -1.0;
    for (int b = 0; b < n_b; ++b) {
      const double p = best_response.prob(s_next, a, b);
      if (p > p_star) {
        p_star = p;
        b_star = b;
      }
    }
    const double q = q_l(s_next, a, b_star);
    if (q > best_q) {
      best_q = q;
      best_a = a;
      best_b_for_a = b_star;
    }
  }
  return reward + gamma_l * q_l(s_next, best_a, best_b_for_a);
}

// ---------------------------------------------------------------------------
// Exact oracles
// ---------------------------------------------------------------------------

namespace {

constexpr long kEnumerationLimit = 1000;

std::vector<Eigen::VectorXd> exact_q_f_grad_cmdp(const TabularCmdp& model,
                                                 const SoftValues& soft,
                                                 const TabularPolicy& g, double tol) {
  const int ns = model.n_states;
  const int na = model.n_actions;
  const int d = model.dim();
  std::vector<Eigen::VectorXd> grad(static_cast<size_t>(ns) * na, zero_vec(d));

  // Fixed-point of the linearized soft-Bellman gradient recursion; contraction
  // modulus gamma_F.
  const double gamma = model.gamma_follower;
  std::vector<Eigen::VectorXd> base(static_cast<size_t>(ns) * na, zero_vec(d));
  for (int s = 0; s < ns; ++s) {
    for (int b = 0; b < na; ++b) {
      Eigen::VectorXd term = zero_vec(d);
      if (model.grad_reward_follower) term += model.grad_reward_follower(s, b);
      if (model.grad_log_transition) {
        for (int sn = 0; sn < ns; ++sn) {
          const double p = model.transition[b](s, sn);
          if (p == 0.0) continue;
          term += gamma * p * soft.v[sn] * model.grad_log_transition(s, b, sn);
        }
      }
      base[s * na + b] = term;
    }
  }
  const int max_sweeps = 100000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    // state means under the best response
    std::vector<Eigen::VectorXd> mean(ns, zero_vec(d));
    for (int s = 0; s < ns; ++s) {
      for (int b = 0; b < na; ++b) mean[s] += g.probs(s, b) * grad[s * na + b];
    }
    double change = 0.0;
    for (int s = 0; s < ns; ++s) {
      for (int b = 0; b < na; ++b) {
        Eigen::VectorXd next = base[s * na + b];
        for (int sn = 0; sn < ns; ++sn) {
          const double p = model.transition[b](s, sn);
          if (p == 0.0) continue;
          next += gamma * p * mean[sn];
        }
        change = std::max(change, (next - grad[s * na + b]).cwiseAbs().maxCoeff());
        grad[s * na + b] = next;
      }
    }
    if (change <= tol) break;
  }
  return grad;
}

}  // namespace

ExactCmdpSolution exact_cmdp_solution(const TabularCmdp& model, double beta, double solve_tol) {
  if (static_cast<long>(model.n_states) * model.n_actions > kEnumerationLimit) {
    throw ConfigurationError("exact_cmdp_solution: table too large for exact enumeration");
  }
  ExactCmdpSolution sol;
  sol.soft = soft_value_iteration(model, beta, solve_tol);
  sol.best_response = boltzmann_policy(sol.soft);
  sol.leader_values =
      exact_policy_evaluation(model, sol.best_response, RewardSelector::kLeader,
                              model.gamma_leader);
  sol.benefit_table = benefit(sol.leader_values.q, sol.leader_values.v);
  sol.visitation = discounted_visitation(model, sol.best_response, model.gamma_leader);
  sol.q_f_grad = exact_q_f_grad_cmdp(model, sol.soft, sol.best_response, solve_tol);
  sol.v_f_grad.assign(model.n_states, zero_vec(model.dim()));
  for (int s = 0; s < model.n_states; ++s) {
    for (int b = 0; b < model.n_actions; ++b) {
      sol.v_f_grad[s] += sol.best_response.probs(s, b) * sol.q_f_grad[s * model.n_actions + b];
    }
  }
  return sol;
}

Eigen::VectorXd exact_guiding_term_cmdp(const TabularCmdp& model, const ExactCmdpSolution& sol,
                                        GuidingForm form) {
  const int d = model.dim();
  const double beta = sol.soft.beta;
  Eigen::VectorXd acc = zero_vec(d);
  for (int s = 0; s < model.n_states; ++s) {
    const double occupancy = sol.visitation.weights[s] / (1.0 - model.gamma_leader);
    for (int b = 0; b < model.n_actions; ++b) {
      const double mu = occupancy * sol.best_response.probs(s, b);
      if (mu == 0.0) continue;
      if (form == GuidingForm::kCovariance) {
        acc += mu * (sol.benefit_table(s, b) / beta) * sol.q_f_grad[s * model.n_actions + b];
      } else {
        acc += mu * (sol.leader_values.q(s, b) / beta) *
               (sol.q_f_grad[s * model.n_actions + b] - sol.v_f_grad[s]);
      }
    }
  }
  return acc;
}

HypergradientEstimate exact_hypergradient_cmdp(const TabularCmdp& model, double beta,
                                               double solve_tol) {
  const ExactCmdpSolution sol = exact_cmdp_solution(model, beta, solve_tol);
  const int d = model.dim();
  HypergradientEstimate e = HypergradientEstimate::zero(d);

  // Direct-effect terms under the exact discounted occupancy.
  Eigen::VectorXd partial = zero_vec(d);
  for (int s = 0; s < model.n_states; ++s) {
    const double occupancy = sol.visitation.weights[s] / (1.0 - model.gamma_leader);
    for (int b = 0; b < model.n_actions; ++b) {
      const double mu = occupancy * sol.best_response.probs(s, b);
      if (mu == 0.0) continue;
      if (model.grad_reward_leader) partial += mu * model.grad_reward_leader(s, b);
      if (model.grad_log_transition) {
        for (int sn = 0; sn < model.n_states; ++sn) {
          const double p = model.transition[b](s, sn);
          if (p == 0.0) continue;
          partial += model.gamma_leader * mu * p * sol.leader_values.v[sn] *
                     model.grad_log_transition(s, b, sn);
        }
      }
    }
  }
  if (model.grad_log_initial) {
    for (int s = 0; s < model.n_states; ++s) {
      if (model.initial[s] == 0.0) continue;
      partial += model.initial[s] * sol.leader_values.v[s] * model.grad_log_initial(s);
    }
  }
  e.partial_term = partial;
  e.guiding_term = exact_guiding_term_cmdp(model, sol, GuidingForm::kCovariance);
  if (model.grad_regularizer) e.regularizer_term = model.grad_regularizer();
  e.assemble();
  return e;
}

double exact_leader_objective(const TabularCmdp& model, double beta, double solve_tol) {
  const SoftValues soft = soft_value_iteration(model, beta, solve_tol);
  const TabularPolicy g = boltzmann_policy(soft);
  const PolicyValues values =
      exact_policy_evaluation(model, g, RewardSelector::kLeader, model.gamma_leader);
  double objective = model.initial.dot(values.v);
  if (model.regularizer) objective += model.regularizer();
  return objective;
}

namespace {

std::vector<Eigen::VectorXd> exact_q_f_grad_mg(const TabularMarkovGame& game,
                                               const TabularPolicy& f,
                                               const ConditionedTabularPolicy& g,
                                               const SoftmaxTabularLeader& leader,
                                               const Eigen::MatrixXd& v_f, double tol) {
  const int d = leader.dim();
  const double gamma = game.gamma_follower;
  std::vector<Eigen::VectorXd> w(game.n_sab(), zero_vec(d));
  std::vector<Eigen::VectorXd> scores(game.n_states * game.n_leader_actions);
  for (int s = 0; s < game.n_states; ++s)
    for (int a = 0; a < game.n_leader_actions; ++a) scores[game.sbar(s, a)] = leader.score(s, a);

  const int max_sweeps = 100000;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    // next-state mean over (a', b') of W
    std::vector<Eigen::VectorXd> mean(game.n_states, zero_vec(d));
    for (int s = 0; s < game.n_states; ++s) {
      for (int a = 0; a < game.n_leader_actions; ++a) {
        const double fa = f.probs(s, a);
        if (fa == 0.0) continue;
        for (int b = 0; b < game.n_follower_actions; ++b) {
          mean[s] += fa * g.prob(s, a, b) * w[game.idx(s, a, b)];
        }
      }
    }
    double change = 0.0;
    for (int s = 0; s < game.n_states; ++s) {
      for (int a = 0; a < game.n_leader_actions; ++a) {
        for (int b = 0; b < game.n_follower_actions; ++b) {
          const int sab = game.idx(s, a, b);
          Eigen::VectorXd next = v_f(s, a) * scores[game.sbar(s, a)];
          const auto& row = game.transition[sab];
          for (int sn = 0; sn < game.n_states; ++sn) {
            if (row[sn] == 0.0) continue;
            next += gamma * row[sn] * mean[sn];
          }
          change = std::max(change, (next - w[sab]).cwiseAbs().maxCoeff());
          w[sab] = next;
        }
      }
    }
    if (change <= tol) break;
  }
  return w;
}

}  // namespace

ExactMgSolution exact_mg_solution(const TabularMarkovGame& game,
                                  const SoftmaxTabularLeader& leader, double beta,
                                  double solve_tol) {
  if (static_cast<long>(game.n_sab()) > kEnumerationLimit) {
    throw ConfigurationError("exact_mg_solution: table too large for exact enumeration");
  }
  ExactMgSolution sol;
  const TabularPolicy f = leader.policy();
  sol.soft = soft_q_iteration(game, f, beta, solve_tol);
  sol.best_response = boltzmann_policy(sol.soft);
  sol.leader_values = exact_policy_evaluation(game, f, sol.best_response,
                                              RewardSelector::kLeader, game.gamma_leader);
  sol.benefit_values.resize(game.n_sab());
  for (int s = 0; s < game.n_states; ++s) {
    for (int a = 0; a < game.n_leader_actions; ++a) {
      double v_sa = 0.0;
      for (int b = 0; b < game.n_follower_actions; ++b) {
        v_sa += sol.best_response.prob(s, a, b) * sol.leader_values.q[game.idx(s, a, b)];
      }
      for (int b = 0; b < game.n_follower_actions; ++b) {
        sol.benefit_values[game.idx(s, a, b)] = sol.leader_values.q[game.idx(s, a, b)] - v_sa;
      }
    }
  }
  sol.visitation = discounted_visitation(game, f, sol.best_response, game.gamma_leader);
  sol.q_f_grad = exact_q_f_grad_mg(game, f, sol.best_response, leader, sol.soft.v, solve_tol);
  sol.q_f_grad_pointwise.resize(game.n_sab());
  for (int s = 0; s < game.n_states; ++s) {
    for (int a = 0; a < game.n_leader_actions; ++a) {
      const Eigen::VectorXd correction = sol.soft.v(s, a) * leader.score(s, a);
      for (int b = 0; b < game.n_follower_actions; ++b) {
        const int sab = game.idx(s, a, b);
        sol.q_f_grad_pointwise[sab] = sol.q_f_grad[sab] - correction;
      }
    }
  }
  return sol;
}

Eigen::VectorXd exact_guiding_term_mg(const TabularMarkovGame& game, const ExactMgSolution& sol,
                                      const SoftmaxTabularLeader& leader, bool t0_inclusive) {
  const TabularPolicy f = leader.policy();
  Eigen::VectorXd acc = zero_vec(leader.dim());
  const auto& grads = t0_inclusive ? sol.q_f_grad : sol.q_f_grad_pointwise;
  for (int s = 0; s < game.n_states; ++s) {
    const double occupancy = sol.visitation.weights[s] / (1.0 - game.gamma_leader);
    for (int a = 0; a < game.n_leader_actions; ++a) {
      for (int b = 0; b < game.n_follower_actions; ++b) {
        const double mu = occupancy * f.probs(s, a) * sol.best_response.prob(s, a, b);
        if (mu == 0.0) continue;
        const int sab = game.idx(s, a, b);
        acc += mu * (sol.benefit_values[sab] / sol.soft.beta) * grads[sab];
      }
    }
  }
  return acc;
}

HypergradientEstimate exact_hypergradient_mg(const TabularMarkovGame& game,
                                             const SoftmaxTabularLeader& leader, double beta,
                                             double solve_tol) {
  const ExactMgSolution sol = exact_mg_solution(game, leader, beta, solve_tol);
  const TabularPolicy f = leader.policy();
  HypergradientEstimate e = HypergradientEstimate::zero(leader.dim());
  Eigen::VectorXd partial = zero_vec(leader.dim());
  for (int s = 0; s < game.n_states; ++s) {
    const double occupancy = sol.visitation.weights[s] / (1.0 - game.gamma_leader);
    for (int a = 0; a < game.n_leader_actions; ++a) {
      const Eigen::VectorXd score = leader.score(s, a);
      for (int b = 0; b < game.n_follower_actions; ++b) {
        const double mu = occupancy * f.probs(s, a) * sol.best_response.prob(s, a, b);
        if (mu == 0.0) continue;
        partial += mu * sol.leader_values.q[game.idx(s, a, b)] * score;
      }
    }
  }
  e.partial_term = partial;
  e.guiding_term = exact_guiding_term_mg(game, sol, leader, /*t0_inclusive=*/true);
  e.assemble();
  return e;
}

double exact_leader_objective_mg(const TabularMarkovGame& game,
                                 const SoftmaxTabularLeader& leader, double beta,
                                 double solve_tol) {
  const TabularPolicy f = leader.policy();
  const MgSoftValues soft = soft_q_iteration(game, f, beta, solve_tol);
  const ConditionedTabularPolicy g = boltzmann_policy(soft);
  const MgPolicyValues values =
      exact_policy_evaluation(game, f, g, RewardSelector::kLeader, game.gamma_leader);
  double objective = 0.0;
  for (int s = 0; s < game.n_states; ++s) {
    if (game.initial[s] == 0.0) continue;
    objective += game.initial[s] * f.probs.row(s).dot(values.v.row(s));
  }
  return objective;
}

// ---------------------------------------------------------------------------
// Continuous-state configurable MDPs
// ---------------------------------------------------------------------------

namespace {

// Backward recursion of the per-occurrence follower-Q-gradient suffixes.
std::vector<Eigen::VectorXd> continuous_suffixes(const ContinuousCmdpBatch& batch, size_t i) {
  const int horizon = static_cast<int>(batch.score_p[i].size());
  std::vector<Eigen::VectorXd> w(horizon);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(batch.dim);
  for (int t = horizon - 1; t >= 0; --t) {
    Eigen::VectorXd term = batch.gamma_f * batch.v_f_next[i][t] * batch.score_p[i][t];
    if (!batch.grad_r_f.empty()) term += batch.grad_r_f[i][t];
    acc = term + batch.gamma_f * acc;
    w[t] = acc;
  }
  return w;
}

Eigen::VectorXd continuous_partial(const ContinuousCmdpBatch& batch) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(batch.dim);
  for (size_t i = 0; i < batch.grad_r_l.size(); ++i) {
    double w = 1.0;
    const int horizon = static_cast<int>(batch.grad_r_l[i].size());
    for (int t = 0; t < horizon; ++t) {
      acc += w * batch.grad_r_l[i][t];
      // transition score enters one step late: V_L(s_t) grad log p(s_t | s_{t-1}, b_{t-1})
      if (t >= 1) acc += w * batch.v_l[i][t] * batch.score_p[i][t - 1];
      w *= batch.gamma_l;
    }
  }
  return acc / static_cast<double>(batch.grad_r_l.size());
}

}  // namespace

HypergradientEstimate bchg_hypergradient_continuous(const ContinuousCmdpBatch& batch) {
  if (batch.q_l.empty()) throw ConfigurationError("bchg_hypergradient_continuous: empty batch");
  HypergradientEstimate e = HypergradientEstimate::zero(batch.dim);
  e.partial_term = continuous_partial(batch);
  Eigen::VectorXd guiding = Eigen::VectorXd::Zero(batch.dim);
  for (size_t i = 0; i < batch.q_l.size(); ++i) {
    const auto suffixes = continuous_suffixes(batch, i);
    double w = 1.0;
    for (size_t t = 0; t < suffixes.size(); ++t) {
      guiding += w * (batch.q_l[i][t] - batch.v_l[i][t]) * suffixes[t];
      w *= batch.gamma_l;
    }
  }
  e.guiding_term = guiding / (batch.beta * static_cast<double>(batch.q_l.size()));
  if (batch.grad_regularizer) e.regularizer_term = *batch.grad_regularizer;
  e.sample_count = static_cast<int>(batch.q_l.size());
  e.assemble();
  return e;
}

HypergradientEstimate naive_pgd_gradient_continuous(const ContinuousCmdpBatch& batch) {
  if (batch.grad_r_l.empty()) {
    throw ConfigurationError("naive_pgd_gradient_continuous: empty batch");
  }
  HypergradientEstimate e = HypergradientEstimate::zero(batch.dim);
  e.partial_term = continuous_partial(batch);
  if (batch.grad_regularizer) e.regularizer_term = *batch.grad_regularizer;
  e.sample_count = static_cast<int>(batch.grad_r_l.size());
  e.assemble();
  return e;
}

HypergradientEstimate hpgd_td_gradient_continuous(
    const ContinuousCmdpBatch& batch,
    const std::vector<std::vector<Eigen::VectorXd>>& v_f_grad_pred) {
  if (batch.q_l.empty()) throw ConfigurationError("hpgd_td_gradient_continuous: empty batch");
  HypergradientEstimate e = HypergradientEstimate::zero(batch.dim);
  e.partial_term = continuous_partial(batch);
  Eigen::VectorXd guiding = Eigen::VectorXd::Zero(batch.dim);
  for (size_t i = 0; i < batch.q_l.size(); ++i) {
    const auto suffixes = continuous_suffixes(batch, i);
    double w = 1.0;
    for (size_t t = 0; t < suffixes.size(); ++t) {
      guiding +=
          w * (batch.q_l[i][t] - batch.v_l[i][t]) * (suffixes[t] - v_f_grad_pred[i][t]);
      w *= batch.gamma_l;
    }
  }
  e.guiding_term = guiding / (batch.beta * static_cast<double>(batch.q_l.size()));
  if (batch.grad_regularizer) e.regularizer_term = *batch.grad_regularizer;
  e.sample_count = static_cast<int>(batch.q_l.size());
  e.assemble();
  return e;
}

}  // namespace bchg
