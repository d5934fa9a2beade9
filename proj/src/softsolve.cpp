#include "bchg/softsolve.hpp"

#include <cmath>

#include "bchg/errors.hpp"

namespace bchg {
namespace {

// beta * log sum_j exp(row_j / beta), max-subtracted; safe for beta down to 1e-3.
double soft_max_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, double beta) {
  const double m = row.maxCoeff();
  double acc = 0.0;
  for (int j = 0; j < row.size(); ++j) acc += std::exp((row[j] - m) / beta);
  return m + beta * std::log(acc);
}

}  // namespace

SoftValues soft_value_iteration(const TabularCmdp& model, double beta, double tol,
                                int max_sweeps, const Eigen::MatrixXd* warm_start) {
  if (beta <= 0.0) throw DomainError("soft_value_iteration: beta must be positive");
  if (model.gamma_follower >= 1.0) {
    throw DomainError("soft_value_iteration: gamma_F must be < 1");
  }
  const int ns = model.n_states;
  const int na = model.n_actions;
  SoftValues out;
  out.beta = beta;
  out.q = warm_start ? *warm_start : Eigen::MatrixXd::Zero(ns, na);
  Eigen::VectorXd v(ns);
  const double gamma = model.gamma_follower;

  double residual = 0.0;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    for (int s = 0; s < ns; ++s) v[s] = soft_max_row(out.q.row(s), beta);
    residual = 0.0;
    for (int b = 0; b < na; ++b) {
      Eigen::VectorXd next = model.reward_follower.col(b) + gamma * (model.transition[b] * v);
      residual = std::max(residual, (next - out.q.col(b)).cwiseAbs().maxCoeff());
      out.q.col(b) = next;
    }
    if (residual <= tol) break;
  }
  if (residual > tol) {
    throw IterationLimitError("soft_value_iteration: no convergence within max_sweeps",
                              residual);
  }
  out.v.resize(ns);
  for (int s = 0; s < ns; ++s) out.v[s] = soft_max_row(out.q.row(s), beta);
  out.residual = residual;
  out.sweeps = sweep + 1;
  return out;
}

SoftValues soft_value_iteration(const TabularCmdp& model, double beta, double tol,
                                int max_sweeps, const Eigen::MatrixXd& warm_start) {
  return soft_value_iteration(model, beta, tol, max_sweeps, &warm_start);
}

MgSoftValues soft_q_iteration(const TabularMarkovGame& game, const TabularPolicy& leader,
                              double beta, double tol, int max_sweeps,
                              const Eigen::VectorXd* warm_start) {
  if (beta <= 0.0) throw DomainError("soft_q_iteration: beta must be positive");
  if (game.gamma_follower >= 1.0) throw DomainError("soft_q_iteration: gamma_F must be < 1");
  MgSoftValues out;
  out.n_states = game.n_states;
  out.n_leader_actions = game.n_leader_actions;
  out.n_follower_actions = game.n_follower_actions;
  out.beta = beta;
  out.q = warm_start ? *warm_start : Eigen::VectorXd::Zero(game.n_sab());
  out.v.resize(game.n_states, game.n_leader_actions);
  const double gamma = game.gamma_follower;

  double residual = 0.0;
  int sweep = 0;
  Eigen::VectorXd q_next(game.n_sab());
  for (; sweep < max_sweeps; ++sweep) {
    for (int s = 0; s < game.n_states; ++s) {
      for (int a = 0; a < game.n_leader_actions; ++a) {
        Eigen::RowVectorXd row(game.n_follower_actions);
        for (int b = 0; b < game.n_follower_actions; ++b) row[b] = out.q[game.idx(s, a, b)];
        out.v(s, a) = soft_max_row(row, beta);
      }
    }
    residual = 0.0;
    for (int s = 0; s < game.n_states; ++s) {
      for (int a = 0; a < game.n_leader_actions; ++a) {
        for (int b = 0; b < game.n_follower_actions; ++b) {
          const int sab = game.idx(s, a, b);
          double next_v = 0.0;
          for (int sn = 0; sn < game.n_states; ++sn) {
            const double p = game.transition[sab][sn];
            if (p == 0.0) continue;
            next_v += p * leader.probs.row(sn).dot(out.v.row(sn));
          }
          q_next[sab] = game.reward_follower[sab] + gamma * next_v;
          residual = std::max(residual, std::abs(q_next[sab] - out.q[sab]));
        }
      }
    }
    out.q = q_next;
    if (residual <= tol) break;
  }
  if (residual > tol) {
    throw IterationLimitError("soft_q_iteration: no convergence within max_sweeps", residual);
  }
  for (int s = 0; s < game.n_states; ++s) {
    for (int a = 0; a < game.n_leader_actions; ++a) {
      Eigen::RowVectorXd row(game.n_follower_actions);
      for (int b = 0; b < game.n_follower_actions; ++b) row[b] = out.q[game.idx(s, a, b)];
      out.v(s, a) = soft_max_row(row, beta);
    }
  }
  out.residual = residual;
  out.sweeps = sweep + 1;
  return out;
}

namespace {

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& q, double beta) {
  Eigen::RowVectorXd z = ((q.array() - q.maxCoeff()) / beta).exp();
  return z / z.sum();
}

}  // namespace

TabularPolicy boltzmann_policy(const SoftValues& values) {
  TabularPolicy pi;
  pi.probs.resize(values.q.rows(), values.q.cols());
  for (int s = 0; s < values.q.rows(); ++s) {
    pi.probs.row(s) = softmax_row(values.q.row(s), values.beta);
  }
  return pi;
}

ConditionedTabularPolicy boltzmann_policy(const MgSoftValues& values) {
  ConditionedTabularPolicy g;
  g.n_states = values.n_states;
  g.n_leader_actions = values.n_leader_actions;
  g.probs.resize(values.n_states * values.n_leader_actions, values.n_follower_actions);
  for (int s = 0; s < values.n_states; ++s) {
    for (int a = 0; a < values.n_leader_actions; ++a) {
      Eigen::RowVectorXd row(values.n_follower_actions);
      for (int b = 0; b < values.n_follower_actions; ++b) row[b] = values.q[values.idx(s, a, b)];
      g.probs.row(s * values.n_leader_actions + a) = softmax_row(row, values.beta);
    }
  }
  return g;
}

}  // namespace bchg
