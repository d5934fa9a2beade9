#include "bchg/exact_eval.hpp"

#include <Eigen/LU>

#include "bchg/errors.hpp"

namespace bchg {
namespace {

constexpr long kDirectSolveLimit = 10000;  // n_states * n_actions
constexpr double kSweepResidual = 1e-12;

Eigen::MatrixXd state_kernel(const TabularCmdp& model, const TabularPolicy& pi) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(model.n_states, model.n_states);
  for (int b = 0; b < model.n_actions; ++b) {
    p += pi.probs.col(b).asDiagonal() * model.transition[b];
  }
  return p;
}

Eigen::VectorXd solve_values(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& reward,
                             double gamma, long table_size) {
  const long n = kernel.rows();
  if (table_size <= kDirectSolveLimit) {
    return (Eigen::MatrixXd::Identity(n, n) - gamma * kernel).partialPivLu().solve(reward);
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  for (int sweep = 0; sweep < 10000000; ++sweep) {
    Eigen::VectorXd next = reward + gamma * (kernel * v);
    const double residual = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (residual <= kSweepResidual) break;
  }
  return v;
}

}  // namespace

PolicyValues exact_policy_evaluation(const TabularCmdp& model, const TabularPolicy& follower,
                                     RewardSelector selector, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw DomainError("exact_policy_evaluation: gamma must lie in [0, 1)");
  }
  const Eigen::MatrixXd& reward =
      selector == RewardSelector::kLeader ? model.reward_leader : model.reward_follower;
  const Eigen::MatrixXd kernel = state_kernel(model, follower);
  const Eigen::VectorXd r_pi = (reward.array() * follower.probs.array()).rowwise().sum();
  PolicyValues out;
  out.v = solve_values(kernel, r_pi, gamma,
                       static_cast<long>(model.n_states) * model.n_actions);
  out.q.resize(model.n_states, model.n_actions);
  for (int b = 0; b < model.n_actions; ++b) {
    out.q.col(b) = reward.col(b) + gamma * (model.transition[b] * out.v);
  }
  return out;
}

MgPolicyValues exact_policy_evaluation(const TabularMarkovGame& game,
                                       const TabularPolicy& leader,
                                       const ConditionedTabularPolicy& follower,
                                       RewardSelector selector, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw DomainError("exact_policy_evaluation: gamma must lie in [0, 1)");
  }
  const Eigen::VectorXd& reward =
      selector == RewardSelector::kLeader ? game.reward_leader : game.reward_follower;
  const int n_sa = game.n_states * game.n_leader_actions;

  // V(s,a) = sum_b g(b|s,a) [ r(s,a,b) + gamma sum_s' p(s'|s,a,b) sum_a' f(a'|s') V(s',a') ]
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(n_sa, n_sa);
  Eigen::VectorXd r_bar = Eigen::VectorXd::Zero(n_sa);
  for (int s = 0; s < game.n_states; ++s) {
    for (int a = 0; a < game.n_leader_actions; ++a) {
      const int row = game.sbar(s, a);
      for (int b = 0; b < game.n_follower_actions; ++b) {
        const double gb = follower.prob(s, a, b);
        const int sab = game.idx(s, a, b);
        r_bar[row] += gb * reward[sab];
        for (int sn = 0; sn < game.n_states; ++sn) {
          const double p = game.transition[sab][sn];
          if (p == 0.0) continue;
          for (int an = 0; an < game.n_leader_actions; ++an) {
            kernel(row, game.sbar(sn, an)) += gb * p * leader.probs(sn, an);
          }
        }
      }
    }
  }
  MgPolicyValues out;
  const Eigen::VectorXd v_flat = solve_values(kernel, r_bar, gamma, game.n_sab());
  out.v.resize(game.n_states, game.n_leader_actions);
  for (int s = 0; s < game.n_states; ++s)
    for (int a = 0; a < game.n_leader_actions; ++a) out.v(s, a) = v_flat[game.sbar(s, a)];

  out.q.resize(game.n_sab());
  for (int s = 0; s < game.n_states; ++s) {
    for (int a = 0; a < game.n_leader_actions; ++a) {
      for (int b = 0; b < game.n_follower_actions; ++b) {
        const int sab = game.idx(s, a, b);
        double next = 0.0;
        for (int sn = 0; sn < game.n_states; ++sn) {
          const double p = game.transition[sab][sn];
          if (p == 0.0) continue;
          next += p * leader.probs.row(sn).dot(out.v.row(sn));
        }
        out.q[sab] = reward[sab] + gamma * next;
      }
    }
  }
  return out;
}

namespace {

VisitationDistribution visitation_from_kernel(const Eigen::MatrixXd& kernel,
                                              const Eigen::VectorXd& rho0, double gamma) {
  // d = (1-gamma) rho0 + gamma P^T d
  const long n = kernel.rows();
  VisitationDistribution out;
  out.gamma = gamma;
  out.weights = (Eigen::MatrixXd::Identity(n, n) - gamma * kernel.transpose())
                    .partialPivLu()
                    .solve(((1.0 - gamma) * rho0).eval());
  return out;
}

}  // namespace

VisitationDistribution discounted_visitation(const TabularCmdp& model,
                                             const TabularPolicy& follower, double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw DomainError("discounted_visitation: gamma must lie in [0, 1)");
  }
  return visitation_from_kernel(state_kernel(model, follower), model.initial, gamma);
}

VisitationDistribution discounted_visitation(const TabularMarkovGame& game,
                                             const TabularPolicy& leader,
                                             const ConditionedTabularPolicy& follower,
                                             double gamma) {
  if (gamma < 0.0 || gamma >= 1.0) {
    throw DomainError("discounted_visitation: gamma must lie in [0, 1)");
  }
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(game.n_states, game.n_states);
  for (int s = 0; s < game.n_states; ++s) {
    for (int a = 0; a < game.n_leader_actions; ++a) {
      for (int b = 0; b < game.n_follower_actions; ++b) {
        kernel.row(s) += leader.probs(s, a) * follower.prob(s, a, b) *
                         game.transition[game.idx(s, a, b)].transpose();
      }
    }
  }
  return visitation_from_kernel(kernel, game.initial, gamma);
}

VisitationDistribution discounted_visitation_from(const TabularCmdp& model,
                                                  const TabularPolicy& follower, double gamma,
                                                  int s0, int b0) {
  if (gamma <= 0.0 || gamma >= 1.0) {
    throw DomainError("discounted_visitation_from: gamma must lie in (0, 1)");
  }
  const Eigen::MatrixXd kernel = state_kernel(model, follower);
  // rho_1 = p(.|s0,b0); d = (1-gamma)/gamma * sum_{t>=1} gamma^t rho_t, then
  // normalized by the total mass gamma/(gamma) -> divide by gamma overall.
  const Eigen::VectorXd rho1 = model.transition[b0].row(s0).transpose();
  const long n = kernel.rows();
  VisitationDistribution out;
  out.gamma = gamma;
  out.weights = (Eigen::MatrixXd::Identity(n, n) - gamma * kernel.transpose())
                    .partialPivLu()
                    .solve(((1.0 - gamma) * rho1).eval());
  out.weights /= out.weights.sum();
  return out;
}

}  // namespace bchg
