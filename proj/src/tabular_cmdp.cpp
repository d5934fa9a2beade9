#include "bchg/tabular_cmdp.hpp"

#include <cmath>
#include <memory>

#include "bchg/errors.hpp"
#include "bchg/rng.hpp"

namespace bchg {

void TabularCmdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) {
    throw ConfigurationError("TabularCmdp: empty state or action space");
  }
  if (static_cast<int>(transition.size()) != n_actions) {
    throw ConfigurationError("TabularCmdp: one transition matrix per action required");
  }
  for (const auto& t : transition) {
    if (t.rows() != n_states || t.cols() != n_states) {
      throw ConfigurationError("TabularCmdp: transition matrix shape mismatch");
    }
    for (int s = 0; s < n_states; ++s) {
      if (std::abs(t.row(s).sum() - 1.0) > 1e-9 || t.row(s).minCoeff() < -1e-12) {
        throw ConfigurationError("TabularCmdp: transition row is not a distribution");
      }
    }
  }
  if (initial.size() != n_states || std::abs(initial.sum() - 1.0) > 1e-9 ||
      initial.minCoeff() < -1e-12) {
    throw ConfigurationError("TabularCmdp: initial distribution invalid");
  }
  if (reward_follower.rows() != n_states || reward_follower.cols() != n_actions ||
      reward_leader.rows() != n_states || reward_leader.cols() != n_actions) {
    throw ConfigurationError("TabularCmdp: reward table shape mismatch");
  }
  if (!reward_follower.allFinite() || !reward_leader.allFinite()) {
    throw ConfigurationError("TabularCmdp: rewards must be finite");
  }
  if (gamma_follower < 0.0 || gamma_follower >= 1.0 || gamma_leader < 0.0 ||
      gamma_leader >= 1.0) {
    throw DomainError("TabularCmdp: discount factors must lie in [0, 1)");
  }
}

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd z = (logits.array() - logits.maxCoeff()).exp();
  return z / z.sum();
}

// Frozen random draws defining one family; theta enters through linear reward
// offsets and softmax logits shifts.
struct RandomFamilyData {
  RandomCmdpOptions opt;
  Eigen::MatrixXd reward_follower_base, reward_leader_base;
  std::vector<Eigen::MatrixXd> reward_follower_dir, reward_leader_dir;  // per theta dim
  std::vector<Eigen::MatrixXd> trans_logits_base;                      // [b](s, s')
  std::vector<std::vector<Eigen::MatrixXd>> trans_logits_dir;          // [k][b](s, s')
  Eigen::VectorXd init_logits_base;
  std::vector<Eigen::VectorXd> init_logits_dir;
};

}  // namespace

TabularCmdpFamily random_cmdp_family(const RandomCmdpOptions& options, std::uint64_t seed) {
  auto data = std::make_shared<RandomFamilyData>();
  data->opt = options;
  Rng rng(seed);
  const int ns = options.n_states;
  const int na = options.n_actions;
  const int d = options.dim;

  auto random_matrix = [&rng](int r, int c, double scale) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
    return m;
  };

  data->reward_follower_base = random_matrix(ns, na, 1.0);
  data->reward_leader_base = random_matrix(ns, na, 1.0);
  for (int k = 0; k < d; ++k) {
    data->reward_follower_dir.push_back(options.theta_rewards ? random_matrix(ns, na, 0.7)
                                                              : Eigen::MatrixXd::Zero(ns, na));
    data->reward_leader_dir.push_back(options.theta_leader_reward ? random_matrix(ns, na, 0.7)
                                                                  : Eigen::MatrixXd::Zero(ns, na));
  }
  for (int b = 0; b < na; ++b) data->trans_logits_base.push_back(random_matrix(ns, ns, 1.0));
  for (int k = 0; k < d; ++k) {
    std::vector<Eigen::MatrixXd> per_action;
    for (int b = 0; b < na; ++b) {
      per_action.push_back(options.theta_transitions ? random_matrix(ns, ns, 0.5)
                                                     : Eigen::MatrixXd::Zero(ns, ns));
    }
    data->trans_logits_dir.push_back(std::move(per_action));
  }
  data->init_logits_base = random_matrix(ns, 1, 1.0).col(0);
  for (int k = 0; k < d; ++k) {
    data->init_logits_dir.push_back(
        options.theta_initial ? Eigen::VectorXd(random_matrix(ns, 1, 0.5).col(0))
                              : Eigen::VectorXd(Eigen::VectorXd::Zero(ns)));
  }

  TabularCmdpFamily family;
  family.dim = d;
  family.theta_free_transitions = !options.theta_transitions;
  family.theta_free_initial = !options.theta_initial;
  family.build = [data](const Eigen::VectorXd& theta) {
    const auto& o = data->opt;
    if (theta.size() != o.dim) throw ConfigurationError("random_cmdp_family: theta size mismatch");
    TabularCmdp m;
    m.n_states = o.n_states;
    m.n_actions = o.n_actions;
    m.theta = theta;
    m.gamma_follower = o.gamma_follower;
    m.gamma_leader = o.gamma_leader;

    m.reward_follower = data->reward_follower_base;
    m.reward_leader = data->reward_leader_base;
    for (int k = 0; k < o.dim; ++k) {
      m.reward_follower += theta[k] * data->reward_follower_dir[k];
      m.reward_leader += theta[k] * data->reward_leader_dir[k];
    }

    m.transition.resize(o.n_actions);
    for (int b = 0; b < o.n_actions; ++b) {
      Eigen::MatrixXd logits = data->trans_logits_base[b];
      for (int k = 0; k < o.dim; ++k) logits += theta[k] * data->trans_logits_dir[k][b];
      m.transition[b].resize(o.n_states, o.n_states);
      for (int s = 0; s < o.n_states; ++s) {
        m.transition[b].row(s) = softmax(logits.row(s).transpose()).transpose();
      }
    }

    Eigen::VectorXd init_logits = data->init_logits_base;
    for (int k = 0; k < o.dim; ++k) init_logits += theta[k] * data->init_logits_dir[k];
    m.initial = softmax(init_logits);

    if (o.theta_rewards) {
      m.grad_reward_follower = [data](int s, int b) {
        Eigen::VectorXd g(data->opt.dim);
        for (int k = 0; k < data->opt.dim; ++k) g[k] = data->reward_follower_dir[k](s, b);
        return g;
      };
    }
    if (o.theta_leader_reward) {
      m.grad_reward_leader = [data](int s, int b) {
        Eigen::VectorXd g(data->opt.dim);
        for (int k = 0; k < data->opt.dim; ++k) g[k] = data->reward_leader_dir[k](s, b);
        return g;
      };
    }
    if (o.theta_transitions) {
      // d/dtheta_k log softmax_{s'}(logits(s,.)) = dir_k(s,s') - sum_j p(j|s,b) dir_k(s,j)
      Eigen::MatrixXd probs_cache(o.n_states * o.n_actions, o.n_states);
      for (int b = 0; b < o.n_actions; ++b)
        for (int s = 0; s < o.n_states; ++s)
          probs_cache.row(b * o.n_states + s) = m.transition[b].row(s);
      m.grad_log_transition = [data, probs_cache](int s, int b, int s_next) {
        Eigen::VectorXd g(data->opt.dim);
        const auto row = probs_cache.row(b * data->opt.n_states + s);
        for (int k = 0; k < data->opt.dim; ++k) {
          const auto& dir = data->trans_logits_dir[k][b];
          g[k] = dir(s, s_next) - row.dot(dir.row(s));
        }
        return g;
      };
    }
    if (o.theta_initial) {
      const Eigen::VectorXd init_probs = m.initial;
      m.grad_log_initial = [data, init_probs](int s) {
        Eigen::VectorXd g(data->opt.dim);
        for (int k = 0; k < data->opt.dim; ++k) {
          g[k] = data->init_logits_dir[k][s] - init_probs.dot(data->init_logits_dir[k]);
        }
        return g;
      };
    }
    if (o.with_regularizer) {
      const Eigen::VectorXd th = theta;
      m.regularizer = [th] { return -0.05 * th.squaredNorm(); };
      m.grad_regularizer = [th] { return Eigen::VectorXd(-0.1 * th); };
    }
    return m;
  };
  return family;
}

}  // namespace bchg
