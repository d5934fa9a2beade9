#include <chrono>
#include <limits>

#include "bchg/critics.hpp"
#include "bchg/envs/bilevel_lqr.hpp"
#include "bchg/errors.hpp"
#include "bchg/exp/runner.hpp"
#include "bchg/hypergrad.hpp"

namespace bchg {

namespace {

// feature and target scaling keep plain-SGD TD stable at the pinned learning
// rate; both hypergradient terms scale by the same factor, so the clipped
// ascent direction is unchanged
constexpr double kActScale = 0.1;
constexpr double kRewardScale = 0.1;

struct LqrStep {
  Eigen::Vector2d state;
  double leader_action = 0.0;
  double follower_action = 0.0;
  double reward_l = 0.0;
};

struct LqrRollout {
  std::vector<LqrStep> steps;
  Eigen::Vector2d final_state;
};

LqrRollout sample_lqr(const BilevelLqrEnv& env, const Eigen::MatrixXd& k_theta,
                      const LqrFollowerPolicy& follower, int horizon, Rng& rng,
                      bool uniform_leader) {
  LqrRollout out;
  Eigen::VectorXd s = env.initial_state;
  const Eigen::MatrixXd& noise = env.leader_noise;
  for (int t = 0; t < horizon; ++t) {
    double a;
    if (uniform_leader) {
      a = rng.uniform(-2.0, 2.0);
    } else {
      a = (k_theta * s)(0, 0) + noise(0, 0) * rng.normal();
    }
    Eigen::VectorXd a_vec(1);
    a_vec << a;
    const Eigen::VectorXd w = env.c * (a_vec - k_theta * s);
    const Eigen::VectorXd b = follower.sample(s, w, rng);
    LqrStep step;
    step.state = s;
    step.leader_action = a;
    step.follower_action = b[0];
    step.reward_l = env.reward_leader(s);
    out.steps.push_back(step);
    s = env.a * s + env.b * b + env.c * a_vec;
  }
  out.final_state = s;
  return out;
}

double rollout_return(const BilevelLqrEnv& env, const Eigen::MatrixXd& k_theta,
                      const LqrFollowerPolicy& follower, int horizon, int n_rollouts,
                      Rng& rng) {
  double total = 0.0;
  for (int k = 0; k < n_rollouts; ++k) {
    const LqrRollout r = sample_lqr(env, k_theta, follower, horizon, rng, false);
    double ret = 0.0;
    double w = 1.0;
    for (const auto& step : r.steps) {
      ret += w * step.reward_l;
      w *= env.gamma_leader;
    }
    total += ret;
  }
  return total / n_rollouts;
}

Eigen::VectorXd critic_input(const LqrStep& step) {
  Eigen::VectorXd x(4);
  x << step.state[0], step.state[1], kActScale * step.leader_action,
      kActScale * step.follower_action;
  return x;
}

}  // namespace

std::vector<MetricsRecord> run_bilevel_lqr_seed(const ExperimentConfig& config,
                                                std::uint64_t seed) {
  const auto start_time = std::chrono::steady_clock::now();
  auto wall_ms = [&]() -> long {
    if (config.zero_wall_clock) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_time)
        .count();
  };

  BilevelLqrEnv env = bilevel_lqr_build();
  env.beta_entropy = config.beta;
  Rng root(seed);
  Rng theta_rng = root.substream(1);
  Eigen::MatrixXd k_theta(1, 2);
  k_theta << theta_rng.normal(), theta_rng.normal();

  Rng critic_rng = root.substream(2);
  Mlp critic({4, 64, 64, 1}, critic_rng);
  TargetNetwork target(critic, config.target_smoothing);

  const int horizon = config.horizon;
  const int n_traj = std::max(1, config.batch_size / horizon);
  std::vector<LqrRollout> buffer;
  long buffer_steps = 0;
  const long capacity = config.off_policy ? 1000000 : config.buffer_steps;

  std::vector<MetricsRecord> records;
  HypergradientEstimate last_estimate = HypergradientEstimate::zero(2);
  long env_steps = 0;

  try {
    for (int iter = 0; iter <= config.outer_iters; ++iter) {
      const LqrSolution sol = env.best_response(k_theta, config.max_riccati_iters);
      const LqrFollowerPolicy follower = sol.policy();
      const GaussianLinearPolicy leader = env.leader_policy(k_theta);
      const bool warmup = env_steps < config.warmup_steps;

      const bool record_row =
          iter == config.outer_iters || (config.eval_every > 0 && iter % config.eval_every == 0);
      if (record_row) {
        Rng eval_rng = root.substream(2000 + static_cast<std::uint64_t>(iter));
        MetricsRecord r;
        r.seed = seed;
        r.iter = iter;
        r.objective =
            rollout_return(env, k_theta, follower, horizon, config.eval_rollouts, eval_rng);
        r.partial_norm = last_estimate.partial_term.norm();
        r.guiding_norm = last_estimate.guiding_term.norm();
        r.total_norm = last_estimate.total.norm();
        r.comp_1 = k_theta(0, 0);
        r.comp_2 = k_theta(0, 1);
        r.wall_ms = wall_ms();
        records.push_back(r);
      }
      if (iter == config.outer_iters) break;

      Rng sample_rng = root.substream(1000 + static_cast<std::uint64_t>(iter));
      for (int j = 0; j < n_traj; ++j) {
        buffer.push_back(sample_lqr(env, k_theta, follower, horizon, sample_rng, warmup));
        buffer_steps += horizon;
        env_steps += horizon;
        while (capacity > 0 && buffer_steps > capacity && buffer.size() > 1) {
          buffer_steps -= static_cast<long>(buffer.front().steps.size());
          buffer.erase(buffer.begin());
        }
      }

      Rng update_rng = root.substream(3000 + static_cast<std::uint64_t>(iter));
      const long per_traj = horizon - 1;
      const long n_transitions = static_cast<long>(buffer.size()) * per_traj;
      for (int u = 0; u < config.critic_updates; ++u) {
        Eigen::MatrixXd xs(config.minibatch, 4), next_xs(config.minibatch, 4);
        Eigen::MatrixXd rewards(config.minibatch, 1);
        for (int j = 0; j < config.minibatch; ++j) {
          const long pick = static_cast<long>(update_rng.uniform() * n_transitions);
          const auto& traj = buffer[pick / per_traj];
          const long t = pick % per_traj;
          xs.row(j) = critic_input(traj.steps[t]).transpose();
          next_xs.row(j) = critic_input(traj.steps[t + 1]).transpose();
          rewards(j, 0) = kRewardScale * traj.steps[t].reward_l;
        }
        td_update(critic, target.shadow, xs, rewards, next_xs, env.gamma_leader,
                  config.critic_lr);
        target.update(critic);
      }

      if (!warmup) {
        for (int u = 0; u < config.actor_updates; ++u) {
          MgGradientSamples samples;
          samples.dim = 2;
          samples.beta = config.beta;
          samples.gamma_l = env.gamma_leader;
          for (int j = 0; j < config.minibatch; ++j) {
            const long pick =
                static_cast<long>(update_rng.uniform() * (buffer.size() * horizon));
            const auto& traj = buffer[pick / horizon];
            const int t = static_cast<int>(pick % horizon);
            const auto& step = traj.steps[t];
            const double q_l = critic.forward(critic_input(step))[0] / kRewardScale;
            // V_L(s, a) by averaging the critic over sampled follower actions
            const Eigen::VectorXd w_dist =
                env.c * ((Eigen::VectorXd(1) << step.leader_action).finished() -
                         k_theta * step.state);
            double v_l = 0.0;
            Eigen::VectorXd x(4);
            x << step.state[0], step.state[1], kActScale * step.leader_action, 0.0;
            Eigen::MatrixXd vx(config.v_l_samples, 4);
            for (int k = 0; k < config.v_l_samples; ++k) {
              const Eigen::VectorXd b = follower.sample(step.state, w_dist, update_rng);
              vx.row(k) = x.transpose();
              vx(k, 3) = kActScale * b[0];
            }
            const Eigen::MatrixXd vals = critic.forward_batch(vx);
            v_l = vals.mean();

            Eigen::VectorXd a_vec(1);
            a_vec << step.leader_action;
            samples.q_l.push_back(q_l);
            samples.benefit_values.push_back(q_l - v_l);
            samples.time_index.push_back(t);
            samples.score.push_back(leader.score_gain(step.state, a_vec));

            // Eq.-(9)-style suffix: sum_u gamma_F^u V_F(s_u, a_u) score(u)
            Eigen::VectorXd q_f_grad = Eigen::VectorXd::Zero(2);
            double w = 1.0;
            for (int u = t; u < static_cast<int>(traj.steps.size()); ++u) {
              const auto& su = traj.steps[u];
              Eigen::VectorXd au(1);
              au << su.leader_action;
              q_f_grad += w * env.follower_value(sol, k_theta, su.state, au) *
                          leader.score_gain(su.state, au);
              w *= env.gamma_follower;
            }
            samples.q_f_grad.push_back(std::move(q_f_grad));
          }
          HypergradientEstimate est = config.method == Method::kBchg
                                          ? bchg_hypergradient_mg(samples)
                                          : naive_pgd_gradient_mg(samples);
          if (config.grad_clip > 0.0) est = clip_gradient(est, config.grad_clip);
          last_estimate = est;
          k_theta(0, 0) += config.actor_lr * est.total[0];
          k_theta(0, 1) += config.actor_lr * est.total[1];
        }
      }
    }
  } catch (const std::exception&) {
    // abort the seed but keep the evaluations recorded so far
    MetricsRecord failure;
    failure.seed = seed;
    failure.iter = -1;
    failure.objective = std::numeric_limits<double>::quiet_NaN();
    failure.wall_ms = wall_ms();
    records.push_back(failure);
  }
  return records;
}

}  // namespace bchg
