#include <chrono>
#include <limits>

#include "bchg/critics.hpp"
#include "bchg/envs/thermal.hpp"
#include "bchg/errors.hpp"
#include "bchg/exp/runner.hpp"
#include "bchg/hypergrad.hpp"
#include "bchg/lqr.hpp"

namespace bchg {

namespace {

// feature and target scaling keep plain-SGD TD stable on inputs of magnitude
// ~15-30 and returns of magnitude ~1e2-1e3; critic reads are scaled back, so
// every estimator input stays in true reward units
constexpr double kStateScale = 0.2;
constexpr double kActionScale = 0.1;
constexpr double kValueScale = 0.02;

struct ThermalRollout {
  std::vector<Eigen::VectorXd> states;   // s_0 .. s_T
  std::vector<Eigen::VectorXd> actions;  // b_0 .. b_{T-1}
  std::vector<double> reward_l;
  double stability_sum = 0.0;  // discounted
  double energy_sum = 0.0;     // discounted
};

ThermalRollout sample_thermal(const ThermalEnv& env, const LqrFollowerPolicy& policy,
                              int horizon, Rng& rng) {
  ThermalRollout out;
  Eigen::VectorXd s = env.initial_state_stddev * rng.normal_vector(ThermalEnv::kZones);
  double w = 1.0;
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd b = policy.sample(s, rng);
    const Eigen::VectorXd noise =
        env.noise_factor * rng.normal_vector(ThermalEnv::kZones);
    const Eigen::VectorXd s_next = env.a * s + env.b * b + noise;
    out.states.push_back(s);
    out.actions.push_back(b);
    out.reward_l.push_back(env.reward_leader(s, b));
    out.stability_sum += w * env.stability(s);
    out.energy_sum += w * env.energy_cost(b);
    w *= env.gamma;
    s = s_next;
  }
  out.states.push_back(s);
  return out;
}

Eigen::MatrixXd stack_inputs(const std::vector<ThermalRollout>& batch, bool with_action) {
  long rows = 0;
  for (const auto& r : batch) rows += static_cast<long>(r.actions.size());
  Eigen::MatrixXd x(rows, with_action ? 6 : 4);
  long k = 0;
  for (const auto& r : batch) {
    for (size_t t = 0; t < r.actions.size(); ++t) {
      x.row(k).head(4) = kStateScale * r.states[t].transpose();
      if (with_action) x.row(k).tail(2) = kActionScale * r.actions[t].transpose();
      ++k;
    }
  }
  return x;
}

}  // namespace

std::vector<MetricsRecord> run_thermal_seed(const ExperimentConfig& config,
                                            std::uint64_t seed) {
  const auto start_time = std::chrono::steady_clock::now();
  auto wall_ms = [&]() -> long {
    if (config.zero_wall_clock) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_time)
        .count();
  };

  Rng root(seed);
  Rng theta_rng = root.substream(1);
  Eigen::VectorXd theta = theta_rng.normal_vector(ThermalEnv::kDim);

  const int horizon = config.horizon;
  const int n_traj = std::max(1, config.batch_size / horizon);

  std::vector<MetricsRecord> records;
  HypergradientEstimate last_estimate = HypergradientEstimate::zero(ThermalEnv::kDim);

  RiccatiOptions riccati_opts;
  riccati_opts.max_iters = config.max_riccati_iters;
  riccati_opts.tol = 1e-12;

  try {
    for (int iter = 0; iter <= config.outer_iters; ++iter) {
      ThermalEnv env = thermal_build(theta);
      env.beta_entropy = config.beta;
      const LqrSolution sol = entreg_lqr_unobservable(env.follower_problem(), riccati_opts);
      const LqrFollowerPolicy policy = sol.policy();
      auto v_f = [&](const Eigen::VectorXd& s) { return -sol.value_cost(s); };

      const bool record_row =
          iter == config.outer_iters || (config.eval_every > 0 && iter % config.eval_every == 0);
      if (record_row) {
        Rng eval_rng = root.substream(2000 + static_cast<std::uint64_t>(iter));
        double objective = 0.0, stab = 0.0, energy = 0.0;
        for (int k = 0; k < config.eval_rollouts; ++k) {
          const ThermalRollout r = sample_thermal(env, policy, horizon, eval_rng);
          double ret = 0.0;
          double w = 1.0;
          for (double rl : r.reward_l) {
            ret += w * rl;
            w *= env.gamma;
          }
          objective += ret;
          stab += r.stability_sum;
          energy += r.energy_sum;
        }
        const double discount_mass =
            (1.0 - std::pow(env.gamma, horizon)) / (1.0 - env.gamma);
        MetricsRecord r;
        r.seed = seed;
        r.iter = iter;
        r.objective = objective / config.eval_rollouts;
        r.partial_norm = last_estimate.partial_term.norm();
        r.guiding_norm = last_estimate.guiding_term.norm();
        r.total_norm = last_estimate.total.norm();
        r.comp_1 = stab / config.eval_rollouts;
        r.comp_2 = energy / config.eval_rollouts;
        r.comp_3 = env.alpha.squaredNorm() * discount_mass;
        r.comp_4 = env.airflow.squaredNorm() * discount_mass;
        r.wall_ms = wall_ms();
        records.push_back(r);
      }
      if (iter == config.outer_iters) break;

      Rng sample_rng = root.substream(1000 + static_cast<std::uint64_t>(iter));
      std::vector<ThermalRollout> batch;
      batch.reserve(n_traj);
      for (int j = 0; j < n_traj; ++j) {
        batch.push_back(sample_thermal(env, policy, horizon, sample_rng));
      }

      // fresh critic each outer iteration, trained by TD with a target network
      Rng critic_rng = root.substream(3000 + static_cast<std::uint64_t>(iter));
      Mlp critic({6, 64, 64, 1}, critic_rng);
      TargetNetwork target(critic, config.target_smoothing);
      {
        // transition minibatches (t <= T-2)
        const long per_traj = horizon - 1;
        const long n_transitions = static_cast<long>(batch.size()) * per_traj;
        for (int u = 0; u < config.td_updates; ++u) {
          Eigen::MatrixXd xs(config.minibatch, 6), next_xs(config.minibatch, 6);
          Eigen::MatrixXd rewards(config.minibatch, 1);
          for (int j = 0; j < config.minibatch; ++j) {
            const long pick = static_cast<long>(critic_rng.uniform() * n_transitions);
            const long i = pick / per_traj;
            const long t = pick % per_traj;
            const auto& r = batch[i];
            xs.row(j).head(4) = kStateScale * r.states[t].transpose();
            xs.row(j).tail(2) = kActionScale * r.actions[t].transpose();
            next_xs.row(j).head(4) = kStateScale * r.states[t + 1].transpose();
            next_xs.row(j).tail(2) = kActionScale * r.actions[t + 1].transpose();
            rewards(j, 0) = kValueScale * r.reward_l[t];
          }
          td_update(critic, target.shadow, xs, rewards, next_xs, env.gamma, config.td_lr);
          target.update(critic);
        }
      }

      // HPGD(TD): vector regressor for the follower value gradient
      VectorTdRegressor* regressor = nullptr;
      VectorTdRegressor regressor_storage =
          [&]() -> VectorTdRegressor {
        Rng reg_rng = root.substream(4000 + static_cast<std::uint64_t>(iter));
        return VectorTdRegressor(4, ThermalEnv::kDim, reg_rng, config.target_smoothing);
      }();
      std::vector<std::vector<Eigen::VectorXd>> score_cache(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) {
        score_cache[i].resize(horizon);
        for (int t = 0; t < horizon; ++t) {
          score_cache[i][t] =
              env.grad_log_transition(batch[i].states[t], batch[i].actions[t],
                                      batch[i].states[t + 1]);
        }
      }
      if (config.method == Method::kHpgdTd) {
        regressor = &regressor_storage;
        Rng reg_rng = root.substream(4500 + static_cast<std::uint64_t>(iter));
        const long per_traj = horizon - 1;
        const long n_transitions = static_cast<long>(batch.size()) * per_traj;
        for (int u = 0; u < config.td_updates; ++u) {
          Eigen::MatrixXd xs(config.minibatch, 4), next_xs(config.minibatch, 4);
          Eigen::MatrixXd rewards(config.minibatch, ThermalEnv::kDim);
          for (int j = 0; j < config.minibatch; ++j) {
            const long pick = static_cast<long>(reg_rng.uniform() * n_transitions);
            const long i = pick / per_traj;
            const long t = pick % per_traj;
            const auto& r = batch[i];
            xs.row(j) = kStateScale * r.states[t].transpose();
            next_xs.row(j) = kStateScale * r.states[t + 1].transpose();
            // vector reward: gamma_F V_F(s') grad log p (the follower reward is theta-free)
            rewards.row(j) =
                (env.gamma * v_f(r.states[t + 1]) * score_cache[i][t]).transpose();
          }
          regressor->train_step(xs, rewards, next_xs, env.gamma, config.td_lr);
        }
      }

      // per-step quantities for the gradient assembly
      ContinuousCmdpBatch data;
      data.dim = ThermalEnv::kDim;
      data.beta = config.beta;
      data.gamma_l = env.gamma;
      data.gamma_f = env.gamma;
      const Eigen::VectorXd grad_r_l_const = env.grad_reward_leader();
      data.q_l.resize(batch.size());
      data.v_l.resize(batch.size());
      data.v_f_next.resize(batch.size());
      data.grad_r_l.resize(batch.size());
      data.score_p = score_cache;

      // critic values batched
      const Eigen::MatrixXd all_sb = stack_inputs(batch, true);
      const Eigen::MatrixXd q_all = critic.forward_batch(all_sb);
      Rng v_rng = root.substream(5000 + static_cast<std::uint64_t>(iter));
      long row = 0;
      for (size_t i = 0; i < batch.size(); ++i) {
        data.q_l[i].resize(horizon);
        data.v_l[i].resize(horizon);
        data.v_f_next[i].resize(horizon);
        data.grad_r_l[i].assign(horizon, grad_r_l_const);
        // V_L(s_t) by averaging the critic over sampled follower actions
        Eigen::MatrixXd vx(static_cast<long>(horizon) * config.v_l_samples, 6);
        for (int t = 0; t < horizon; ++t) {
          const Eigen::VectorXd mean = policy.mean(batch[i].states[t]);
          for (int k = 0; k < config.v_l_samples; ++k) {
            vx.row(t * config.v_l_samples + k).head(4) =
                kStateScale * batch[i].states[t].transpose();
            vx.row(t * config.v_l_samples + k).tail(2) =
                kActionScale * (mean + policy.cov_chol * v_rng.normal_vector(2)).transpose();
          }
        }
        const Eigen::MatrixXd v_vals = critic.forward_batch(vx);
        for (int t = 0; t < horizon; ++t) {
          data.q_l[i][t] = q_all(row++, 0);
          data.v_l[i][t] =
              v_vals.block(static_cast<long>(t) * config.v_l_samples, 0, config.v_l_samples, 1)
                  .mean();
          data.v_f_next[i][t] = v_f(batch[i].states[t + 1]);
        }
      }

      HypergradientEstimate est;
      switch (config.method) {
        case Method::kBchg:
          est = bchg_hypergradient_continuous(data);
          break;
        case Method::kNaivePgd:
          est = naive_pgd_gradient_continuous(data);
          break;
        case Method::kHpgdTd: {
          std::vector<std::vector<Eigen::VectorXd>> pred(batch.size());
          for (size_t i = 0; i < batch.size(); ++i) {
            Eigen::MatrixXd xs(horizon, 4);
            for (int t = 0; t < horizon; ++t) {
              xs.row(t) = kStateScale * batch[i].states[t].transpose();
            }
            const Eigen::MatrixXd p = regressor->predict_batch(xs);
            pred[i].resize(horizon);
            for (int t = 0; t < horizon; ++t) pred[i][t] = p.row(t).transpose();
          }
          est = hpgd_td_gradient_continuous(data, pred);
          break;
        }
        default:
          throw ConfigurationError("run_thermal_seed: unsupported method");
      }
      if (config.grad_clip > 0.0) est = clip_gradient(est, config.grad_clip);
      last_estimate = est;
      theta += config.actor_lr * est.total;
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
