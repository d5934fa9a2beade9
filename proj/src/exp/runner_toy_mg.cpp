#include <chrono>
#include <limits>

#include "bchg/critics.hpp"
#include "bchg/envs/toy_mg.hpp"
#include "bchg/errors.hpp"
#include "bchg/exp/buffer.hpp"
#include "bchg/exp/runner.hpp"
#include "bchg/hypergrad.hpp"
#include "bchg/mlp.hpp"
#include "bchg/softsolve.hpp"
#include "bchg/trajectory.hpp"

namespace bchg {

namespace {

Eigen::VectorXd critic_input(const TabularMarkovGame& game, int s, int a, int b) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(game.n_states + game.n_leader_actions +
                                            game.n_follower_actions);
  x[s] = 1.0;
  x[game.n_states + a] = 1.0;
  x[game.n_states + game.n_leader_actions + b] = 1.0;
  return x;
}

TabularPolicy actor_policy(const Mlp& actor, const TabularMarkovGame& game) {
  TabularPolicy f;
  f.probs.resize(game.n_states, game.n_leader_actions);
  for (int s = 0; s < game.n_states; ++s) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(game.n_states);
    x[s] = 1.0;
    const Eigen::VectorXd logits = actor.forward(x);
    Eigen::VectorXd z = (logits.array() - logits.maxCoeff()).exp();
    f.probs.row(s) = (z / z.sum()).transpose();
  }
  return f;
}

// grad of log f(a|s) w.r.t. the flattened actor parameters, one vector per
// (s, a) pair; scores only change when the actor does.
std::vector<Eigen::VectorXd> score_table(const Mlp& actor, const TabularPolicy& f,
                                         const TabularMarkovGame& game) {
  std::vector<Eigen::VectorXd> scores(game.n_states * game.n_leader_actions);
  for (int s = 0; s < game.n_states; ++s) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, game.n_states);
    x(0, s) = 1.0;
    for (int a = 0; a < game.n_leader_actions; ++a) {
      Eigen::MatrixXd dlogits = -f.probs.row(s);
      dlogits(0, a) += 1.0;
      scores[game.sbar(s, a)] = actor.flatten(actor.backward_batch(x, dlogits));
    }
  }
  return scores;
}

double rollout_return(const TabularMarkovGame& game, const TabularPolicy& f,
                      const ConditionedTabularPolicy& g, int horizon, int n_rollouts,
                      Rng& rng) {
  double total = 0.0;
  for (int k = 0; k < n_rollouts; ++k) {
    const DiscreteTrajectory traj = sample_trajectory(game, f, g, horizon, rng);
    double ret = 0.0;
    double w = 1.0;
    for (const auto& step : traj.steps) {
      ret += w * step.reward_leader;
      w *= game.gamma_leader;
    }
    total += ret;
  }
  return total / n_rollouts;
}

}  // namespace

std::vector<MetricsRecord> run_toy_mg_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const auto start_time = std::chrono::steady_clock::now();
  auto wall_ms = [&]() -> long {
    if (config.zero_wall_clock) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_time)
        .count();
  };

  const TabularMarkovGame game = toy_mg_build();
  Rng root(seed);
  Rng actor_rng = root.substream(1);
  Rng critic_rng = root.substream(2);

  Mlp actor({game.n_states, 64, 64, game.n_leader_actions}, actor_rng);
  actor.scale_layer(-1, 0.01);  // near-uniform initial policy
  Mlp critic({game.n_states + game.n_leader_actions + game.n_follower_actions, 64, 64, 1},
             critic_rng);
  TargetNetwork target(critic, config.target_smoothing);

  TrajectoryBuffer buffer;
  buffer.capacity_steps = config.off_policy ? 1000000 : config.buffer_steps;
  const int n_traj = config.trajectories_per_iter();

  std::vector<MetricsRecord> records;
  Eigen::VectorXd warm_q;
  bool have_warm = false;
  HypergradientEstimate last_estimate = HypergradientEstimate::zero(actor.parameter_count());

  try {
    for (int iter = 0; iter <= config.outer_iters; ++iter) {
      const TabularPolicy f = actor_policy(actor, game);
      const MgSoftValues soft =
          have_warm
              ? soft_q_iteration(game, f, config.beta, config.solve_tol, 1000000, &warm_q)
              : soft_q_iteration(game, f, config.beta, config.solve_tol);
      warm_q = soft.q;
      have_warm = true;
      const ConditionedTabularPolicy g = boltzmann_policy(soft);

      const bool record_row =
          iter == config.outer_iters || (config.eval_every > 0 && iter % config.eval_every == 0);
      if (record_row) {
        Rng eval_rng = root.substream(2000 + static_cast<std::uint64_t>(iter));
        MetricsRecord r;
        r.seed = seed;
        r.iter = iter;
        r.objective = rollout_return(game, f, g, config.horizon, config.eval_rollouts, eval_rng);
        r.partial_norm = last_estimate.partial_term.norm();
        r.guiding_norm = last_estimate.guiding_term.norm();
        r.total_norm = last_estimate.total.norm();
        r.comp_1 = f.probs(toy_mg::kStateA, 0);                        // f(0 | A)
        r.comp_2 = g.prob(toy_mg::kStateS, 0, toy_mg::kActA);          // g(a | S, 0)
        r.comp_3 = g.prob(toy_mg::kStateS, 1, toy_mg::kActA);          // g(a | S, 1)
        r.wall_ms = wall_ms();
        records.push_back(r);
      }
      if (iter == config.outer_iters) break;

      Rng sample_rng = root.substream(1000 + static_cast<std::uint64_t>(iter));
      for (int j = 0; j < n_traj; ++j) {
        buffer.push(sample_trajectory(game, f, g, config.horizon, sample_rng));
      }

      // transition index over the buffer (next actions required)
      std::vector<std::pair<int, int>> transitions;
      std::vector<std::pair<int, int>> occurrences;
      for (size_t i = 0; i < buffer.trajs.size(); ++i) {
        for (int t = 0; t + 1 < buffer.trajs[i].horizon(); ++t) {
          transitions.emplace_back(static_cast<int>(i), t);
        }
        for (int t = 0; t < buffer.trajs[i].horizon(); ++t) {
          occurrences.emplace_back(static_cast<int>(i), t);
        }
      }

      Rng update_rng = root.substream(3000 + static_cast<std::uint64_t>(iter));
      // critic updates
      for (int u = 0; u < config.critic_updates; ++u) {
        const int m = config.minibatch;
        Eigen::MatrixXd xs(m, critic.input_dim());
        Eigen::MatrixXd rewards(m, 1);
        Eigen::MatrixXd next_xs(m, critic.input_dim());
        for (int j = 0; j < m; ++j) {
          const auto& ref = transitions[static_cast<size_t>(update_rng.uniform() *
                                                            transitions.size())];
          const auto& traj = buffer.trajs[ref.first];
          const auto& cur = traj.steps[ref.second];
          const auto& nxt = traj.steps[ref.second + 1];
          xs.row(j) = critic_input(game, cur.state, cur.leader_action, cur.follower_action)
                          .transpose();
          if (config.method == Method::kBiac) {
            auto q_fn = [&](int s2, int a2, int b2) {
              return target.shadow.forward(critic_input(game, s2, a2, b2))[0];
            };
            rewards(j, 0) = biac_target(cur.reward_leader, cur.next_state, q_fn, g,
                                        game.gamma_leader);
            next_xs.row(j).setZero();  // target already folded into the reward column
          } else {
            rewards(j, 0) = cur.reward_leader;
            next_xs.row(j) =
                critic_input(game, nxt.state, nxt.leader_action, nxt.follower_action).transpose();
          }
        }
        if (config.method == Method::kBiac) {
          // y = biac target directly; gamma contribution disabled by zero rows
          td_update(critic, target.shadow, xs, rewards, next_xs, 0.0, config.critic_lr);
        } else {
          td_update(critic, target.shadow, xs, rewards, next_xs, game.gamma_leader,
                    config.critic_lr);
        }
        target.update(critic);
      }

      // actor updates
      for (int u = 0; u < config.actor_updates; ++u) {
        const TabularPolicy f_now = actor_policy(actor, game);
        const auto scores = score_table(actor, f_now, game);
        // The estimator runs in the (state, leader action) coefficient basis
        // (scores and follower-Q-gradients are linear combinations of the six
        // per-pair score vectors); the result maps to parameter space once.
        const int n_sa = game.n_states * game.n_leader_actions;
        MgGradientSamples samples;
        samples.dim = n_sa;
        samples.beta = config.beta;
        samples.gamma_l = game.gamma_leader;
        const int m = config.minibatch;
        samples.q_l.reserve(m);
        std::vector<std::pair<int, int>> picked(m);
        for (int j = 0; j < m; ++j) {
          picked[j] = occurrences[static_cast<size_t>(update_rng.uniform() *
                                                      occurrences.size())];
        }
        // one batched forward covers the taken actions and the per-action rows
        // behind V_L(sbar) = E_{b~g} Q(sbar, b)
        const int nb = game.n_follower_actions;
        Eigen::MatrixXd rows(m * (1 + nb), critic.input_dim());
        for (int j = 0; j < m; ++j) {
          const auto& step = buffer.trajs[picked[j].first].steps[picked[j].second];
          rows.row(j * (1 + nb)) =
              critic_input(game, step.state, step.leader_action, step.follower_action)
                  .transpose();
          for (int b = 0; b < nb; ++b) {
            rows.row(j * (1 + nb) + 1 + b) =
                critic_input(game, step.state, step.leader_action, b).transpose();
          }
        }
        const Eigen::MatrixXd vals = critic.forward_batch(rows);
        for (int j = 0; j < m; ++j) {
          const auto& ref = picked[j];
          const auto& traj = buffer.trajs[ref.first];
          const auto& step = traj.steps[ref.second];
          const double q_l = vals(j * (1 + nb), 0);
          double v_l = 0.0;
          for (int b = 0; b < nb; ++b) {
            v_l += g.prob(step.state, step.leader_action, b) * vals(j * (1 + nb) + 1 + b, 0);
          }
          samples.q_l.push_back(q_l);
          samples.benefit_values.push_back(q_l - v_l);
          samples.time_index.push_back(ref.second);
          Eigen::VectorXd basis_score = Eigen::VectorXd::Zero(n_sa);
          basis_score[game.sbar(step.state, step.leader_action)] = 1.0;
          samples.score.push_back(std::move(basis_score));

          // follower-Q-gradient along the suffix, grouped by (s, a) pairs
          Eigen::VectorXd coef = Eigen::VectorXd::Zero(n_sa);
          double w = 1.0;
          for (int t = ref.second; t < traj.horizon(); ++t) {
            const auto& st = traj.steps[t];
            coef[game.sbar(st.state, st.leader_action)] +=
                w * soft.v(st.state, st.leader_action);
            w *= game.gamma_follower;
          }
          samples.q_f_grad.push_back(std::move(coef));
        }
        const HypergradientEstimate basis_est = config.method == Method::kBchg
                                                     ? bchg_hypergradient_mg(samples)
                                                     : naive_pgd_gradient_mg(samples);
        HypergradientEstimate est = HypergradientEstimate::zero(actor.parameter_count());
        for (int k = 0; k < n_sa; ++k) {
          if (basis_est.partial_term[k] != 0.0) est.partial_term += basis_est.partial_term[k] * scores[k];
          if (basis_est.guiding_term[k] != 0.0) est.guiding_term += basis_est.guiding_term[k] * scores[k];
        }
        est.assemble();
        if (config.grad_clip > 0.0) est = clip_gradient(est, config.grad_clip);
        last_estimate = est;
        actor.set_parameters(actor.parameters() + config.actor_lr * est.total);
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
