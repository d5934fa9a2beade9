#include <chrono>
#include <limits>

#include "bchg/critics.hpp"
#include "bchg/envs/four_rooms.hpp"
#include "bchg/errors.hpp"
#include "bchg/exp/runner.hpp"
#include "bchg/hypergrad.hpp"
#include "bchg/softsolve.hpp"
#include "bchg/trajectory.hpp"

namespace bchg {

namespace {

struct TabularTask {
  TabularCmdpFamily family;
  int oracle_states = 0;  // uniform-start support for oracle rollouts
  bool four_rooms = false;
  FourRoomsLayout layout;
};

TabularTask make_tabular_task(const ExperimentConfig& config) {
  TabularTask task;
  if (config.task == Task::kFourRooms) {
    const FourRoomsLayout layout = config.map_path.empty()
                                       ? FourRoomsLayout::canonical()
                                       : FourRoomsLayout::load_file(config.map_path);
    task.family = four_rooms_family(layout);
    task.oracle_states = layout.n_cells;
    task.four_rooms = true;
    task.layout = layout;
  } else {
    RandomCmdpOptions opt;
    opt.n_states = config.custom_states;
    opt.n_actions = config.custom_actions;
    opt.dim = config.custom_dim;
    opt.theta_transitions = config.custom_theta_transitions;
    opt.theta_rewards = config.custom_theta_rewards;
    opt.theta_initial = config.custom_theta_initial;
    opt.theta_leader_reward = config.custom_theta_leader_reward;
    task.family = random_cmdp_family(opt, config.custom_seed);
    task.oracle_states = config.custom_states;
  }
  return task;
}

std::vector<TabularTransition> sarsa_transitions(const std::vector<DiscreteTrajectory>& batch) {
  std::vector<TabularTransition> out;
  for (const auto& traj : batch) {
    for (int t = 0; t + 1 < traj.horizon(); ++t) {
      const auto& cur = traj.steps[t];
      const auto& nxt = traj.steps[t + 1];
      out.push_back({cur.state, cur.follower_action, cur.reward_leader, nxt.state,
                     nxt.follower_action});
    }
  }
  return out;
}

}  // namespace

double evaluate_leader_exact(const TabularCmdpFamily& family, const Eigen::VectorXd& theta,
                             double beta, double solve_tol) {
  return exact_leader_objective(family.build(theta), beta, solve_tol);
}

std::vector<MetricsRecord> run_tabular_cmdp_seed(const ExperimentConfig& config,
                                                 std::uint64_t seed) {
  const auto start_time = std::chrono::steady_clock::now();
  auto wall_ms = [&]() -> long {
    if (config.zero_wall_clock) return 0;
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_time)
        .count();
  };

  TabularTask task = make_tabular_task(config);
  Rng root(seed);
  Rng theta_rng = root.substream(1);
  Rng critic_rng = root.substream(2);

  Eigen::VectorXd theta = theta_rng.normal_vector(task.family.dim);
  TabularCmdp model = task.family.build(theta);

  TabularCritic critic;
  critic.learning_rate = config.critic_lr;
  critic.q.resize(model.n_states, model.n_actions);
  for (int s = 0; s < model.n_states; ++s) {
    for (int b = 0; b < model.n_actions; ++b) critic.q(s, b) = 0.1 * critic_rng.normal();
  }

  std::vector<MetricsRecord> records;
  Eigen::MatrixXd warm_q;
  bool have_warm = false;
  const int horizon = config.horizon;
  const int n_traj = config.trajectories_per_iter();

  HypergradientEstimate last_estimate = HypergradientEstimate::zero(task.family.dim);
  try {
    for (int iter = 0; iter <= config.outer_iters; ++iter) {
      if (iter > 0) model = task.family.build(theta);
      const SoftValues soft =
          have_warm ? soft_value_iteration(model, config.beta, config.solve_tol, 1000000, warm_q)
                    : soft_value_iteration(model, config.beta, config.solve_tol);
      warm_q = soft.q;
      have_warm = true;
      const TabularPolicy g = boltzmann_policy(soft);

      const bool record_row =
          iter == config.outer_iters || (config.eval_every > 0 && iter % config.eval_every == 0);
      if (iter == config.outer_iters) {
        if (record_row) {
          const PolicyValues values =
              exact_policy_evaluation(model, g, RewardSelector::kLeader, model.gamma_leader);
          MetricsRecord r;
          r.seed = seed;
          r.iter = iter;
          r.objective = model.initial.dot(values.v) + (model.regularizer ? model.regularizer() : 0.0);
          if (task.four_rooms) r.comp_1 = four_rooms_penalty_mass(task.layout, theta);
          r.wall_ms = wall_ms();
          records.push_back(r);
        }
        break;
      }

      // sample the on-policy batch
      Rng sample_rng = root.substream(1000 + static_cast<std::uint64_t>(iter));
      std::vector<DiscreteTrajectory> batch;
      batch.reserve(n_traj);
      for (int j = 0; j < n_traj; ++j) {
        batch.push_back(sample_trajectory(model, g, horizon, sample_rng));
      }

      std::vector<DiscreteTrajectory> oracle_batch;
      if (config.method == Method::kHpgdOracle) {
        Rng oracle_rng = root.substream(500000 + static_cast<std::uint64_t>(iter));
        oracle_batch.reserve(config.oracle_rollouts + batch.size());
        for (int j = 0; j < config.oracle_rollouts; ++j) {
          const int s0 = static_cast<int>(oracle_rng.uniform() * task.oracle_states);
          oracle_batch.push_back(sample_trajectory(model, g, horizon, oracle_rng,
                                                   std::min(s0, task.oracle_states - 1)));
        }
        // keep every batch key covered
        for (const auto& traj : batch) oracle_batch.push_back(traj);
      }

      // leader value estimates per method
      Eigen::MatrixXd q_l;
      Eigen::VectorXd v_l;
      const bool sarsa_based = config.method == Method::kBchg ||
                               config.method == Method::kHpgdSarsa ||
                               config.method == Method::kNaivePgd;
      if (sarsa_based) {
        critic = sarsa_update(std::move(critic), sarsa_transitions(batch), model.gamma_leader);
        q_l = critic.q;
        v_l = (q_l.array() * g.probs.array()).rowwise().sum();
      } else {
        const auto& source = config.method == Method::kHpgdOracle ? oracle_batch : batch;
        const TabularMcValues mc = monte_carlo_values(source, model.n_states, model.n_actions,
                                                      model.gamma_leader, false);
        q_l = mc.q;
        v_l = mc.v;
      }
      const Eigen::MatrixXd benefit_table = benefit(q_l, v_l);

      CmdpBatchInputs in;
      in.batch = &batch;
      in.segment_source = config.method == Method::kHpgdOracle ? &oracle_batch : nullptr;
      in.model = &model;
      in.benefit_table = &benefit_table;
      in.q_l = &q_l;
      in.v_l = &v_l;
      in.v_f = &soft.v;
      in.best_response = &g;
      in.beta = config.beta;

      HypergradientEstimate est;
      switch (config.method) {
        case Method::kBchg:
          est = bchg_hypergradient_cmdp(in);
          break;
        case Method::kNaivePgd:
          est = naive_pgd_gradient_cmdp(in);
          break;
        case Method::kHpgdSarsa:
        case Method::kHpgdMc:
        case Method::kHpgdOracle:
          est = hpgd_gradient_cmdp(in, /*strict_revisits=*/!config.hpgd_lenient);
          break;
        case Method::kSobirl:
          est = sobirl_gradient_cmdp(in);
          break;
        default:
          throw ConfigurationError("run_tabular_cmdp_seed: unsupported method");
      }
      if (config.grad_clip > 0.0) est = clip_gradient(est, config.grad_clip);
      last_estimate = est;

      if (record_row) {
        const PolicyValues values =
            exact_policy_evaluation(model, g, RewardSelector::kLeader, model.gamma_leader);
        MetricsRecord r;
        r.seed = seed;
        r.iter = iter;
        r.objective = model.initial.dot(values.v) + (model.regularizer ? model.regularizer() : 0.0);
        r.partial_norm = est.partial_term.norm();
        r.guiding_norm = est.guiding_term.norm();
        r.total_norm = est.total.norm();
        if (task.four_rooms) r.comp_1 = four_rooms_penalty_mass(task.layout, theta);
        r.wall_ms = wall_ms();
        records.push_back(r);
      }

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
