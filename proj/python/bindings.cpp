#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bchg/envs/bilevel_lqr.hpp"
#include "bchg/envs/four_rooms.hpp"
#include "bchg/envs/thermal.hpp"
#include "bchg/envs/toy_mg.hpp"
#include "bchg/exact_eval.hpp"
#include "bchg/exp/config.hpp"
#include "bchg/exp/runner.hpp"
#include "bchg/hypergrad.hpp"
#include "bchg/lqr.hpp"
#include "bchg/rng.hpp"
#include "bchg/softsolve.hpp"
#include "bchg/trajectory.hpp"

namespace py = pybind11;
using namespace bchg;

namespace {

py::dict soft_values_dict(const SoftValues& values) {
  py::dict d;
  d["v"] = values.v;
  d["q"] = values.q;
  d["residual"] = values.residual;
  d["sweeps"] = values.sweeps;
  return d;
}

py::dict estimate_dict(const HypergradientEstimate& est) {
  py::dict d;
  d["total"] = est.total;
  d["partial"] = est.partial_term;
  d["guiding"] = est.guiding_term;
  d["regularizer"] = est.regularizer_term;
  return d;
}

}  // namespace

PYBIND11_MODULE(bchg_py, m) {
  m.doc() = "decentralized bi-level RL: soft solvers, LQR closed forms, hypergradients";

  py::class_<TabularCmdp>(m, "TabularCmdp")
      .def_readonly("n_states", &TabularCmdp::n_states)
      .def_readonly("n_actions", &TabularCmdp::n_actions)
      .def_readonly("initial", &TabularCmdp::initial)
      .def_readonly("reward_follower", &TabularCmdp::reward_follower)
      .def_readonly("reward_leader", &TabularCmdp::reward_leader)
      .def_readonly("gamma_follower", &TabularCmdp::gamma_follower)
      .def_readonly("gamma_leader", &TabularCmdp::gamma_leader)
      .def("transition_matrix",
           [](const TabularCmdp& self, int action) { return self.transition.at(action); });

  py::class_<TabularCmdpFamily>(m, "TabularCmdpFamily")
      .def_readonly("dim", &TabularCmdpFamily::dim)
      .def("build", [](const TabularCmdpFamily& self, const Eigen::VectorXd& theta) {
        return self.build(theta);
      });

  m.def(
      "random_cmdp_family",
      [](int n_states, int n_actions, int dim, std::uint64_t seed) {
        RandomCmdpOptions opt;
        opt.n_states = n_states;
        opt.n_actions = n_actions;
        opt.dim = dim;
        return random_cmdp_family(opt, seed);
      },
      py::arg("n_states") = 4, py::arg("n_actions") = 2, py::arg("dim") = 2,
      py::arg("seed") = 7);

  m.def(
      "four_rooms_build",
      [](const Eigen::VectorXd& theta) {
        return four_rooms_build(FourRoomsLayout::canonical(), theta);
      },
      py::arg("theta"));
  m.def("four_rooms_dim", [] { return FourRoomsLayout::canonical().n_cells + 1; });

  m.def(
      "soft_value_iteration",
      [](const TabularCmdp& model, double beta, double tol) {
        return soft_values_dict(soft_value_iteration(model, beta, tol));
      },
      py::arg("model"), py::arg("beta"), py::arg("tol") = 1e-10);

  m.def(
      "boltzmann_policy",
      [](const TabularCmdp& model, double beta, double tol) {
        return boltzmann_policy(soft_value_iteration(model, beta, tol)).probs;
      },
      py::arg("model"), py::arg("beta"), py::arg("tol") = 1e-10);

  m.def(
      "exact_policy_evaluation",
      [](const TabularCmdp& model, const Eigen::MatrixXd& policy, const std::string& reward,
         double gamma) {
        TabularPolicy pi;
        pi.probs = policy;
        const auto values = exact_policy_evaluation(
            model, pi, reward == "leader" ? RewardSelector::kLeader : RewardSelector::kFollower,
            gamma);
        py::dict d;
        d["v"] = values.v;
        d["q"] = values.q;
        return d;
      },
      py::arg("model"), py::arg("policy"), py::arg("reward") = "leader", py::arg("gamma") = 0.9);

  m.def(
      "discounted_visitation",
      [](const TabularCmdp& model, const Eigen::MatrixXd& policy, double gamma) {
        TabularPolicy pi;
        pi.probs = policy;
        return discounted_visitation(model, pi, gamma).weights;
      },
      py::arg("model"), py::arg("policy"), py::arg("gamma"));

  m.def(
      "sample_trajectory",
      [](const TabularCmdp& model, const Eigen::MatrixXd& policy, int horizon,
         std::uint64_t seed) {
        TabularPolicy pi;
        pi.probs = policy;
        Rng rng(seed);
        const DiscreteTrajectory traj = sample_trajectory(model, pi, horizon, rng);
        py::list steps;
        for (const auto& s : traj.steps) {
          py::dict d;
          d["state"] = s.state;
          d["action"] = s.follower_action;
          d["reward_leader"] = s.reward_leader;
          d["reward_follower"] = s.reward_follower;
          d["next_state"] = s.next_state;
          steps.append(d);
        }
        return steps;
      },
      py::arg("model"), py::arg("policy"), py::arg("horizon"), py::arg("seed"));

  m.def(
      "exact_hypergradient",
      [](const TabularCmdp& model, double beta) {
        return estimate_dict(exact_hypergradient_cmdp(model, beta));
      },
      py::arg("model"), py::arg("beta"));

  m.def(
      "exact_leader_objective",
      [](const TabularCmdp& model, double beta) { return exact_leader_objective(model, beta); },
      py::arg("model"), py::arg("beta"));

  m.def(
      "riccati_solve",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
         const Eigen::MatrixXd& r, double gamma) { return riccati_solve(a, b, q, r, gamma); },
      py::arg("a"), py::arg("b"), py::arg("q_bar"), py::arg("r_bar"), py::arg("gamma"));

  m.def(
      "entreg_lqr",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
         const Eigen::MatrixXd& r, const Eigen::MatrixXd& noise_factor, double gamma,
         double beta, bool observable) {
        LqrProblem problem{a, b, q, r, noise_factor, gamma, beta};
        const LqrSolution sol =
            observable ? entreg_lqr_observable(problem) : entreg_lqr_unobservable(problem);
        py::dict d;
        d["p"] = sol.p;
        d["s"] = sol.s;
        d["gain_state"] = sol.gain_state;
        d["gain_cond"] = sol.gain_cond;
        d["policy_cov"] = sol.policy_cov;
        d["value_const"] = sol.value_const;
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("q_bar"), py::arg("r_bar"), py::arg("noise_factor"),
      py::arg("gamma"), py::arg("beta"), py::arg("observable") = false);

  m.def("toy_mg_exact_hypergradient", [](const Eigen::MatrixXd& logits, double beta) {
    SoftmaxTabularLeader leader;
    leader.logits = logits;
    return estimate_dict(exact_hypergradient_mg(toy_mg_build(), leader, beta));
  });
  m.def("toy_mg_objective", [](const Eigen::MatrixXd& logits, double beta) {
    SoftmaxTabularLeader leader;
    leader.logits = logits;
    return exact_leader_objective_mg(toy_mg_build(), leader, beta);
  });

  m.def(
      "run_experiment",
      [](const std::string& config_path, const std::string& out_dir) {
        return run_experiment(ExperimentConfig::from_toml_file(config_path), out_dir);
      },
      py::arg("config_path"), py::arg("out_dir") = "out");
}
