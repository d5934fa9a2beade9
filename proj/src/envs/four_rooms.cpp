#include "bchg/envs/four_rooms.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "bchg/errors.hpp"

namespace bchg {

namespace {

const char* kCanonicalMap =
    "#############\n"
    "#.....#.G...#\n"
    "#.....#.....#\n"
    "#...........#\n"
    "#.....#.....#\n"
    "#.....#.....#\n"
    "##.####..1..#\n"
    "#.....###.###\n"
    "#.....#.....#\n"
    "#.....#.....#\n"
    "#...........#\n"
    "#S....#.....#\n"
    "#############\n";

}  // namespace

FourRoomsLayout FourRoomsLayout::parse(const std::string& text) {
  FourRoomsLayout layout;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) layout.grid.push_back(line);
  }
  if (layout.grid.empty()) throw ConfigurationError("FourRoomsLayout: empty map");
  layout.rows = static_cast<int>(layout.grid.size());
  layout.cols = static_cast<int>(layout.grid[0].size());
  layout.cell_of.assign(static_cast<size_t>(layout.rows) * layout.cols, -1);
  for (int r = 0; r < layout.rows; ++r) {
    if (static_cast<int>(layout.grid[r].size()) != layout.cols) {
      throw ConfigurationError("FourRoomsLayout: ragged map rows");
    }
    for (int c = 0; c < layout.cols; ++c) {
      const char ch = layout.grid[r][c];
      if (ch == '#') continue;
      const int cell = layout.n_cells++;
      layout.cell_of[r * layout.cols + c] = cell;
      if (ch == 'S') layout.start_cell = cell;
      if (ch == 'G') layout.goal_cell = cell;
      if (ch == '1') layout.target_cell = cell;
      if (ch != '.' && ch != 'S' && ch != 'G' && ch != '1') {
        throw ConfigurationError("FourRoomsLayout: unknown map character");
      }
    }
  }
  if (layout.start_cell < 0 || layout.goal_cell < 0 || layout.target_cell < 0) {
    throw ConfigurationError("FourRoomsLayout: map must mark S, G and 1");
  }
  return layout;
}

FourRoomsLayout FourRoomsLayout::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("FourRoomsLayout: cannot open map file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

FourRoomsLayout FourRoomsLayout::canonical() { return parse(kCanonicalMap); }

namespace {

struct PenaltySoftmax {
  Eigen::VectorXd probs;  // n_cells + 1 entries, last is the sink
};

PenaltySoftmax penalty_softmax(const Eigen::VectorXd& theta) {
  PenaltySoftmax p;
  Eigen::VectorXd z = (theta.array() - theta.maxCoeff()).exp();
  p.probs = z / z.sum();
  return p;
}

}  // namespace

double four_rooms_penalty_mass(const FourRoomsLayout& layout, const Eigen::VectorXd& theta,
                               const FourRoomsConstants& constants) {
  if (theta.size() != layout.n_cells + 1) {
    throw ConfigurationError("four_rooms: theta must have one slot per cell plus a sink");
  }
  const auto p = penalty_softmax(theta);
  return constants.penalty_budget * (1.0 - p.probs[layout.n_cells]);
}

TabularCmdp four_rooms_build(const FourRoomsLayout& layout, const Eigen::VectorXd& theta,
                             const FourRoomsConstants& constants) {
  if (theta.size() != layout.n_cells + 1) {
    throw ConfigurationError("four_rooms: theta must have one slot per cell plus a sink");
  }
  const int n_cells = layout.n_cells;
  const int terminal = n_cells;  // absorbing state after the goal
  const int n_states = n_cells + 1;
  const int n_actions = 4;  // up, down, right, left

  auto shared_probs = std::make_shared<Eigen::VectorXd>(penalty_softmax(theta).probs);
  const Eigen::VectorXd& probs = *shared_probs;
  const double budget = constants.penalty_budget;
  const double lambda = constants.penalty_cost_weight;
  const double penalty_mass = budget * (1.0 - probs[n_cells]);

  TabularCmdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.theta = theta;
  m.gamma_follower = constants.gamma;
  m.gamma_leader = constants.gamma;
  m.initial = Eigen::VectorXd::Zero(n_states);
  m.initial[layout.start_cell] = 1.0;

  // cell -> grid position
  std::vector<int> pos_of(n_cells);
  for (int r = 0; r < layout.rows; ++r) {
    for (int c = 0; c < layout.cols; ++c) {
      const int cell = layout.cell_of[r * layout.cols + c];
      if (cell >= 0) pos_of[cell] = r * layout.cols + c;
    }
  }
  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, 1, -1};

  auto move_target = [&](int cell, int action) {
    const int r = pos_of[cell] / layout.cols;
    const int c = pos_of[cell] % layout.cols;
    const int nr = r + dr[action];
    const int nc = c + dc[action];
    if (nr < 0 || nr >= layout.rows || nc < 0 || nc >= layout.cols) return cell;
    const int target = layout.cell_of[nr * layout.cols + nc];
    return target >= 0 ? target : cell;  // walls bounce back
  };

  m.transition.assign(n_actions, Eigen::MatrixXd::Zero(n_states, n_states));
  const double slip_each = constants.slip_probability / 3.0;
  for (int b = 0; b < n_actions; ++b) {
    for (int cell = 0; cell < n_cells; ++cell) {
      if (cell == layout.goal_cell) {
        m.transition[b](cell, terminal) = 1.0;
        continue;
      }
      m.transition[b](cell, move_target(cell, b)) += 1.0 - constants.slip_probability;
      for (int other = 0; other < n_actions; ++other) {
        if (other == b) continue;
        m.transition[b](cell, move_target(cell, other)) += slip_each;
      }
    }
    m.transition[b](terminal, terminal) = 1.0;
  }

  m.reward_follower.setZero(n_states, n_actions);
  m.reward_leader.setZero(n_states, n_actions);
  for (int cell = 0; cell < n_cells; ++cell) {
    const double penalty = -budget * probs[cell];
    double r_f = penalty;
    if (cell == layout.goal_cell) r_f += 1.0;
    double r_l = 0.0;
    if (cell == layout.target_cell) r_l += 1.0;
    if (cell == layout.goal_cell) r_l -= lambda * penalty_mass;
    for (int b = 0; b < n_actions; ++b) {
      m.reward_follower(cell, b) = r_f;
      m.reward_leader(cell, b) = r_l;
    }
  }

  const int goal = layout.goal_cell;
  const int dim = n_cells + 1;
  // d penalty(s) / d theta_j = -budget * pi_s (delta_sj - pi_j)
  m.grad_reward_follower = [shared_probs, budget, n_cells, dim](int s, int) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    if (s >= n_cells) return g;  // terminal
    const auto& pi = *shared_probs;
    g = budget * pi[s] * pi;
    g[s] -= budget * pi[s];
    return g;
  };
  // leader penalty term: -lambda I{s=G} * budget * (1 - pi_sink)
  m.grad_reward_leader = [shared_probs, budget, lambda, goal, n_cells, dim](int s, int) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    if (s != goal) return g;
    const auto& pi = *shared_probs;
    // d pi_sink / d theta_j = pi_sink (delta_{j,sink} - pi_j)
    g = -lambda * budget * pi[n_cells] * pi;
    g[n_cells] += lambda * budget * pi[n_cells];
    return g;
  };
  return m;
}

TabularCmdpFamily four_rooms_family(const FourRoomsLayout& layout,
                                    const FourRoomsConstants& constants) {
  TabularCmdpFamily family;
  family.dim = layout.n_cells + 1;
  family.theta_free_transitions = true;
  family.theta_free_initial = true;
  family.build = [layout, constants](const Eigen::VectorXd& theta) {
    return four_rooms_build(layout, theta, constants);
  };
  return family;
}

}  // namespace bchg
