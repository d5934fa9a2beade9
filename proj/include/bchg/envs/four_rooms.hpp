#pragma once

#include <string>
#include <vector>

#include "bchg/tabular_cmdp.hpp"

namespace bchg {

// Gridworld level: '#' wall, '.' free, 'S' start, 'G' goal, '1' target cell.
struct FourRoomsLayout {
  int rows = 0;
  int cols = 0;
  std::vector<std::string> grid;
  std::vector<int> cell_of;  // grid position -> cell index, -1 for walls
  int n_cells = 0;
  int start_cell = -1;
  int goal_cell = -1;
  int target_cell = -1;

  static FourRoomsLayout parse(const std::string& text);
  static FourRoomsLayout load_file(const std::string& path);
  // The committed canonical 104-cell level.
  static FourRoomsLayout canonical();
};

struct FourRoomsConstants {
  double slip_probability = 1.0 / 3.0;
  double penalty_budget = 0.2;
  double penalty_cost_weight = 5.0;  // lambda
  double gamma = 0.99;               // both players
};

// Builds the configurable MDP: theta holds one softmax logit per cell plus a
// sink slot; the penalty on cell s is -budget * softmax(s; theta). States are
// the free cells plus one absorbing terminal entered from the goal, so the
// goal reward is collected once. Transitions are theta-free.
TabularCmdp four_rooms_build(const FourRoomsLayout& layout, const Eigen::VectorXd& theta,
                             const FourRoomsConstants& constants = {});

// Cells with |penalty| summed over states: budget * (1 - sink share).
double four_rooms_penalty_mass(const FourRoomsLayout& layout, const Eigen::VectorXd& theta,
                               const FourRoomsConstants& constants = {});

TabularCmdpFamily four_rooms_family(const FourRoomsLayout& layout,
                                    const FourRoomsConstants& constants = {});

}  // namespace bchg
