#include "bchg/tabular_mg.hpp"

#include <cmath>

#include "bchg/errors.hpp"

namespace bchg {

void TabularMarkovGame::validate() const {
  if (n_states <= 0 || n_leader_actions <= 0 || n_follower_actions <= 0) {
    throw ConfigurationError("TabularMarkovGame: empty state or action space");
  }
  if (static_cast<int>(transition.size()) != n_sab() || reward_leader.size() != n_sab() ||
      reward_follower.size() != n_sab()) {
    throw ConfigurationError("TabularMarkovGame: table size mismatch");
  }
  for (const auto& row : transition) {
    if (row.size() != n_states || std::abs(row.sum() - 1.0) > 1e-9 || row.minCoeff() < -1e-12) {
      throw ConfigurationError("TabularMarkovGame: transition row is not a distribution");
    }
  }
  if (initial.size() != n_states || std::abs(initial.sum() - 1.0) > 1e-9) {
    throw ConfigurationError("TabularMarkovGame: initial distribution invalid");
  }
  if (!reward_leader.allFinite() || !reward_follower.allFinite()) {
    throw ConfigurationError("TabularMarkovGame: rewards must be finite");
  }
  if (gamma_follower < 0.0 || gamma_follower >= 1.0 || gamma_leader < 0.0 ||
      gamma_leader >= 1.0) {
    throw DomainError("TabularMarkovGame: discount factors must lie in [0, 1)");
  }
}

}  // namespace bchg
