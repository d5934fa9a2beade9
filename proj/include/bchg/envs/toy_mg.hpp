#pragma once

#include "bchg/tabular_mg.hpp"

namespace bchg {

// Three-state leader/follower game with deterministic transitions. States
// {S, A, B} = {0, 1, 2}, leader actions {0, 1}, follower actions {s, a, b} =
// {0, 1, 2}. At S the follower picks the next state (a -> A pays both, b -> B
// pays the follower only). At A staying (s, a) self-loops at -1 per step and
// the exit b is routed by the leader (0 -> B with r_F = 2, 1 -> S with
// r_F = -1), so entering A is a lottery on the leader's routing probability.
// At B action s returns to S. gamma defaults to 0.99 for both players.
TabularMarkovGame toy_mg_build();

// Indices for readability in tests and runners.
namespace toy_mg {
constexpr int kStateS = 0;
constexpr int kStateA = 1;
constexpr int kStateB = 2;
constexpr int kActS = 0;
constexpr int kActA = 1;
constexpr int kActB = 2;
constexpr double kBeta = 5e-2;
}  // namespace toy_mg

}  // namespace bchg
