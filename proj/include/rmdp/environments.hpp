#pragma once

#include "rmdp/geometry.hpp"
#include "rmdp/mdp.hpp"
#include "rmdp/rng.hpp"

#include <cstdint>
#include <utility>

namespace rmdp {

/// GridWorld layout: start at corner (0,0), goal at the opposite corner,
/// four move actions, plus a zero-reward absorbing sink entered right after
/// the goal pays out.
struct GridSpec {
    int width = 5;
    int height = 5;
    double goal_reward = 10.0;
    double step_reward = -1.0;
    double slip = 0.1;
    double gamma = 0.95;
    std::uint64_t seed = 0;
};

/// Builds the MDP and its nominal dynamics. Intended moves land with
/// probability 1-slip, the rest spreads evenly over the other three
/// directions; off-grid moves stay in place. Rewards are state-based:
/// goal_reward at the goal, 0 at the sink, step_reward elsewhere.
std::pair<Mdp, TransitionParams> make_gridworld(const GridSpec& spec);

/// Index helpers for the gridworld layout.
int gridworld_state(const GridSpec& spec, int x, int y);
int gridworld_goal_state(const GridSpec& spec);
int gridworld_sink_state(const GridSpec& spec);

/// Wraps a nominal tensor in a q-ball of radius tau. With randomize_nominal,
/// the center is the simplex projection of the nominal plus seeded
/// Dirichlet-style jitter (scale 0.25 per row).
UncertaintySet make_uncertainty_set(const TransitionParams& nominal, int q, double tau, Rng& rng,
                                    bool randomize_nominal = false);

/// Seeded random instance: rewards uniform in [-1,1], flat-Dirichlet
/// transition rows, uniform initial distribution.
std::pair<Mdp, TransitionParams> random_mdp(int n_states, int n_actions, double gamma,
                                            std::uint64_t seed);

/// A transition tensor with every row drawn from a flat Dirichlet; used for
/// uniform-feasible restarts.
TransitionParams random_transitions(int n_states, int n_actions, Rng& rng);

} // namespace rmdp
