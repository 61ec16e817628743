#include "rmdp/environments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rmdp {

int gridworld_state(const GridSpec& spec, int x, int y) { return y * spec.width + x; }
int gridworld_goal_state(const GridSpec& spec) { return spec.width * spec.height - 1; }
int gridworld_sink_state(const GridSpec& spec) { return spec.width * spec.height; }

std::pair<Mdp, TransitionParams> make_gridworld(const GridSpec& spec) {
    if (spec.width < 2 || spec.height < 2)
        throw std::invalid_argument("make_gridworld: grid must be at least 2x2");
    if (!(spec.slip >= 0.0 && spec.slip < 1.0))
        throw std::invalid_argument("make_gridworld: slip must lie in [0, 1)");

    const int cells = spec.width * spec.height;
    const int S = cells + 1; // + absorbing sink
    const int A = 4;
    const int goal = gridworld_goal_state(spec);
    const int sink = gridworld_sink_state(spec);

    Mdp mdp;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.gamma = spec.gamma;
    mdp.mu.assign(S, 0.0);
    mdp.mu[0] = 1.0; // corner (0,0)
    mdp.reward.resize(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s) {
        const double r = s == goal ? spec.goal_reward : (s == sink ? 0.0 : spec.step_reward);
        for (int a = 0; a < A; ++a)
            mdp.reward[static_cast<std::size_t>(s) * A + a] = r;
    }
    mdp.r_max = std::max({std::abs(spec.goal_reward), std::abs(spec.step_reward), 0.0});

    TransitionParams nominal;
    nominal.n_states = S;
    nominal.n_actions = A;
    nominal.probs.assign(static_cast<std::size_t>(S) * A * S, 0.0);

    // up, down, left, right
    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {-1, 1, 0, 0};

    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const int s = gridworld_state(spec, x, y);
            for (int a = 0; a < A; ++a) {
                auto row = nominal.row(s, a);
                if (s == goal) {
                    row[sink] = 1.0; // payout collected, episode over
                    continue;
                }
                for (int dir = 0; dir < A; ++dir) {
                    const double mass = dir == a ? 1.0 - spec.slip : spec.slip / 3.0;
                    if (mass == 0.0)
                        continue;
                    int nx = x + dx[dir];
                    int ny = y + dy[dir];
                    if (nx < 0 || nx >= spec.width || ny < 0 || ny >= spec.height) {
                        nx = x;
                        ny = y;
                    }
                    row[gridworld_state(spec, nx, ny)] += mass;
                }
            }
        }
    }
    for (int a = 0; a < A; ++a)
        nominal.row(sink, a)[sink] = 1.0;

    mdp.validate();
    nominal.validate();
    return {std::move(mdp), std::move(nominal)};
}

namespace {

// Flat Dirichlet draw: normalized iid Exp(1) variates.
void dirichlet_row(std::span<double> row, Rng& rng) {
    double total = 0.0;
    for (double& x : row) {
        x = rng.exponential(1.0);
        total += x;
    }
    for (double& x : row)
        x /= total;
}

} // namespace

UncertaintySet make_uncertainty_set(const TransitionParams& nominal, int q, double tau, Rng& rng,
                                    bool randomize_nominal) {
    if (!(tau >= 0.0))
        throw std::invalid_argument("make_uncertainty_set: tau must be nonnegative");
    UncertaintySet set;
    set.q = q;
    set.tau = tau;
    set.nominal = nominal;
    if (randomize_nominal) {
        const int S = nominal.n_states;
        std::vector<double> jitter(S);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < nominal.n_actions; ++a) {
                dirichlet_row(jitter, rng);
                auto row = set.nominal.row(s, a);
                for (int sn = 0; sn < S; ++sn)
                    row[sn] += 0.25 * jitter[sn];
                project_simplex(row);
            }
    }
    set.validate();
    return set;
}

std::pair<Mdp, TransitionParams> random_mdp(int n_states, int n_actions, double gamma,
                                            std::uint64_t seed) {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("random_mdp: counts must be positive");
    Rng rng(seed);
    Mdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.r_max = 1.0;
    mdp.mu.assign(n_states, 1.0 / n_states);
    mdp.reward.resize(static_cast<std::size_t>(n_states) * n_actions);
    for (double& r : mdp.reward)
        r = rng.uniform(-1.0, 1.0);

    TransitionParams w = random_transitions(n_states, n_actions, rng);
    mdp.validate();
    return {std::move(mdp), std::move(w)};
}

TransitionParams random_transitions(int n_states, int n_actions, Rng& rng) {
    TransitionParams w;
    w.n_states = n_states;
    w.n_actions = n_actions;
    w.probs.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            dirichlet_row(w.row(s, a), rng);
    return w;
}

} // namespace rmdp
