#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rmdp {

/// Tabular MDP with a (state, action) reward table. State-only rewards are
/// the row-constant special case.
struct Mdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> reward; // indexed s * n_actions + a
    double gamma = 0.0;
    std::vector<double> mu; // initial state distribution
    double r_max = 0.0;     // declared bound on |reward|

    double reward_at(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

/// Direct-parameterization policy: one probability row over actions per state.
struct PolicyParams {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs; // indexed s * n_actions + a

    double at(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
    std::span<const double> row(int s) const {
        return {probs.data() + static_cast<std::size_t>(s) * n_actions, static_cast<std::size_t>(n_actions)};
    }

    static PolicyParams uniform(int n_states, int n_actions);

    void validate(double tol = 1e-9) const;
};

/// Direct-parameterization dynamics: for each (action, state) pair a
/// probability row over next states. Storage keeps each such row contiguous;
/// at(s_next, a, s) addresses the tensor the way the gradient formulas do.
struct TransitionParams {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs; // indexed (s * n_actions + a) * n_states + s_next

    double at(int s_next, int a, int s) const {
        return probs[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s_next];
    }
    std::span<const double> row(int s, int a) const {
        return {probs.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                static_cast<std::size_t>(n_states)};
    }
    std::span<double> row(int s, int a) {
        return {probs.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                static_cast<std::size_t>(n_states)};
    }

    void validate(double tol = 1e-9) const;
};

/// Exact solve results for one (mdp, policy, transitions) triple.
struct ValueBundle {
    std::vector<double> v;    // per state
    std::vector<double> q;    // indexed s * n_actions + a
    std::vector<double> d_mu; // (1-gamma)-normalized discounted visitation
    double condition_estimate = 0.0;
};

/// Solves the Bellman linear system (I - gamma P_pi) v = r_pi by dense LU,
/// plus Q values and the occupancy measure from the same factorization.
/// Throws std::runtime_error if the solve residual exceeds 1e-6.
ValueBundle solve_value(const Mdp& mdp, const PolicyParams& policy, const TransitionParams& w);

/// mu-weighted scalar value of a bundle.
double initial_value(const Mdp& mdp, const ValueBundle& bundle);

/// A(s,a) = q(s,a) - v(s).
std::vector<double> policy_advantage(const ValueBundle& bundle, int n_states, int n_actions);

/// A^W(s',a,s) = gamma v(s') + r(s,a) - v(s), laid out like TransitionParams.
std::vector<double> w_advantage(const Mdp& mdp, const ValueBundle& bundle);

/// d/dpi(a,s) of V(mu) under direct parameterization: the raw partial on the
/// unconstrained entry, (1/(1-gamma)) d_mu(s) q(s,a).
std::vector<double> grad_value_wrt_policy(const Mdp& mdp, const PolicyParams& policy,
                                          const TransitionParams& w);

/// d/dW(s',a,s) of V(mu): (gamma/(1-gamma)) d_mu(s) pi(a,s) v(s'), laid out
/// like TransitionParams. Matches central finite differences of solve_value.
std::vector<double> grad_value_wrt_transitions(const Mdp& mdp, const PolicyParams& policy,
                                               const TransitionParams& w);

// --- flat text serialization -------------------------------------------------
// Key-value header (n_states, n_actions, gamma, r_max) followed by the
// labeled whitespace-separated tables: reward, mu, and optionally the nominal
// transition tensor in (s',a,s) row-major order. Values are written with 17
// significant digits so round trips are bit exact.

void save_mdp(std::ostream& out, const Mdp& mdp, const TransitionParams* nominal = nullptr);
void save_mdp(const std::string& path, const Mdp& mdp, const TransitionParams* nominal = nullptr);
std::pair<Mdp, std::optional<TransitionParams>> load_mdp(std::istream& in);
std::pair<Mdp, std::optional<TransitionParams>> load_mdp(const std::string& path);

void save_policy(std::ostream& out, const PolicyParams& policy);
void save_policy(const std::string& path, const PolicyParams& policy);
PolicyParams load_policy(std::istream& in);
PolicyParams load_policy(const std::string& path);

} // namespace rmdp
