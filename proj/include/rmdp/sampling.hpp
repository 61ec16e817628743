#pragma once

#include "rmdp/mdp.hpp"
#include "rmdp/rng.hpp"

#include <vector>

namespace rmdp {

/// Bellman system M v = r with M = I - gamma P_pi, plus the initial-state
/// row of M^{-1} (one extra linear solve).
struct ValueSystem {
    int n_states = 0;
    std::vector<double> m;          // row-major n_states x n_states
    std::vector<double> r;          // expected per-state reward under the policy
    std::vector<double> m_inv_row0; // first row of M^{-1}
};

ValueSystem build_value_system(const Mdp& mdp, const PolicyParams& policy, const TransitionParams& w);

/// Per-state sample counts h with sum h <= budget.
struct SampleAllocation {
    std::vector<double> h;
    double budget = 0.0;
    bool degenerate_uniform = false; // all inverse-row weights were zero
};

/// KKT solution of  min sum_i w_i psi sigma^2 / h_i  s.t.  sum h <= budget:
/// h_i = budget * sqrt(w_i) / sum_k sqrt(w_k) with w_i = |M^{-1}_{0,i}|.
SampleAllocation allocate_samples(const ValueSystem& system, double budget);

struct ValueEstimate {
    std::vector<double> v_hat;
    double initial_value = 0.0;   // v_hat at state 0
    bool used_true_reward = false; // some state had h = 0
};

/// Reward estimate per state = mean of round(h) iid Gaussian draws centered
/// at the true reward with sd noise_sd (floor of one draw for sampled
/// states); the value estimate solves M v_hat = r_hat.
ValueEstimate estimate_value(const Mdp& mdp, const PolicyParams& policy, const TransitionParams& w,
                             const SampleAllocation& alloc, double noise_sd, Rng& rng);

struct ErrorBound {
    double bound = 0.0;
    double confidence = 0.0; // 1 - 1/psi^2
    bool infinite = false;   // a zero allocation met a nonzero inverse weight
};

/// bound = sum_i |M^{-1}_{0,i}| psi sigma^2 / h_i, holding with probability
/// at least 1 - 1/psi^2 by the Chebyshev step.
ErrorBound chebyshev_error_bound(const ValueSystem& system, const SampleAllocation& alloc,
                                 double noise_sd, double psi);

} // namespace rmdp
