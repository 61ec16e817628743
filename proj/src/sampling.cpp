#include "rmdp/sampling.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rmdp {

ValueSystem build_value_system(const Mdp& mdp, const PolicyParams& policy,
                               const TransitionParams& w) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    if (policy.n_states != S || policy.n_actions != A || w.n_states != S || w.n_actions != A)
        throw std::invalid_argument("build_value_system: shape mismatch");

    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(S, S);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double pa = policy.at(s, a);
            r(s) += pa * mdp.reward_at(s, a);
            if (pa == 0.0)
                continue;
            auto next = w.row(s, a);
            for (int sn = 0; sn < S; ++sn)
                m(s, sn) -= mdp.gamma * pa * next[sn];
        }

    // Row 0 of M^{-1} from one transpose solve: M^T y = e_0.
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(S);
    e0(0) = 1.0;
    Eigen::VectorXd row0 = lu.transpose().solve(e0);
    if (!row0.allFinite())
        throw std::runtime_error("build_value_system: singular Bellman system");

    ValueSystem system;
    system.n_states = S;
    system.m.resize(static_cast<std::size_t>(S) * S);
    for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j)
            system.m[static_cast<std::size_t>(i) * S + j] = m(i, j);
    system.r.assign(r.data(), r.data() + S);
    system.m_inv_row0.assign(row0.data(), row0.data() + S);
    return system;
}

SampleAllocation allocate_samples(const ValueSystem& system, double budget) {
    if (!(budget > 0.0))
        throw std::invalid_argument("allocate_samples: budget must be positive");
    const int S = system.n_states;
    SampleAllocation alloc;
    alloc.budget = budget;
    alloc.h.assign(S, 0.0);

    double denom = 0.0;
    for (double w : system.m_inv_row0)
        denom += std::sqrt(std::abs(w));
    if (denom == 0.0) {
        // Degenerate inverse row; fall back to a uniform split.
        alloc.degenerate_uniform = true;
        for (double& h : alloc.h)
            h = budget / S;
        return alloc;
    }
    for (int i = 0; i < S; ++i)
        alloc.h[i] = budget * std::sqrt(std::abs(system.m_inv_row0[i])) / denom;
    return alloc;
}

ValueEstimate estimate_value(const Mdp& mdp, const PolicyParams& policy, const TransitionParams& w,
                             const SampleAllocation& alloc, double noise_sd, Rng& rng) {
    ValueSystem system = build_value_system(mdp, policy, w);
    const int S = system.n_states;
    if (static_cast<int>(alloc.h.size()) != S)
        throw std::invalid_argument("estimate_value: allocation shape mismatch");
    double total = 0.0;
    for (double h : alloc.h)
        total += h;
    if (!(total > 0.0))
        throw std::invalid_argument("estimate_value: zero total budget");

    ValueEstimate est;
    Eigen::VectorXd r_hat(S);
    // One substream per state, so equal-seed sources share draws across
    // different allocations (common random numbers in comparisons).
    const Rng base(rng.raw());
    for (int s = 0; s < S; ++s) {
        if (alloc.h[s] > 0.0) {
            Rng state_rng = base.derive(static_cast<std::uint64_t>(s));
            const long n = std::max(1L, std::lround(alloc.h[s]));
            double mean = 0.0;
            for (long k = 0; k < n; ++k)
                mean += system.r[s] + noise_sd * state_rng.gaussian();
            r_hat(s) = mean / static_cast<double>(n);
        } else {
            r_hat(s) = system.r[s];
            est.used_true_reward = true;
        }
    }

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
        system.m.data(), S, S);
    Eigen::VectorXd v_hat = Eigen::MatrixXd(m).partialPivLu().solve(r_hat);
    est.v_hat.assign(v_hat.data(), v_hat.data() + S);
    est.initial_value = est.v_hat[0];
    return est;
}

ErrorBound chebyshev_error_bound(const ValueSystem& system, const SampleAllocation& alloc,
                                 double noise_sd, double psi) {
    if (!(psi > 1.0))
        throw std::invalid_argument("chebyshev_error_bound: psi must exceed 1");
    ErrorBound out;
    out.confidence = 1.0 - 1.0 / (psi * psi);
    for (int i = 0; i < system.n_states; ++i) {
        const double weight = std::abs(system.m_inv_row0[i]);
        if (weight == 0.0)
            continue;
        if (alloc.h[i] <= 0.0) {
            out.infinite = true;
            out.bound = std::numeric_limits<double>::infinity();
            return out;
        }
        out.bound += weight * psi * noise_sd * noise_sd / alloc.h[i];
    }
    return out;
}

} // namespace rmdp
