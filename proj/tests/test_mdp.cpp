#include "rmdp/mdp.hpp"

#include "rmdp/environments.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace rmdp;

namespace {

Mdp one_state_loop(double gamma, double reward) {
    Mdp mdp;
    mdp.n_states = 1;
    mdp.n_actions = 1;
    mdp.gamma = gamma;
    mdp.reward = {reward};
    mdp.mu = {1.0};
    mdp.r_max = std::abs(reward);
    return mdp;
}

TransitionParams self_loop(int n_states, int n_actions) {
    TransitionParams w;
    w.n_states = n_states;
    w.n_actions = n_actions;
    w.probs.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            w.row(s, a)[s] = 1.0;
    return w;
}

} // namespace

TEST_CASE("geometric series value on a self loop") {
    Mdp mdp = one_state_loop(0.9, 1.0);
    auto bundle = solve_value(mdp, PolicyParams::uniform(1, 1), self_loop(1, 1));
    CHECK(bundle.v[0] == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(bundle.d_mu[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("two-state chain values and occupancy") {
    // s0 -> s1 -> s1, r(s0) = 0, r(s1) = 1, gamma = 0.5, mu = (1, 0)
    Mdp mdp;
    mdp.n_states = 2;
    mdp.n_actions = 1;
    mdp.gamma = 0.5;
    mdp.reward = {0.0, 1.0};
    mdp.mu = {1.0, 0.0};
    mdp.r_max = 1.0;
    TransitionParams w;
    w.n_states = 2;
    w.n_actions = 1;
    w.probs = {0.0, 1.0, 0.0, 1.0};
    auto policy = PolicyParams::uniform(2, 1);

    auto bundle = solve_value(mdp, policy, w);
    CHECK(bundle.v[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(bundle.v[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(bundle.d_mu[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(bundle.d_mu[1] == doctest::Approx(0.5).epsilon(1e-12));

    auto v_iter = testkit::iterative_values(mdp, policy, w);
    CHECK(v_iter[0] == doctest::Approx(bundle.v[0]).epsilon(1e-10));
    auto occ = testkit::rollout_occupancy(mdp, policy, w, 200);
    CHECK(occ[0] == doctest::Approx(bundle.d_mu[0]).epsilon(1e-10));
    CHECK(occ[1] == doctest::Approx(bundle.d_mu[1]).epsilon(1e-10));
}

TEST_CASE("gridworld value matches fixed-point evaluation") {
    GridSpec spec;
    auto [mdp, nominal] = make_gridworld(spec);
    auto policy = PolicyParams::uniform(mdp.n_states, mdp.n_actions);
    auto bundle = solve_value(mdp, policy, nominal);
    auto v_iter = testkit::iterative_values(mdp, policy, nominal, 1e-13);
    for (int s = 0; s < mdp.n_states; ++s)
        CHECK(bundle.v[s] == doctest::Approx(v_iter[s]).epsilon(1e-8));
}

TEST_CASE("bundle invariants on random instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto [mdp, w] = random_mdp(2 + seed % 4, 1 + seed % 3, 0.6 + 0.05 * (seed % 7), seed);
        Rng rng(seed + 100);
        PolicyParams policy = PolicyParams::uniform(mdp.n_states, mdp.n_actions);
        for (double& x : policy.probs)
            x = rng.exponential(1.0);
        project_simplex_rows(policy.probs, mdp.n_actions);

        auto bundle = solve_value(mdp, policy, w);

        // Bellman residual
        for (int s = 0; s < mdp.n_states; ++s) {
            double rhs = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double exp_v = 0.0;
                auto row = w.row(s, a);
                for (int sn = 0; sn < mdp.n_states; ++sn)
                    exp_v += row[sn] * bundle.v[sn];
                rhs += policy.at(s, a) * (mdp.reward_at(s, a) + mdp.gamma * exp_v);
            }
            CHECK(std::abs(bundle.v[s] - rhs) <= 1e-8);
        }

        // v = sum_a pi q
        for (int s = 0; s < mdp.n_states; ++s) {
            double vq = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a)
                vq += policy.at(s, a) * bundle.q[static_cast<std::size_t>(s) * mdp.n_actions + a];
            CHECK(std::abs(bundle.v[s] - vq) <= 1e-8);
        }

        // occupancy is a distribution dominating (1-gamma) mu
        double total = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            CHECK(bundle.d_mu[s] >= -1e-12);
            CHECK(bundle.d_mu[s] >= (1.0 - mdp.gamma) * mdp.mu[s] - 1e-10);
            total += bundle.d_mu[s];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-8));

        // value bounds
        for (double v : bundle.v)
            CHECK(std::abs(v) <= mdp.r_max / (1.0 - mdp.gamma) + 1e-9);
    }
}

TEST_CASE("policy advantage") {
    SUBCASE("deterministic policy has zero advantage at its action") {
        auto [mdp, w] = random_mdp(3, 2, 0.8, 4);
        PolicyParams det;
        det.n_states = 3;
        det.n_actions = 2;
        det.probs = {1, 0, 0, 1, 1, 0};
        auto bundle = solve_value(mdp, det, w);
        auto adv = policy_advantage(bundle, 3, 2);
        CHECK(std::abs(adv[0]) <= 1e-10); // state 0 picks action 0
        CHECK(std::abs(adv[3]) <= 1e-10); // state 1 picks action 1
        CHECK(std::abs(adv[4]) <= 1e-10); // state 2 picks action 0
    }

    SUBCASE("one-state two-action bandit") {
        Mdp mdp;
        mdp.n_states = 1;
        mdp.n_actions = 2;
        mdp.gamma = 0.0;
        mdp.reward = {0.0, 1.0};
        mdp.mu = {1.0};
        mdp.r_max = 1.0;
        auto bundle = solve_value(mdp, PolicyParams::uniform(1, 2), self_loop(1, 2));
        auto adv = policy_advantage(bundle, 1, 2);
        CHECK(adv[0] == doctest::Approx(-0.5).epsilon(1e-12));
        CHECK(adv[1] == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("pi-weighted advantage vanishes") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto [mdp, w] = random_mdp(4, 3, 0.85, seed);
            Rng rng(seed);
            PolicyParams policy = PolicyParams::uniform(4, 3);
            for (double& x : policy.probs)
                x = rng.exponential(1.0);
            project_simplex_rows(policy.probs, 3);
            auto bundle = solve_value(mdp, policy, w);
            auto adv = policy_advantage(bundle, 4, 3);
            for (int s = 0; s < 4; ++s) {
                double weighted = 0.0;
                for (int a = 0; a < 3; ++a)
                    weighted += policy.at(s, a) * adv[static_cast<std::size_t>(s) * 3 + a];
                CHECK(std::abs(weighted) <= 1e-10);
            }
        }
    }
}

TEST_CASE("w advantage") {
    SUBCASE("vanishes on the self loop fixed point") {
        Mdp mdp = one_state_loop(0.9, 1.0);
        auto bundle = solve_value(mdp, PolicyParams::uniform(1, 1), self_loop(1, 1));
        auto adv = w_advantage(mdp, bundle);
        CHECK(std::abs(adv[0]) <= 1e-10);
    }

    SUBCASE("P-weighted advantage equals q - v") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto [mdp, w] = random_mdp(4, 2, 0.9, seed + 50);
            auto policy = PolicyParams::uniform(4, 2);
            auto bundle = solve_value(mdp, policy, w);
            auto adv = w_advantage(mdp, bundle);
            for (int s = 0; s < 4; ++s)
                for (int a = 0; a < 2; ++a) {
                    double weighted = 0.0;
                    auto row = w.row(s, a);
                    for (int sn = 0; sn < 4; ++sn)
                        weighted += row[sn] * adv[(static_cast<std::size_t>(s) * 2 + a) * 4 + sn];
                    const double expect =
                        bundle.q[static_cast<std::size_t>(s) * 2 + a] - bundle.v[s];
                    CHECK(weighted == doctest::Approx(expect).epsilon(1e-9));
                }
        }
    }
}

TEST_CASE("performance difference identities") {
    // policy side: V^{pi'} - V^{pi} = 1/(1-gamma) sum d^{pi'} pi' A^{pi}
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto [mdp, w] = random_mdp(2 + seed % 4, 2 + seed % 2, 0.7 + 0.02 * (seed % 10), seed);
        Rng rng(seed + 7);
        const int S = mdp.n_states;
        const int A = mdp.n_actions;

        auto draw_policy = [&]() {
            PolicyParams p = PolicyParams::uniform(S, A);
            for (double& x : p.probs)
                x = rng.exponential(1.0);
            project_simplex_rows(p.probs, A);
            return p;
        };
        PolicyParams pi = draw_policy();
        PolicyParams pi2 = draw_policy();

        auto base = solve_value(mdp, pi, w);
        auto other = solve_value(mdp, pi2, w);
        auto adv = policy_advantage(base, S, A);

        double rhs = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                rhs += other.d_mu[s] * pi2.at(s, a) * adv[static_cast<std::size_t>(s) * A + a];
        rhs /= 1.0 - mdp.gamma;
        const double lhs = initial_value(mdp, other) - initial_value(mdp, base);
        CHECK(std::abs(lhs - rhs) <= 1e-7);
    }

    // transition side: V_W - V_{W'} = 1/(1-gamma) sum d^W P_W pi A^{W'}
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto [mdp, w] = random_mdp(2 + seed % 3, 2, 0.8, seed + 200);
        Rng rng(seed + 13);
        const int S = mdp.n_states;
        const int A = mdp.n_actions;
        TransitionParams w2 = random_transitions(S, A, rng);
        PolicyParams pi = PolicyParams::uniform(S, A);

        auto bundle_w = solve_value(mdp, pi, w);
        auto bundle_w2 = solve_value(mdp, pi, w2);
        auto adv = w_advantage(mdp, bundle_w2);

        double rhs = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                auto row = w.row(s, a);
                for (int sn = 0; sn < S; ++sn)
                    rhs += bundle_w.d_mu[s] * row[sn] * pi.at(s, a) *
                           adv[(static_cast<std::size_t>(s) * A + a) * S + sn];
            }
        rhs /= 1.0 - mdp.gamma;
        const double lhs = initial_value(mdp, bundle_w) - initial_value(mdp, bundle_w2);
        CHECK(std::abs(lhs - rhs) <= 1e-7);
    }
}

TEST_CASE("gradients match finite differences") {
    SUBCASE("gamma = 0 closed forms") {
        auto [mdp, w] = random_mdp(3, 2, 0.0, 9);
        auto policy = PolicyParams::uniform(3, 2);
        auto grad_pi = grad_value_wrt_policy(mdp, policy, w);
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a)
                CHECK(grad_pi[static_cast<std::size_t>(s) * 2 + a] ==
                      doctest::Approx(mdp.mu[s] * mdp.reward_at(s, a)).epsilon(1e-10));
        auto grad_w = grad_value_wrt_transitions(mdp, policy, w);
        for (double g : grad_w)
            CHECK(std::abs(g) <= 1e-12);
    }

    SUBCASE("random instances") {
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            auto [mdp, w] = random_mdp(2 + seed % 4, 2 + seed % 2, 0.75, seed + 31);
            Rng rng(seed);
            PolicyParams policy = PolicyParams::uniform(mdp.n_states, mdp.n_actions);
            for (double& x : policy.probs)
                x = rng.exponential(1.0);
            project_simplex_rows(policy.probs, mdp.n_actions);

            auto grad_pi = grad_value_wrt_policy(mdp, policy, w);
            auto fd_pi = testkit::fd_grad_policy(mdp, policy, w);
            CHECK(testkit::max_rel_error(grad_pi, fd_pi) <= 1e-5);

            auto grad_w = grad_value_wrt_transitions(mdp, policy, w);
            auto fd_w = testkit::fd_grad_transitions(mdp, policy, w);
            CHECK(testkit::max_rel_error(grad_w, fd_w) <= 1e-5);
        }
    }

    SUBCASE("gridworld uniform policy") {
        GridSpec spec;
        spec.width = 3; // keep the finite-difference sweep cheap
        spec.height = 3;
        auto [mdp, nominal] = make_gridworld(spec);
        auto policy = PolicyParams::uniform(mdp.n_states, mdp.n_actions);
        auto grad_pi = grad_value_wrt_policy(mdp, policy, nominal);
        auto fd_pi = testkit::fd_grad_policy(mdp, policy, nominal);
        CHECK(testkit::max_rel_error(grad_pi, fd_pi) <= 1e-5);
    }

    SUBCASE("unreachable states carry zero gradient") {
        // state 2 has no inflow and no mu mass
        Mdp mdp;
        mdp.n_states = 3;
        mdp.n_actions = 1;
        mdp.gamma = 0.9;
        mdp.reward = {1.0, 0.5, 2.0};
        mdp.mu = {0.6, 0.4, 0.0};
        mdp.r_max = 2.0;
        TransitionParams w;
        w.n_states = 3;
        w.n_actions = 1;
        w.probs = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        auto policy = PolicyParams::uniform(3, 1);
        auto grad_w = grad_value_wrt_transitions(mdp, policy, w);
        for (int sn = 0; sn < 3; ++sn)
            CHECK(grad_w[(2 * 1 + 0) * 3 + sn] == doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("validation catches malformed inputs") {
    Mdp mdp = one_state_loop(0.9, 1.0);
    CHECK_NOTHROW(mdp.validate());
    mdp.gamma = 1.0;
    CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);
    mdp.gamma = 0.9;
    mdp.mu = {0.5};
    CHECK_THROWS_AS(mdp.validate(), std::invalid_argument);

    PolicyParams p = PolicyParams::uniform(2, 2);
    p.probs[0] = 0.9;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("serialization round trips bit exactly") {
    auto [mdp, w] = random_mdp(4, 3, 0.91, 77);

    std::ostringstream first;
    save_mdp(first, mdp, &w);
    std::istringstream parse(first.str());
    auto [loaded, nominal] = load_mdp(parse);
    REQUIRE(nominal.has_value());
    std::ostringstream second;
    save_mdp(second, loaded, &*nominal);
    CHECK(first.str() == second.str());
    CHECK(loaded.reward == mdp.reward);
    CHECK(loaded.mu == mdp.mu);
    CHECK(nominal->probs == w.probs);

    std::ostringstream pol_first;
    PolicyParams policy = PolicyParams::uniform(4, 3);
    policy.probs[0] = 0.123456789012345678;
    policy.probs[1] = 1.0 - policy.probs[0] - policy.probs[2];
    save_policy(pol_first, policy);
    std::istringstream pol_parse(pol_first.str());
    auto policy2 = load_policy(pol_parse);
    CHECK(policy2.probs == policy.probs);
}
