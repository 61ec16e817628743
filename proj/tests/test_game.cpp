#include "rmdp/game.hpp"

#include "rmdp/environments.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace rmdp;

namespace {

GameConfig small_game(std::uint64_t seed, double tau, int rounds = 40) {
    auto [mdp, nominal] = random_mdp(2, 2, 0.8, seed);
    GameConfig cfg;
    cfg.mdp = std::move(mdp);
    cfg.uncertainty.nominal = std::move(nominal);
    cfg.uncertainty.q = 2;
    cfg.uncertainty.tau = tau;
    cfg.rounds = rounds;
    cfg.seed = seed;
    cfg.oracle_cfg_pi.max_iters = 150;
    cfg.oracle_cfg_pi.stagnation_tol = 1e-9;
    cfg.oracle_cfg_w = cfg.oracle_cfg_pi;
    cfg.eta_pi = 2.0; // gentle noise for the tiny instances
    cfg.eta_w = 2.0;
    cfg.eval_stride = 10;
    return cfg;
}

} // namespace

TEST_CASE("zero rounds yield an empty trace") {
    GameConfig cfg = small_game(1, 0.2, 0);
    CHECK(run_game(cfg).rounds.empty());
    CHECK(drpg_baseline(cfg).rounds.empty());
}

TEST_CASE("singleton uncertainty reduces to policy optimization") {
    GameConfig cfg = small_game(3, 0.0, 60);
    auto trace = run_game(cfg);
    REQUIRE(trace.rounds.size() == 60);

    // W stays pinned at the nominal
    for (const auto& rec : trace.rounds)
        CHECK(rec.w.probs == cfg.uncertainty.nominal.probs);

    // final policy value approaches the grid optimum over policies
    testkit::GridSearch grid;
    grid.lo = {0.0, 0.0};
    grid.hi = {1.0, 1.0};
    grid.points_per_axis = 101;
    grid.zoom_rounds = 3;
    grid.run([&](std::span<const double> params) {
        auto pi = testkit::policy_from_params(2, params);
        return -testkit::value_at_mu(cfg.mdp, pi, cfg.uncertainty.nominal);
    });
    const double best_value = -grid.best_value;
    double reached = -1e300;
    for (const auto& rec : trace.rounds)
        reached = std::max(reached, rec.game_value);
    CHECK(best_value - reached <= 1e-3);
}

TEST_CASE("zero-sum wiring holds exactly") {
    SUBCASE("plain objective") {
        GameConfig cfg = small_game(5, 0.25, 25);
        auto trace = run_game(cfg);
        for (const auto& rec : trace.rounds) {
            CHECK(rec.loss_w + rec.loss_pi == 0.0);
            CHECK(rec.game_value == rec.loss_w);
        }
    }
    SUBCASE("regularized objective offsets by 2 reg ||pi||^2") {
        GameConfig cfg = small_game(6, 0.25, 25);
        cfg.regularizer_weight = 0.3;
        auto trace = run_game(cfg);
        for (const auto& rec : trace.rounds) {
            double sq = 0.0;
            for (double x : rec.policy.probs)
                sq += x * x;
            const double offset = 2.0 * 0.3 * sq;
            CHECK(rec.loss_w + rec.loss_pi == doctest::Approx(offset).epsilon(1e-12));
        }
    }
}

TEST_CASE("evaluate_robustness") {
    auto [mdp, nominal] = random_mdp(2, 2, 0.8, 21);
    PolicyParams policy = PolicyParams::uniform(2, 2);
    PgdConfig oracle;
    oracle.max_iters = 300;
    oracle.stagnation_tol = 1e-11;

    SUBCASE("singleton set evaluates the nominal exactly") {
        UncertaintySet set{nominal, 2, 0.0};
        Rng rng(1);
        const double robust = evaluate_robustness(mdp, policy, set, 3, oracle, rng);
        CHECK(robust == doctest::Approx(testkit::value_at_mu(mdp, policy, nominal)).epsilon(1e-12));
    }

    SUBCASE("agrees with grid search at tau 0.3") {
        UncertaintySet set{nominal, 2, 0.3};
        Rng rng(2);
        const double robust = evaluate_robustness(mdp, policy, set, 4, oracle, rng);

        testkit::GridSearch grid;
        grid.lo = {0, 0, 0, 0};
        grid.hi = {1, 1, 1, 1};
        grid.points_per_axis = 10;
        grid.zoom_rounds = 4;
        grid.feasible = [&](std::span<const double> params) {
            auto cand = testkit::transitions_from_params(params);
            return set.ball_distance(cand.probs) <= set.tau + 1e-9;
        };
        grid.run([&](std::span<const double> params) {
            return testkit::value_at_mu(mdp, policy, testkit::transitions_from_params(params));
        });
        CHECK(std::abs(robust - grid.best_value) <= 1e-3);
    }

    SUBCASE("monotone in the radius") {
        Rng rng(3);
        double prev = 1e300;
        for (double tau : {0.0, 0.1, 0.2, 0.4}) {
            UncertaintySet set{nominal, 2, tau};
            const double robust = evaluate_robustness(mdp, policy, set, 3, oracle, rng);
            CHECK(robust <= prev + 1e-6);
            prev = robust;
        }
    }
}

TEST_CASE("regret accounting and the bound check") {
    PgdConfig oracle;
    oracle.max_iters = 250;
    oracle.stagnation_tol = 1e-10;

    SUBCASE("singleton set leaves only oracle error") {
        GameConfig cfg = small_game(8, 0.0, 30);
        auto trace = run_game(cfg);
        auto report = compute_regrets(trace, oracle, 3);
        CHECK(report.reg_w <= 1e-6);       // best response against a fixed target
        CHECK(report.bound_check);
    }

    SUBCASE("bound check holds across presets and seeds") {
        for (std::uint64_t seed = 0; seed < 4; ++seed) {
            GameConfig cfg = small_game(seed + 30, 0.2, 25);
            if (seed % 2 == 1) {
                cfg.pi_strategy = PiStrategy::oftpl_last_loss;
                cfg.w_strategy = WStrategy::ftpl_plus;
            }
            if (seed == 3)
                cfg.regularizer_weight = 0.2;
            auto trace = run_game(cfg);
            auto report = compute_regrets(trace, oracle, 2);
            CHECK(report.bound_check);
            CHECK(report.bound_lhs <= report.bound_rhs + 1e-6);
        }
    }

    SUBCASE("comparators agree with grid search on a 2-state instance") {
        GameConfig cfg = small_game(40, 0.25, 20);
        auto trace = run_game(cfg);
        auto report = compute_regrets(trace, oracle, 4);

        // best-in-hindsight W against the summed policy losses
        testkit::GridSearch grid;
        grid.lo = {0, 0, 0, 0};
        grid.hi = {1, 1, 1, 1};
        grid.points_per_axis = 10;
        grid.zoom_rounds = 4;
        grid.feasible = [&](std::span<const double> params) {
            auto cand = testkit::transitions_from_params(params);
            return cfg.uncertainty.ball_distance(cand.probs) <= cfg.uncertainty.tau + 1e-9;
        };
        grid.run([&](std::span<const double> params) {
            auto cand = testkit::transitions_from_params(params);
            double total = 0.0;
            for (const auto& rec : trace.rounds)
                total += testkit::value_at_mu(cfg.mdp, rec.policy, cand);
            return total;
        });
        CHECK(std::abs(report.comparator_w - grid.best_value / trace.rounds.size()) <= 1e-3);
    }

    CHECK_THROWS_AS(compute_regrets(GameTrace{}, oracle, 1), std::invalid_argument);
}

TEST_CASE("best response rounds stay within oracle error of the grid minimum") {
    GameConfig cfg = small_game(55, 0.3, 12);
    auto trace = run_game(cfg);

    double worst_alpha = 0.0;
    for (const auto& rec : trace.rounds) {
        testkit::GridSearch grid;
        grid.lo = {0, 0, 0, 0};
        grid.hi = {1, 1, 1, 1};
        grid.points_per_axis = 9;
        grid.zoom_rounds = 4;
        grid.feasible = [&](std::span<const double> params) {
            auto cand = testkit::transitions_from_params(params);
            return cfg.uncertainty.ball_distance(cand.probs) <= cfg.uncertainty.tau + 1e-9;
        };
        grid.run([&](std::span<const double> params) {
            return testkit::value_at_mu(cfg.mdp, rec.policy, testkit::transitions_from_params(params));
        });
        const double regret = rec.loss_w - grid.best_value;
        worst_alpha = std::max(worst_alpha, regret);
        CHECK(regret <= worst_alpha + 1e-6);
    }
    CHECK(worst_alpha <= 1e-3);
}

TEST_CASE("dominance diagnostics") {
    SUBCASE("uniform occupancy gives 1/(1-gamma)") {
        // symmetric two-state flip chain: occupancy stays uniform
        Mdp mdp;
        mdp.n_states = 2;
        mdp.n_actions = 1;
        mdp.gamma = 0.75;
        mdp.reward = {0.0, 1.0};
        mdp.mu = {0.5, 0.5};
        mdp.r_max = 1.0;
        TransitionParams w;
        w.n_states = 2;
        w.n_actions = 1;
        w.probs = {0.5, 0.5, 0.5, 0.5};
        auto diag = dominance_diagnostics(mdp, PolicyParams::uniform(2, 1), w, mdp.mu);
        CHECK(diag.k_pi == doctest::Approx(4.0).epsilon(1e-9));
        CHECK(diag.k_w == doctest::Approx(4.0).epsilon(1e-9));
        CHECK(diag.surrogate);
        CHECK_FALSE(diag.infinite);
    }

    SUBCASE("gamma zero collapses to the mu ratio") {
        auto [mdp, w] = random_mdp(3, 2, 0.0, 61);
        auto diag = dominance_diagnostics(mdp, PolicyParams::uniform(3, 2), w, mdp.mu);
        CHECK(diag.k_pi == doctest::Approx(1.0).epsilon(1e-9));
    }

    SUBCASE("zero-mass mu flags infinity") {
        auto [mdp, w] = random_mdp(3, 2, 0.9, 62);
        std::vector<double> mu{1.0, 0.0, 0.0};
        auto diag = dominance_diagnostics(mdp, PolicyParams::uniform(3, 2), w, mu);
        CHECK(diag.infinite);
    }

    SUBCASE("dominance inequality with inflated surrogate constant") {
        auto [mdp, nominal] = random_mdp(2, 2, 0.7, 63);
        Rng rng(4);

        testkit::GridSearch grid;
        grid.lo = {0.0, 0.0};
        grid.hi = {1.0, 1.0};
        grid.points_per_axis = 101;
        grid.zoom_rounds = 2;
        grid.run([&](std::span<const double> params) {
            return -testkit::value_at_mu(mdp, testkit::policy_from_params(2, params), nominal);
        });
        const double f_min = grid.best_value;

        int holds = 0;
        const int points = 200;
        for (int k = 0; k < points; ++k) {
            PolicyParams pi = PolicyParams::uniform(2, 2);
            for (double& x : pi.probs)
                x = rng.exponential(1.0);
            project_simplex_rows(pi.probs, 2);

            auto diag = dominance_diagnostics(mdp, pi, nominal, mdp.mu);
            std::vector<double> grad(4, 0.0);
            DiffObjective f = pi_value_objective(mdp, nominal);
            const double f_x = f(pi.probs, grad);
            const double lin_min = simplex_linear_min(grad, pi.probs, 2);
            if (f_x - f_min <= -2.0 * diag.k_pi * lin_min + 1e-9)
                ++holds;
        }
        CHECK(holds == points);
    }
}

TEST_CASE("drpg baseline") {
    SUBCASE("singleton set is projected policy ascent") {
        GameConfig cfg = small_game(70, 0.0, 50);
        auto trace = drpg_baseline(cfg);
        REQUIRE(trace.rounds.size() == 50);
        // the ascent should improve the value overall
        CHECK(trace.rounds.back().game_value > trace.rounds.front().game_value - 1e-9);
        for (const auto& rec : trace.rounds)
            CHECK(rec.w.probs == cfg.uncertainty.nominal.probs);
    }

    SUBCASE("trace schema is filled like the game's") {
        GameConfig cfg = small_game(71, 0.2, 8);
        cfg.eval_stride = 2;
        auto trace = drpg_baseline(cfg);
        int evaluated = 0;
        for (const auto& rec : trace.rounds) {
            CHECK(rec.loss_w == -rec.loss_pi);
            CHECK(rec.oracle_iters_pi == 1);
            if (rec.robust_evaluated)
                ++evaluated;
        }
        CHECK(evaluated == 4);
    }
}

TEST_CASE("oracle failure aborts with the partial trace") {
    GameConfig cfg = small_game(90, 0.2, 10);
    cfg.mdp.reward[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        run_game(cfg);
        FAIL("expected GameAborted");
    } catch (const GameAborted& e) {
        CHECK(e.round == 1);
        CHECK(e.partial.rounds.empty());
    }
}

TEST_CASE("determinism under a fixed seed") {
    GameConfig cfg = small_game(101, 0.25, 15);
    auto t1 = run_game(cfg);
    auto t2 = run_game(cfg);
    REQUIRE(t1.rounds.size() == t2.rounds.size());
    for (std::size_t i = 0; i < t1.rounds.size(); ++i) {
        CHECK(t1.rounds[i].policy.probs == t2.rounds[i].policy.probs);
        CHECK(t1.rounds[i].w.probs == t2.rounds[i].w.probs);
        CHECK(t1.rounds[i].game_value == t2.rounds[i].game_value);
        CHECK(t1.rounds[i].robust_value == t2.rounds[i].robust_value);
    }
}
