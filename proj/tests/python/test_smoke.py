"""Smoke tests for the Python bindings.

Runs against either the installed package (pip install -e .) or the bare
CMake-built extension on PYTHONPATH.
"""

import math

import pytest

try:
    import rmdpgame as core
except ImportError:  # bare extension from the CMake build tree
    _core = pytest.importorskip("_core")
    core = _core


def test_gridworld_value_solve():
    mdp, nominal = core.make_gridworld(width=5, height=5, slip=0.0, gamma=0.95)
    assert mdp.n_states == 26
    policy = core.PolicyParams.uniform(mdp.n_states, mdp.n_actions)
    bundle = core.solve_value(mdp, policy, nominal)
    assert len(bundle.v) == mdp.n_states
    # occupancy is a distribution
    assert math.isclose(sum(bundle.d_mu), 1.0, abs_tol=1e-8)
    # values are bounded by the discounted reward range
    assert all(abs(v) <= mdp.r_max / (1 - mdp.gamma) + 1e-9 for v in bundle.v)


def test_simplex_projection():
    out = core.project_simplex([1.2, -0.2])
    assert out[0] == pytest.approx(1.0)
    assert out[1] == pytest.approx(0.0)


def test_game_zero_sum_wiring_and_determinism():
    mdp, nominal = core.random_mdp(2, 2, 0.8, seed=3)
    unc = core.make_uncertainty_set(nominal, q=2, tau=0.2)
    kwargs = dict(rounds=12, eta_pi=1.0, eta_w=1.0, oracle_iters=80,
                  oracle_tol=1e-8, seed=7, eval_stride=4)
    trace = core.run_game(mdp, unc, **kwargs)
    assert len(trace.rounds) == 12
    for rec in trace.rounds:
        assert rec.loss_w == -rec.loss_pi
    again = core.run_game(mdp, unc, **kwargs)
    assert [r.game_value for r in again.rounds] == [r.game_value for r in trace.rounds]

    report = core.compute_regrets(trace, oracle_iters=150, oracle_tol=1e-9, restarts=2)
    assert report.bound_check
    assert report.bound_lhs <= report.bound_rhs + 1e-6


def test_robustness_monotone_in_radius():
    mdp, nominal = core.random_mdp(2, 2, 0.8, seed=11)
    policy = core.PolicyParams.uniform(2, 2)
    values = []
    for tau in (0.0, 0.15, 0.3):
        unc = core.make_uncertainty_set(nominal, q=2, tau=tau)
        values.append(core.evaluate_robustness(mdp, policy, unc, restarts=2, seed=1))
    assert values[0] >= values[1] - 1e-6
    assert values[1] >= values[2] - 1e-6


def test_sample_allocation():
    mdp, nominal = core.random_mdp(4, 2, 0.9, seed=5)
    policy = core.PolicyParams.uniform(4, 2)
    system = core.build_value_system(mdp, policy, nominal)
    alloc = core.allocate_samples(system, 40.0)
    assert sum(alloc.h) == pytest.approx(40.0, abs=1e-9)
    assert all(h >= 0 for h in alloc.h)

    v_hat, initial = core.estimate_value(mdp, policy, nominal, alloc, 0.0, seed=1)
    exact = core.solve_value(mdp, policy, nominal)
    assert initial == pytest.approx(exact.v[0], abs=1e-9)

    bound, confidence = core.chebyshev_error_bound(system, alloc, 1.0, 3.0)
    assert bound > 0
    assert confidence == pytest.approx(1 - 1 / 9)


def test_fit_rate_synthetic():
    series = [(t, 5.0 - 3.0 / math.sqrt(t)) for t in range(10, 501, 10)]
    fit = core.fit_rate(series, 5.0)
    assert not fit.degenerate
    assert fit.slope == pytest.approx(-0.5, abs=0.04)


def test_mdp_file_round_trip(tmp_path):
    mdp, nominal = core.random_mdp(3, 2, 0.85, seed=9)
    path = str(tmp_path / "instance.mdp")
    core.save_mdp(path, mdp, nominal)
    loaded, loaded_nominal = core.load_mdp(path)
    assert loaded.reward == mdp.reward
    assert loaded_nominal.probs == nominal.probs
