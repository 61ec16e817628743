"""Robust MDPs solved by a two-player no-regret game.

The heavy lifting lives in the C++ extension; this package re-exports the
main operations: exact tabular MDP machinery, feasible-set projections, the
game loop with its robustness evaluation and regret accounting, the sample
allocation rule, and convergence-rate fitting.
"""

from rmdpgame._core import (  # noqa: F401
    GameTrace,
    Mdp,
    PgdConfig,
    PolicyParams,
    RateFit,
    RegretReport,
    RoundRecord,
    SampleAllocation,
    TransitionParams,
    UncertaintySet,
    ValueBundle,
    ValueSystem,
    allocate_samples,
    build_value_system,
    chebyshev_error_bound,
    compute_regrets,
    drpg_baseline,
    estimate_value,
    evaluate_robustness,
    fit_rate,
    grad_value_wrt_policy,
    grad_value_wrt_transitions,
    initial_value,
    load_mdp,
    load_policy,
    make_gridworld,
    make_uncertainty_set,
    policy_advantage,
    project_simplex,
    project_uncertainty,
    random_mdp,
    run_game,
    save_mdp,
    save_policy,
    solve_value,
    w_advantage,
)

__all__ = [name for name in dir() if not name.startswith("_")]
