#pragma once

#include "rmdp/geometry.hpp"
#include "rmdp/mdp.hpp"
#include "rmdp/online.hpp"
#include "rmdp/pgd.hpp"
#include "rmdp/rng.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace rmdp {

enum class PiStrategy { ftpl, oftpl_last_loss };
enum class WStrategy { best_response, ftpl_plus };

/// One no-regret game. (ftpl, best_response, reg=0) is the direct
/// parameterization setup; (oftpl_last_loss, ftpl_plus, reg=0) the smooth
/// one; (ftpl, best_response, reg>0) the regularized one.
struct GameConfig {
    Mdp mdp;
    UncertaintySet uncertainty;
    int rounds = 100;
    PiStrategy pi_strategy = PiStrategy::ftpl;
    WStrategy w_strategy = WStrategy::best_response;
    double regularizer_weight = 0.0;
    double eta_pi = 0.0; // 0 = theorem default
    double eta_w = 0.0;
    PgdConfig oracle_cfg_pi;
    PgdConfig oracle_cfg_w;
    std::uint64_t seed = 0;
    int eval_stride = 0; // robustness evaluation cadence; 0 = max(1, rounds/50)
    int eval_restarts = 2;
};

struct RoundRecord {
    PolicyParams policy;
    TransitionParams w;
    double game_value = 0.0; // g(pi_t, W_t) = V - reg ||pi_t||^2
    double loss_pi = 0.0;    // h_t(pi_t)
    double loss_w = 0.0;     // l_t(W_t)
    int oracle_iters_pi = 0;
    int oracle_iters_w = 0;
    double grad_map_pi = 0.0;
    double grad_map_w = 0.0;
    bool robust_evaluated = false;
    double robust_value = 0.0;
    double wall_ms = 0.0;
};

struct GameTrace {
    Mdp mdp;
    UncertaintySet uncertainty;
    double regularizer_weight = 0.0;
    std::vector<RoundRecord> rounds;
};

/// Oracle failure mid-game: carries the failing round and the partial trace.
struct GameAborted : std::runtime_error {
    GameAborted(const std::string& msg, int round, GameTrace partial)
        : std::runtime_error(msg), round(round), partial(std::move(partial)) {}
    int round;
    GameTrace partial;
};

struct RegretReport {
    double reg_w = 0.0;          // average regret of the W-player
    double reg_pi = 0.0;         // average regret of the pi-player
    double comparator_w = 0.0;   // best-in-hindsight per-round W value (approx)
    double comparator_pi = 0.0;  // best-in-hindsight per-round pi loss (approx)
    bool bound_check = false;    // robustness gap <= reg_w + reg_pi + slack
    double bound_lhs = 0.0;
    double bound_rhs = 0.0;
    double best_policy_robustness = 0.0; // g-robustness of the reported policy
};

struct DominanceDiagnostics {
    double k_pi = 0.0;
    double k_w = 0.0;
    bool surrogate = true; // current-iterate occupancy stands in for the optimizer's
    bool infinite = false; // some zero-mass mu state carries occupancy
};

/// Noise rate from the theorem tuning 1/(L sqrt(T d)) with the conservative
/// smoothness estimate L = 2 gamma R_max |A| / (1-gamma)^2.
double theorem_eta(const Mdp& mdp, int rounds, int dim);

/// Runs the two-player loop for cfg.rounds rounds; deterministic under seed.
GameTrace run_game(const GameConfig& cfg);

/// Double-loop baseline: full inner minimization over W, then a single
/// projected ascent step on the policy; same trace schema.
GameTrace drpg_baseline(const GameConfig& cfg);

/// min over restarts of PGD on W -> V_W^pi(mu) over the set; restarts are
/// uniform-feasible draws plus the nominal.
double evaluate_robustness(const Mdp& mdp, const PolicyParams& policy, const UncertaintySet& set,
                           int restarts, const PgdConfig& oracle_cfg, Rng& rng);

/// Exact regret accounting with oracle-approximated comparators.
RegretReport compute_regrets(const GameTrace& trace, const PgdConfig& oracle_cfg, int restarts);

/// Distribution-mismatch ratios (1/(1-gamma)) max_s d(s)/mu(s) at the
/// current iterate.
DominanceDiagnostics dominance_diagnostics(const Mdp& mdp, const PolicyParams& policy,
                                           const TransitionParams& w, std::span<const double> mu);

// Loss and projection builders, shared with the CLI harness and tests.

/// W -> V_W^pi(mu) + constant (the constant carries value bookkeeping only).
DiffObjective w_value_objective(const Mdp& mdp, PolicyParams policy, double constant = 0.0);

/// pi -> -V_W^pi(mu) + reg_weight ||pi||^2.
DiffObjective pi_value_objective(const Mdp& mdp, TransitionParams w, double reg_weight = 0.0);

ProjectionFn policy_projection(int n_states, int n_actions);
ProjectionFn uncertainty_projection(UncertaintySet set);

/// min over the product of per-row simplices of <x_bar - x, grad>.
double simplex_linear_min(std::span<const double> grad, std::span<const double> x, int row_len);

} // namespace rmdp
