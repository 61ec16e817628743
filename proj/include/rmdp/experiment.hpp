#pragma once

#include "rmdp/game.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace rmdp {

/// Flat key-value experiment description. Repeated q/tau/seed keys form the
/// sweep axes; empty axes collapse to a single nominal run.
struct ExperimentConfig {
    // environment
    std::string env = "gridworld"; // gridworld | random | file
    std::string mdp_file;
    int width = 5;
    int height = 5;
    double slip = 0.1;
    double goal_reward = 10.0;
    double step_reward = -1.0;
    int rand_states = 4;
    int rand_actions = 3;
    double gamma = 0.95;
    std::uint64_t env_seed = 0;
    bool randomize_nominal = false;

    // game
    std::string algorithm = "alg4"; // alg4 | alg5 | alg6 | drpg
    int rounds = 500;
    int oracle_iters = 200;
    double oracle_tol = 1e-7;
    double oracle_step = 0.0; // 0 = per-call estimate
    double eta_pi = 0.0;      // 0 = scale-based preset
    double eta_w = 0.0;
    double reg_weight = 0.0; // alg6 uses 0.1 when left at 0
    int eval_stride = 0;
    int eval_restarts = 2;

    // sweep
    std::vector<int> qs;
    std::vector<double> taus;
    std::vector<std::uint64_t> seeds;

    std::string out_dir = "out";
    bool record_timing = true;
    int workers = 0; // 0 = RMDP_WORKERS env var, else hardware
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig parse_experiment_config_file(const std::string& path);
void serialize_experiment_config(std::ostream& out, const ExperimentConfig& cfg);

/// Expands one sweep point into a runnable game plus its environment.
struct SweepPoint {
    int q = 1;
    double tau = 0.1;
    std::uint64_t seed = 0;
};

struct SweepResult {
    SweepPoint point;
    std::string trace_path;
    std::string status = "ok";
    double final_robust = 0.0;
    double best_robust = 0.0;
    double mixture_robust = 0.0; // final value of the mixture curve
    double slope = 0.0;          // per-iterate robustness fit
    double r2 = 0.0;
    int fit_points = 0;
    bool fit_degenerate = true;
    double mixture_slope = 0.0; // mixture-robustness fit
    double mixture_r2 = 0.0;
    double wall_s = 0.0;
};

/// Runs the full sweep, one trace CSV per point plus summary.csv in
/// cfg.out_dir. Returns a process exit status (nonzero when every point
/// failed or the config is unusable); per-point failures are recorded in the
/// summary without aborting siblings.
int run_experiment(const ExperimentConfig& cfg, std::vector<SweepResult>* results = nullptr);

/// Environment and game assembly shared by the CLI and tests.
std::pair<Mdp, TransitionParams> build_environment(const ExperimentConfig& cfg);
GameConfig build_game_config(const ExperimentConfig& cfg, const Mdp& mdp,
                             const TransitionParams& nominal, const SweepPoint& point);

/// Loss-scale probe behind the preset noise rates: the value spread over a
/// handful of random policies at the nominal dynamics (and random dynamics
/// at the uniform policy for the W side).
double estimate_policy_loss_scale(const Mdp& mdp, const TransitionParams& nominal, Rng& rng);
double estimate_w_loss_scale(const Mdp& mdp, const UncertaintySet& set, Rng& rng);

/// Empirical l1 Lipschitz estimate of the policy loss at the nominal
/// dynamics: max ratio |V(pi) - V(pi')| / ||pi - pi'||_1 over sampled pairs.
double estimate_policy_lipschitz(const Mdp& mdp, const TransitionParams& nominal, Rng& rng);

/// Robustness of the running policy mixture: for each evaluated round t,
/// min over W of (1/t) sum_{i<=t} V_W^{pi_i}(mu), the quantity the regret
/// bound controls. Solved incrementally with warm starts.
std::vector<std::pair<double, double>> mixture_robustness_curve(const GameTrace& trace,
                                                                const PgdConfig& oracle_cfg);

// --- trace CSV ---------------------------------------------------------------

void write_trace_csv(std::ostream& out, const GameTrace& trace, bool record_timing = true);
void write_trace_csv(const std::string& path, const GameTrace& trace, bool record_timing = true);

/// (round, robust_value) pairs of the evaluated rounds in a trace CSV.
std::vector<std::pair<double, double>> read_trace_robustness(std::istream& in);
std::vector<std::pair<double, double>> read_trace_robustness_file(const std::string& path);

// --- convergence-rate fit ----------------------------------------------------

struct RateFit {
    double slope = 0.0;
    double r2 = 0.0;
    bool degenerate = false; // no usable spread (e.g. constant sequence)
    int points_used = 0;
};

/// OLS of log(suboptimality) on log(round) with suboptimality =
/// reference - robustness(t), floored at 1e-12. Points at the floor (the
/// reference round itself) carry no slope information and are skipped.
/// Requires at least 10 evaluated points.
RateFit fit_rate(std::span<const std::pair<double, double>> round_and_robustness, double reference);

/// Reference = best robustness in the file.
RateFit fit_rate_file(const std::string& path);

} // namespace rmdp
