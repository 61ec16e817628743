// Command-line harness: single runs, sweeps, robustness evaluation, sample
// allocation, and convergence-rate fitting. All outputs are CSV with headers.

#include "rmdp/environments.hpp"
#include "rmdp/experiment.hpp"
#include "rmdp/game.hpp"
#include "rmdp/sampling.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// When --config is given the file is parsed first and explicitly passed
// flags override it, so every option funnels through this registry.
struct ExperimentFlags {
    rmdp::ExperimentConfig cfg;
    std::string config_path;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (flat key-value; flags override)");
        reg(cmd->add_option("--env", cfg.env, "gridworld | random | file"),
            [this](rmdp::ExperimentConfig& c) { c.env = cfg.env; });
        reg(cmd->add_option("--mdp", cfg.mdp_file, "MDP file for --env file"),
            [this](rmdp::ExperimentConfig& c) { c.mdp_file = cfg.mdp_file; });
        reg(cmd->add_option("--width", cfg.width),
            [this](rmdp::ExperimentConfig& c) { c.width = cfg.width; });
        reg(cmd->add_option("--height", cfg.height),
            [this](rmdp::ExperimentConfig& c) { c.height = cfg.height; });
        reg(cmd->add_option("--slip", cfg.slip),
            [this](rmdp::ExperimentConfig& c) { c.slip = cfg.slip; });
        reg(cmd->add_option("--gamma", cfg.gamma),
            [this](rmdp::ExperimentConfig& c) { c.gamma = cfg.gamma; });
        reg(cmd->add_option("--env-seed", cfg.env_seed),
            [this](rmdp::ExperimentConfig& c) { c.env_seed = cfg.env_seed; });
        reg(cmd->add_flag("--randomize-nominal", cfg.randomize_nominal,
                          "jitter the nominal tensor before building the set"),
            [this](rmdp::ExperimentConfig& c) { c.randomize_nominal = cfg.randomize_nominal; });
        reg(cmd->add_option("--alg", cfg.algorithm, "alg4 | alg5 | alg6 | drpg"),
            [this](rmdp::ExperimentConfig& c) { c.algorithm = cfg.algorithm; });
        reg(cmd->add_option("--rounds,-T", cfg.rounds),
            [this](rmdp::ExperimentConfig& c) { c.rounds = cfg.rounds; });
        reg(cmd->add_option("--oracle-iters", cfg.oracle_iters),
            [this](rmdp::ExperimentConfig& c) { c.oracle_iters = cfg.oracle_iters; });
        reg(cmd->add_option("--oracle-tol", cfg.oracle_tol),
            [this](rmdp::ExperimentConfig& c) { c.oracle_tol = cfg.oracle_tol; });
        reg(cmd->add_option("--eta-pi", cfg.eta_pi, "policy noise rate (0 = preset)"),
            [this](rmdp::ExperimentConfig& c) { c.eta_pi = cfg.eta_pi; });
        reg(cmd->add_option("--eta-w", cfg.eta_w, "environment noise rate (0 = preset)"),
            [this](rmdp::ExperimentConfig& c) { c.eta_w = cfg.eta_w; });
        reg(cmd->add_option("--reg-weight", cfg.reg_weight),
            [this](rmdp::ExperimentConfig& c) { c.reg_weight = cfg.reg_weight; });
        reg(cmd->add_option("--eval-stride", cfg.eval_stride),
            [this](rmdp::ExperimentConfig& c) { c.eval_stride = cfg.eval_stride; });
        reg(cmd->add_option("--eval-restarts", cfg.eval_restarts),
            [this](rmdp::ExperimentConfig& c) { c.eval_restarts = cfg.eval_restarts; });
        reg(cmd->add_option("--out", cfg.out_dir, "output directory"),
            [this](rmdp::ExperimentConfig& c) { c.out_dir = cfg.out_dir; });
        reg(cmd->add_option("--workers", cfg.workers,
                            "sweep workers (env RMDP_WORKERS overrides 0)"),
            [this](rmdp::ExperimentConfig& c) { c.workers = cfg.workers; });
        reg(cmd->add_option("--record-timing", cfg.record_timing,
                            "write wall-clock columns (0 for byte-reproducible output)"),
            [this](rmdp::ExperimentConfig& c) { c.record_timing = cfg.record_timing; });
    }

    rmdp::ExperimentConfig resolve() const {
        if (config_path.empty())
            return cfg;
        rmdp::ExperimentConfig merged = rmdp::parse_experiment_config_file(config_path);
        for (const auto& [opt, apply] : overrides_)
            if (opt->count() > 0)
                apply(merged);
        return merged;
    }

private:
    using Apply = std::function<void(rmdp::ExperimentConfig&)>;
    std::vector<std::pair<const CLI::Option*, Apply>> overrides_;
    void reg(const CLI::Option* opt, Apply apply) { overrides_.emplace_back(opt, std::move(apply)); }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"robust MDP no-regret game harness"};
    app.require_subcommand(1);

    ExperimentFlags run_flags, sweep_flags;
    int run_q = 1;
    double run_tau = 0.1;
    std::uint64_t run_seed = 0;

    CLI::App* run = app.add_subcommand("run", "single game run, one trace CSV");
    run_flags.attach(run);
    run->add_option("--q", run_q, "norm order of the uncertainty set");
    run->add_option("--tau", run_tau, "radius of the uncertainty set");
    run->add_option("--seed", run_seed);

    CLI::App* sweep = app.add_subcommand("sweep", "cross product of q/tau/seed axes");
    sweep_flags.attach(sweep);
    sweep->add_option("--q", sweep_flags.cfg.qs, "norm orders (repeatable)");
    sweep->add_option("--tau", sweep_flags.cfg.taus, "radii (repeatable)");
    sweep->add_option("--seed", sweep_flags.cfg.seeds, "seeds (repeatable)");

    CLI::App* eval = app.add_subcommand("eval-robust", "worst-case value of a stored policy");
    std::string eval_mdp, eval_policy;
    int eval_q = 2, eval_restarts = 4, eval_iters = 300;
    double eval_tau = 0.1;
    std::uint64_t eval_seed = 0;
    eval->add_option("--mdp", eval_mdp, "MDP file with a transition tensor")->required();
    eval->add_option("--policy", eval_policy, "policy file")->required();
    eval->add_option("--q", eval_q);
    eval->add_option("--tau", eval_tau);
    eval->add_option("--restarts", eval_restarts);
    eval->add_option("--oracle-iters", eval_iters);
    eval->add_option("--seed", eval_seed);

    CLI::App* alloc_cmd = app.add_subcommand("sample-alloc", "optimal reward-sample allocation");
    std::string alloc_mdp, alloc_policy, alloc_out;
    double alloc_budget = 100.0, alloc_sigma = 1.0, alloc_psi = 3.0;
    alloc_cmd->add_option("--mdp", alloc_mdp)->required();
    alloc_cmd->add_option("--policy", alloc_policy)->required();
    alloc_cmd->add_option("--budget", alloc_budget, "total sample budget");
    alloc_cmd->add_option("--sigma", alloc_sigma, "reward noise standard deviation");
    alloc_cmd->add_option("--psi", alloc_psi, "Chebyshev multiplier (> 1)");
    alloc_cmd->add_option("--out", alloc_out, "CSV path (default stdout)");

    CLI::App* fit = app.add_subcommand("fit-rate", "log-log convergence slope of a trace CSV");
    std::string fit_trace;
    fit->add_option("trace", fit_trace, "trace CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            rmdp::ExperimentConfig cfg = run_flags.resolve();
            if (run->count("--q") > 0 || cfg.qs.empty())
                cfg.qs = {run_q};
            if (run->count("--tau") > 0 || cfg.taus.empty())
                cfg.taus = {run_tau};
            if (run->count("--seed") > 0 || cfg.seeds.empty())
                cfg.seeds = {run_seed};
            cfg.qs.resize(1);
            cfg.taus.resize(1);
            cfg.seeds.resize(1);
            return rmdp::run_experiment(cfg);
        }

        if (sweep->parsed()) {
            rmdp::ExperimentConfig cfg = sweep_flags.resolve();
            if (sweep->count("--q") > 0)
                cfg.qs = sweep_flags.cfg.qs;
            if (sweep->count("--tau") > 0)
                cfg.taus = sweep_flags.cfg.taus;
            if (sweep->count("--seed") > 0)
                cfg.seeds = sweep_flags.cfg.seeds;
            return rmdp::run_experiment(cfg);
        }

        if (eval->parsed()) {
            auto [mdp, nominal] = rmdp::load_mdp(eval_mdp);
            if (!nominal)
                throw std::runtime_error("eval-robust: MDP file has no transition tensor");
            rmdp::PolicyParams policy = rmdp::load_policy(eval_policy);
            rmdp::Rng set_rng(eval_seed);
            rmdp::UncertaintySet set =
                rmdp::make_uncertainty_set(*nominal, eval_q, eval_tau, set_rng, false);
            rmdp::PgdConfig oracle;
            oracle.max_iters = eval_iters;
            oracle.stagnation_tol = 1e-9;
            rmdp::Rng rng(eval_seed);
            const double robust =
                rmdp::evaluate_robustness(mdp, policy, set, eval_restarts, oracle, rng);
            std::cout << "q,tau,robust_value\n"
                      << eval_q << ',' << fmt(eval_tau) << ',' << fmt(robust) << '\n';
            return 0;
        }

        if (alloc_cmd->parsed()) {
            auto [mdp, nominal] = rmdp::load_mdp(alloc_mdp);
            if (!nominal)
                throw std::runtime_error("sample-alloc: MDP file has no transition tensor");
            rmdp::PolicyParams policy = rmdp::load_policy(alloc_policy);
            rmdp::ValueSystem system = rmdp::build_value_system(mdp, policy, *nominal);
            rmdp::SampleAllocation alloc = rmdp::allocate_samples(system, alloc_budget);
            std::ostream* out = &std::cout;
            std::ofstream file;
            if (!alloc_out.empty()) {
                file.open(alloc_out);
                if (!file)
                    throw std::runtime_error("cannot open " + alloc_out);
                out = &file;
            }
            *out << "state_index,weight,h,per_state_bound_term\n";
            for (int s = 0; s < system.n_states; ++s) {
                const double weight = std::abs(system.m_inv_row0[s]);
                const double term =
                    alloc.h[s] > 0.0
                        ? weight * alloc_psi * alloc_sigma * alloc_sigma / alloc.h[s]
                        : (weight > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
                *out << s << ',' << fmt(weight) << ',' << fmt(alloc.h[s]) << ',' << fmt(term)
                     << '\n';
            }
            return 0;
        }

        if (fit->parsed()) {
            rmdp::RateFit result = rmdp::fit_rate_file(fit_trace);
            std::cout << "slope,r2,points,degenerate\n"
                      << fmt(result.slope) << ',' << fmt(result.r2) << ',' << result.points_used
                      << ',' << (result.degenerate ? 1 : 0) << '\n';
            return result.degenerate ? 2 : 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
