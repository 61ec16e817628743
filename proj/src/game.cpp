#include "rmdp/game.hpp"

#include "rmdp/environments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace rmdp {

namespace {

// Shared fast path: one factorization yields the value, occupancy, and both
// gradients. Buffers live per thread so composite objectives do not allocate.
struct ValueWorkspace {
    Eigen::MatrixXd system;
    Eigen::VectorXd r_pi, v, d, mu;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;

    void resize(int S) {
        if (system.rows() != S) {
            system.resize(S, S);
            r_pi.resize(S);
            mu.resize(S);
            lu = Eigen::PartialPivLU<Eigen::MatrixXd>(S);
        }
    }
};

ValueWorkspace& workspace() {
    thread_local ValueWorkspace ws;
    return ws;
}

// Returns sign * V(mu). When grad_pi (size S*A) or grad_w (size S*A*S) is
// nonempty, adds sign * the corresponding gradient.
double eval_value(const Mdp& mdp, std::span<const double> policy, std::span<const double> w,
                  double sign, std::span<double> grad_pi, std::span<double> grad_w) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    ValueWorkspace& ws = workspace();
    ws.resize(S);

    ws.system.setIdentity(S, S);
    for (int s = 0; s < S; ++s) {
        double rs = 0.0;
        for (int a = 0; a < A; ++a) {
            const double pa = policy[static_cast<std::size_t>(s) * A + a];
            rs += pa * mdp.reward_at(s, a);
            if (pa == 0.0)
                continue;
            const double* next = w.data() + (static_cast<std::size_t>(s) * A + a) * S;
            const double coeff = mdp.gamma * pa;
            for (int sn = 0; sn < S; ++sn)
                ws.system(s, sn) -= coeff * next[sn];
        }
        ws.r_pi(s) = rs;
    }

    ws.lu.compute(ws.system);
    ws.v = ws.lu.solve(ws.r_pi);

    double value = 0.0;
    for (int s = 0; s < S; ++s)
        value += mdp.mu[s] * ws.v(s);

    const bool want_pi = !grad_pi.empty();
    const bool want_w = !grad_w.empty();
    if (want_pi || want_w) {
        for (int s = 0; s < S; ++s)
            ws.mu(s) = (1.0 - mdp.gamma) * mdp.mu[s];
        ws.d = ws.lu.transpose().solve(ws.mu);
        const double scale = sign / (1.0 - mdp.gamma);
        for (int s = 0; s < S; ++s) {
            const double ds = ws.d(s) * scale;
            for (int a = 0; a < A; ++a) {
                const std::size_t row = (static_cast<std::size_t>(s) * A + a) * S;
                const double* next = w.data() + row;
                if (want_pi) {
                    double exp_v = 0.0;
                    for (int sn = 0; sn < S; ++sn)
                        exp_v += next[sn] * ws.v(sn);
                    const double q = mdp.reward_at(s, a) + mdp.gamma * exp_v;
                    grad_pi[static_cast<std::size_t>(s) * A + a] += ds * q;
                }
                if (want_w) {
                    const double factor =
                        ds * mdp.gamma * policy[static_cast<std::size_t>(s) * A + a];
                    if (factor != 0.0)
                        for (int sn = 0; sn < S; ++sn)
                            grad_w[row + sn] += factor * ws.v(sn);
                }
            }
        }
    }
    return sign * value;
}

double squared_norm(std::span<const double> x) {
    double acc = 0.0;
    for (double xi : x)
        acc += xi * xi;
    return acc;
}

// Uniform-feasible draw: a flat-Dirichlet tensor pulled back along the
// segment to the nominal until it fits the ball. Convex combinations of
// stochastic tensors stay stochastic, so no projection is needed.
TransitionParams random_draw_in(const UncertaintySet& set, Rng& rng) {
    TransitionParams draw = random_transitions(set.nominal.n_states, set.nominal.n_actions, rng);
    const double dist = set.ball_distance(draw.probs);
    double t = rng.uniform();
    if (dist > set.tau && dist > 0.0)
        t *= set.tau / dist;
    for (std::size_t i = 0; i < draw.probs.size(); ++i)
        draw.probs[i] = set.nominal.probs[i] + t * (draw.probs[i] - set.nominal.probs[i]);
    return draw;
}

std::uint64_t constexpr kGameStream = 1;
std::uint64_t constexpr kEvalStream = 2;

} // namespace

double theorem_eta(const Mdp& mdp, int rounds, int dim) {
    const double denom = (1.0 - mdp.gamma) * (1.0 - mdp.gamma);
    double lipschitz = 2.0 * mdp.gamma * mdp.r_max * mdp.n_actions / denom;
    if (!(lipschitz > 0.0))
        lipschitz = 1.0;
    return 1.0 / (lipschitz * std::sqrt(static_cast<double>(rounds) * dim));
}

DiffObjective w_value_objective(const Mdp& mdp, PolicyParams policy, double constant) {
    return [mdp, policy = std::move(policy), constant](std::span<const double> x,
                                                       std::span<double> grad) {
        return eval_value(mdp, policy.probs, x, 1.0, {}, grad) + constant;
    };
}

DiffObjective pi_value_objective(const Mdp& mdp, TransitionParams w, double reg_weight) {
    return [mdp, w = std::move(w), reg_weight](std::span<const double> x, std::span<double> grad) {
        double value = eval_value(mdp, x, w.probs, -1.0, grad, {});
        if (reg_weight != 0.0) {
            value += reg_weight * squared_norm(x);
            if (!grad.empty())
                for (std::size_t i = 0; i < x.size(); ++i)
                    grad[i] += 2.0 * reg_weight * x[i];
        }
        return value;
    };
}

ProjectionFn policy_projection(int /*n_states*/, int n_actions) {
    return [n_actions](std::span<double> x) { project_simplex_rows(x, n_actions); };
}

ProjectionFn uncertainty_projection(UncertaintySet set) {
    // successive projections reuse the ball multiplier as a warm bracket
    return [set = std::move(set), hint = 0.0](std::span<double> x) mutable {
        TransitionParams projected = project_uncertainty({x.begin(), x.end()}, set, &hint);
        std::copy(projected.probs.begin(), projected.probs.end(), x.begin());
    };
}

double simplex_linear_min(std::span<const double> grad, std::span<const double> x, int row_len) {
    double total = 0.0;
    for (std::size_t off = 0; off < grad.size(); off += row_len) {
        double row_min = std::numeric_limits<double>::infinity();
        double inner = 0.0;
        for (int j = 0; j < row_len; ++j) {
            row_min = std::min(row_min, grad[off + j]);
            inner += grad[off + j] * x[off + j];
        }
        total += row_min - inner;
    }
    return total;
}

double evaluate_robustness(const Mdp& mdp, const PolicyParams& policy, const UncertaintySet& set,
                           int restarts, const PgdConfig& oracle_cfg, Rng& rng) {
    if (set.tau == 0.0)
        return eval_value(mdp, policy.probs, set.nominal.probs, 1.0, {}, {});

    DiffObjective objective = w_value_objective(mdp, policy);
    ProjectionFn proj = uncertainty_projection(set);
    PgdConfig cfg = oracle_cfg;
    if (cfg.step_size <= 0.0)
        cfg.step_size = estimate_step_size(objective, proj, set.nominal.probs);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= restarts; ++k) {
        std::vector<double> start;
        if (k == 0) {
            start = set.nominal.probs;
        } else {
            TransitionParams draw = random_draw_in(set, rng);
            start = std::move(draw.probs);
        }
        PgdReport report = pgd_minimize(objective, proj, start, cfg);
        best = std::min(best, report.final_value);
    }
    return best;
}

namespace {

struct PlayerState {
    LossHistory pi_history;
    LossHistory w_history;
    PolicyParams pi_prev;
    TransitionParams w_prev;
};

} // namespace

GameTrace run_game(const GameConfig& cfg) {
    cfg.mdp.validate();
    cfg.uncertainty.validate();
    if (cfg.rounds < 0)
        throw std::invalid_argument("run_game: negative round count");

    const int S = cfg.mdp.n_states;
    const int A = cfg.mdp.n_actions;
    const int d_pi = S * A;
    const int d_w = S * A * S;

    const NoiseSpec noise_pi{cfg.eta_pi > 0.0 ? cfg.eta_pi : theorem_eta(cfg.mdp, cfg.rounds, d_pi),
                             d_pi};
    const NoiseSpec noise_w{cfg.eta_w > 0.0 ? cfg.eta_w : theorem_eta(cfg.mdp, cfg.rounds, d_w), d_w};
    const int stride = cfg.eval_stride > 0 ? cfg.eval_stride : std::max(1, cfg.rounds / 50);

    Rng game_rng = Rng(cfg.seed).derive(kGameStream);
    Rng eval_rng = Rng(cfg.seed).derive(kEvalStream);

    // The pi composite drifts slowly between rounds, so the step heuristic
    // 1/(2 max grad) applied at the previous exit point replaces a fresh
    // probe of the whole history; backtracking guards the reuse.
    ProjectionFn pi_proj = policy_projection(S, A);
    double pi_grad_carry = 0.0;
    auto pi_oracle_for_round = [&](int round) {
        PgdConfig pi_cfg = cfg.oracle_cfg_pi;
        if (cfg.oracle_cfg_pi.step_size <= 0.0 && round > 1 && pi_grad_carry > 0.0)
            pi_cfg.step_size = 1.0 / (2.0 * pi_grad_carry);
        return make_pgd_oracle(pi_proj, pi_cfg);
    };
    // The W losses share one scale across rounds; estimate the step once.
    PgdConfig w_cfg = cfg.oracle_cfg_w;
    if (w_cfg.step_size <= 0.0 && cfg.rounds > 0) {
        ProjectionFn probe_proj = uncertainty_projection(cfg.uncertainty);
        w_cfg.step_size = estimate_step_size(
            w_value_objective(cfg.mdp, PolicyParams::uniform(S, A)), probe_proj,
            cfg.uncertainty.nominal.probs);
    }
    OracleFn w_oracle = make_pgd_oracle(uncertainty_projection(cfg.uncertainty), w_cfg);

    GameTrace trace{cfg.mdp, cfg.uncertainty, cfg.regularizer_weight, {}};
    trace.rounds.reserve(cfg.rounds);

    PlayerState st{{}, {}, PolicyParams::uniform(S, A), cfg.uncertainty.nominal};

    for (int t = 1; t <= cfg.rounds; ++t) {
        const auto start = std::chrono::steady_clock::now();
        RoundRecord rec;
        try {
            OracleFn pi_oracle = pi_oracle_for_round(t);
            PgdReport pi_report;
            if (cfg.pi_strategy == PiStrategy::ftpl || st.pi_history.empty()) {
                pi_report = ftpl_step(st.pi_history, noise_pi, pi_oracle, st.pi_prev.probs, game_rng);
            } else {
                // optimism: replay of the previous round's loss
                pi_report = oftpl_step(st.pi_history, st.pi_history.losses.back(), noise_pi,
                                       pi_oracle, st.pi_prev.probs, game_rng);
            }
            pi_grad_carry = pi_report.final_gradient_norm;
            PolicyParams pi_t{S, A, std::move(pi_report.final_point)};

            const double reg_term = cfg.regularizer_weight * squared_norm(pi_t.probs);
            DiffObjective current_w_loss = w_value_objective(cfg.mdp, pi_t, reg_term);

            PgdReport w_report;
            if (cfg.w_strategy == WStrategy::best_response) {
                w_report = best_response_step(current_w_loss, w_oracle, st.w_prev.probs);
            } else {
                st.w_history.append(current_w_loss);
                w_report =
                    ftpl_plus_step(st.w_history, noise_w, w_oracle, st.w_prev.probs, game_rng);
            }
            TransitionParams w_t{S, A, std::move(w_report.final_point)};

            const double value = eval_value(cfg.mdp, pi_t.probs, w_t.probs, 1.0, {}, {});
            rec.game_value = value - reg_term;
            rec.loss_w = value + reg_term;
            rec.loss_pi = -value + reg_term;
            rec.oracle_iters_pi = pi_report.iterations_used;
            rec.oracle_iters_w = w_report.iterations_used;
            rec.grad_map_pi = pi_report.gradient_mapping_norm;
            rec.grad_map_w = w_report.gradient_mapping_norm;

            st.pi_history.append(pi_value_objective(cfg.mdp, w_t, cfg.regularizer_weight));

            if (t % stride == 0 || t == cfg.rounds) {
                rec.robust_value = evaluate_robustness(cfg.mdp, pi_t, cfg.uncertainty,
                                                       cfg.eval_restarts, cfg.oracle_cfg_w, eval_rng);
                rec.robust_evaluated = true;
            }

            rec.policy = std::move(pi_t);
            rec.w = std::move(w_t);
        } catch (const std::exception& e) {
            throw GameAborted("round " + std::to_string(t) + ": " + e.what(), t, std::move(trace));
        }
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        st.pi_prev = rec.policy;
        st.w_prev = rec.w;
        trace.rounds.push_back(std::move(rec));
    }
    return trace;
}

GameTrace drpg_baseline(const GameConfig& cfg) {
    cfg.mdp.validate();
    cfg.uncertainty.validate();
    const int S = cfg.mdp.n_states;
    const int A = cfg.mdp.n_actions;
    const int stride = cfg.eval_stride > 0 ? cfg.eval_stride : std::max(1, cfg.rounds / 50);

    Rng eval_rng = Rng(cfg.seed).derive(kEvalStream);
    ProjectionFn pi_proj = policy_projection(S, A);
    ProjectionFn w_proj = uncertainty_projection(cfg.uncertainty);

    GameTrace trace{cfg.mdp, cfg.uncertainty, cfg.regularizer_weight, {}};
    trace.rounds.reserve(cfg.rounds);

    PolicyParams pi = PolicyParams::uniform(S, A);
    TransitionParams w = cfg.uncertainty.nominal;

    PgdConfig single_step = cfg.oracle_cfg_pi;
    single_step.max_iters = 1;
    single_step.stagnation_tol = 0.0;

    for (int t = 1; t <= cfg.rounds; ++t) {
        const auto start = std::chrono::steady_clock::now();
        RoundRecord rec;
        try {
            const double reg_term = cfg.regularizer_weight * squared_norm(pi.probs);
            // inner loop: worst-case environment for the current policy
            PgdReport w_report = pgd_minimize(w_value_objective(cfg.mdp, pi, reg_term), w_proj,
                                              w.probs, cfg.oracle_cfg_w);
            w.probs = std::move(w_report.final_point);
            // outer: one projected ascent step on the policy
            PgdReport pi_report =
                pgd_minimize(pi_value_objective(cfg.mdp, w, cfg.regularizer_weight), pi_proj,
                             pi.probs, single_step);
            pi.probs = std::move(pi_report.final_point);

            const double new_reg = cfg.regularizer_weight * squared_norm(pi.probs);
            const double value = eval_value(cfg.mdp, pi.probs, w.probs, 1.0, {}, {});
            rec.game_value = value - new_reg;
            rec.loss_w = value + new_reg;
            rec.loss_pi = -value + new_reg;
            rec.oracle_iters_pi = pi_report.iterations_used;
            rec.oracle_iters_w = w_report.iterations_used;
            rec.grad_map_pi = pi_report.gradient_mapping_norm;
            rec.grad_map_w = w_report.gradient_mapping_norm;

            if (t % stride == 0 || t == cfg.rounds) {
                rec.robust_value = evaluate_robustness(cfg.mdp, pi, cfg.uncertainty,
                                                       cfg.eval_restarts, cfg.oracle_cfg_w, eval_rng);
                rec.robust_evaluated = true;
            }
            rec.policy = pi;
            rec.w = w;
        } catch (const std::exception& e) {
            throw GameAborted("round " + std::to_string(t) + ": " + e.what(), t, std::move(trace));
        }
        rec.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        trace.rounds.push_back(std::move(rec));
    }
    return trace;
}

RegretReport compute_regrets(const GameTrace& trace, const PgdConfig& oracle_cfg, int restarts) {
    const int T = static_cast<int>(trace.rounds.size());
    if (T == 0)
        throw std::invalid_argument("compute_regrets: empty trace");
    const Mdp& mdp = trace.mdp;
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    const double reg = trace.regularizer_weight;

    Rng rng(0x7a11bea7u); // comparator restarts are a pure function of the trace

    double played_value_sum = 0.0; // sum_t V(pi_t, W_t)
    double const_sum = 0.0;        // reg * sum_t ||pi_t||^2
    double loss_pi_sum = 0.0;
    for (const RoundRecord& rec : trace.rounds) {
        played_value_sum += rec.loss_w - reg * squared_norm(rec.policy.probs);
        const_sum += reg * squared_norm(rec.policy.probs);
        loss_pi_sum += rec.loss_pi;
    }

    // The reported policy: best evaluated robustness, else the last iterate.
    const RoundRecord* best_rec = &trace.rounds.back();
    for (const RoundRecord& rec : trace.rounds)
        if (rec.robust_evaluated &&
            (!best_rec->robust_evaluated || rec.robust_value > best_rec->robust_value))
            best_rec = &rec;
    const PolicyParams& pi_bar = best_rec->policy;
    const double pi_bar_reg = reg * squared_norm(pi_bar.probs);

    // --- W comparator: min over a single W of sum_t V_W^{pi_t}.
    DiffObjective w_sum_objective = [&trace, &mdp](std::span<const double> x,
                                                   std::span<double> grad) {
        double total = 0.0;
        for (const RoundRecord& rec : trace.rounds)
            total += eval_value(mdp, rec.policy.probs, x, 1.0, {}, grad);
        return total;
    };
    ProjectionFn w_proj = uncertainty_projection(trace.uncertainty);
    double min_v_sum = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= restarts; ++k) {
        std::vector<double> start = k == 0 ? trace.uncertainty.nominal.probs
                                           : random_draw_in(trace.uncertainty, rng).probs;
        PgdReport report = pgd_minimize(w_sum_objective, w_proj, start, oracle_cfg);
        min_v_sum = std::min(min_v_sum, report.final_value);
    }

    // --- pi comparator: min over pi of sum_t h_t(pi); pi_bar and the final
    // iterate join the restart pool, and pi_bar is also scored directly so
    // the comparator can never miss it.
    DiffObjective pi_sum_objective = [&trace, &mdp, reg](std::span<const double> x,
                                                         std::span<double> grad) {
        double total = 0.0;
        for (const RoundRecord& rec : trace.rounds)
            total += eval_value(mdp, x, rec.w.probs, -1.0, grad, {});
        const int t_count = static_cast<int>(trace.rounds.size());
        if (reg != 0.0) {
            total += t_count * reg * squared_norm(x);
            if (!grad.empty())
                for (std::size_t i = 0; i < x.size(); ++i)
                    grad[i] += 2.0 * t_count * reg * x[i];
        }
        return total;
    };
    ProjectionFn pi_proj = policy_projection(S, A);
    double min_h_sum = pi_sum_objective(pi_bar.probs, {});
    {
        std::vector<std::vector<double>> starts;
        starts.push_back(PolicyParams::uniform(S, A).probs);
        starts.push_back(pi_bar.probs);
        starts.push_back(trace.rounds.back().policy.probs);
        for (int k = 0; k < restarts; ++k) {
            std::vector<double> random_pi(static_cast<std::size_t>(S) * A);
            for (double& x : random_pi)
                x = rng.uniform();
            project_simplex_rows(random_pi, A);
            starts.push_back(std::move(random_pi));
        }
        for (const auto& start : starts) {
            PgdReport report = pgd_minimize(pi_sum_objective, pi_proj, start, oracle_cfg);
            min_h_sum = std::min(min_h_sum, report.final_value);
        }
    }

    // --- robustness of pi_bar: PGD restarts plus every played W_t, so the
    // estimate never exceeds the played average against pi_bar.
    double rob_bar = std::numeric_limits<double>::infinity();
    {
        Rng rob_rng(0x0b57ac1eu);
        double v_nominal = evaluate_robustness(mdp, pi_bar, trace.uncertainty, restarts, oracle_cfg,
                                               rob_rng);
        rob_bar = v_nominal;
        for (const RoundRecord& rec : trace.rounds)
            rob_bar = std::min(rob_bar, eval_value(mdp, pi_bar.probs, rec.w.probs, 1.0, {}, {}));
    }
    const double rob_bar_g = rob_bar - pi_bar_reg;

    RegretReport report;
    report.comparator_w = (min_v_sum + const_sum) / T;
    report.comparator_pi = min_h_sum / T;
    report.reg_w = (played_value_sum - min_v_sum) / T;
    report.reg_pi = (loss_pi_sum - min_h_sum) / T;
    report.best_policy_robustness = rob_bar_g;
    report.bound_lhs = rob_bar_g - (min_v_sum - const_sum) / T;
    report.bound_rhs = report.reg_w + report.reg_pi;
    report.bound_check = report.bound_lhs <= report.bound_rhs + 1e-6;
    return report;
}

DominanceDiagnostics dominance_diagnostics(const Mdp& mdp, const PolicyParams& policy,
                                           const TransitionParams& w, std::span<const double> mu) {
    Mdp local = mdp;
    local.mu.assign(mu.begin(), mu.end());
    ValueBundle bundle = solve_value(local, policy, w);

    DominanceDiagnostics diag;
    double ratio = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mu[s] <= 0.0) {
            if (bundle.d_mu[s] > 1e-15) {
                diag.infinite = true;
                ratio = std::numeric_limits<double>::infinity();
                break;
            }
            continue;
        }
        ratio = std::max(ratio, bundle.d_mu[s] / mu[s]);
    }
    diag.k_pi = ratio / (1.0 - mdp.gamma);
    diag.k_w = diag.k_pi;
    return diag;
}

} // namespace rmdp
