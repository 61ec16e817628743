// Python bindings for the main operations: MDP machinery, projections, the
// game loop, robustness evaluation, sampling, and rate fitting.

#include "rmdp/environments.hpp"
#include "rmdp/experiment.hpp"
#include "rmdp/game.hpp"
#include "rmdp/sampling.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace rmdp;

namespace {

PiStrategy pi_strategy_from(const std::string& name) {
    if (name == "ftpl")
        return PiStrategy::ftpl;
    if (name == "oftpl_last_loss")
        return PiStrategy::oftpl_last_loss;
    throw std::invalid_argument("unknown pi strategy '" + name + "'");
}

WStrategy w_strategy_from(const std::string& name) {
    if (name == "best_response")
        return WStrategy::best_response;
    if (name == "ftpl_plus")
        return WStrategy::ftpl_plus;
    throw std::invalid_argument("unknown w strategy '" + name + "'");
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "robust MDPs solved by a two-player no-regret game";

    py::class_<Mdp>(m, "Mdp")
        .def(py::init<>())
        .def_readwrite("n_states", &Mdp::n_states)
        .def_readwrite("n_actions", &Mdp::n_actions)
        .def_readwrite("reward", &Mdp::reward)
        .def_readwrite("gamma", &Mdp::gamma)
        .def_readwrite("mu", &Mdp::mu)
        .def_readwrite("r_max", &Mdp::r_max)
        .def("validate", &Mdp::validate);

    py::class_<PolicyParams>(m, "PolicyParams")
        .def(py::init<>())
        .def_static("uniform", &PolicyParams::uniform)
        .def_readwrite("n_states", &PolicyParams::n_states)
        .def_readwrite("n_actions", &PolicyParams::n_actions)
        .def_readwrite("probs", &PolicyParams::probs)
        .def("validate", &PolicyParams::validate, py::arg("tol") = 1e-9);

    py::class_<TransitionParams>(m, "TransitionParams")
        .def(py::init<>())
        .def_readwrite("n_states", &TransitionParams::n_states)
        .def_readwrite("n_actions", &TransitionParams::n_actions)
        .def_readwrite("probs", &TransitionParams::probs)
        .def("at", &TransitionParams::at, py::arg("s_next"), py::arg("a"), py::arg("s"))
        .def("validate", &TransitionParams::validate, py::arg("tol") = 1e-9);

    py::class_<ValueBundle>(m, "ValueBundle")
        .def_readonly("v", &ValueBundle::v)
        .def_readonly("q", &ValueBundle::q)
        .def_readonly("d_mu", &ValueBundle::d_mu)
        .def_readonly("condition_estimate", &ValueBundle::condition_estimate);

    py::class_<UncertaintySet>(m, "UncertaintySet")
        .def(py::init<>())
        .def_readwrite("nominal", &UncertaintySet::nominal)
        .def_readwrite("q", &UncertaintySet::q)
        .def_readwrite("tau", &UncertaintySet::tau)
        .def("contains", &UncertaintySet::contains, py::arg("w"), py::arg("tol") = 1e-8);

    py::class_<PgdConfig>(m, "PgdConfig")
        .def(py::init<>())
        .def_readwrite("step_size", &PgdConfig::step_size)
        .def_readwrite("max_iters", &PgdConfig::max_iters)
        .def_readwrite("stagnation_tol", &PgdConfig::stagnation_tol);

    py::class_<RoundRecord>(m, "RoundRecord")
        .def_readonly("policy", &RoundRecord::policy)
        .def_readonly("w", &RoundRecord::w)
        .def_readonly("game_value", &RoundRecord::game_value)
        .def_readonly("loss_pi", &RoundRecord::loss_pi)
        .def_readonly("loss_w", &RoundRecord::loss_w)
        .def_readonly("robust_evaluated", &RoundRecord::robust_evaluated)
        .def_readonly("robust_value", &RoundRecord::robust_value);

    py::class_<GameTrace>(m, "GameTrace")
        .def_readonly("rounds", &GameTrace::rounds)
        .def_readonly("regularizer_weight", &GameTrace::regularizer_weight);

    py::class_<RegretReport>(m, "RegretReport")
        .def_readonly("reg_w", &RegretReport::reg_w)
        .def_readonly("reg_pi", &RegretReport::reg_pi)
        .def_readonly("comparator_w", &RegretReport::comparator_w)
        .def_readonly("comparator_pi", &RegretReport::comparator_pi)
        .def_readonly("bound_check", &RegretReport::bound_check)
        .def_readonly("bound_lhs", &RegretReport::bound_lhs)
        .def_readonly("bound_rhs", &RegretReport::bound_rhs);

    py::class_<SampleAllocation>(m, "SampleAllocation")
        .def_readonly("h", &SampleAllocation::h)
        .def_readonly("budget", &SampleAllocation::budget)
        .def_readonly("degenerate_uniform", &SampleAllocation::degenerate_uniform);

    py::class_<ValueSystem>(m, "ValueSystem")
        .def_readonly("m", &ValueSystem::m)
        .def_readonly("r", &ValueSystem::r)
        .def_readonly("m_inv_row0", &ValueSystem::m_inv_row0);

    py::class_<RateFit>(m, "RateFit")
        .def_readonly("slope", &RateFit::slope)
        .def_readonly("r2", &RateFit::r2)
        .def_readonly("degenerate", &RateFit::degenerate)
        .def_readonly("points_used", &RateFit::points_used);

    m.def("solve_value", &solve_value, py::arg("mdp"), py::arg("policy"), py::arg("w"));
    m.def("initial_value", &initial_value, py::arg("mdp"), py::arg("bundle"));
    m.def("policy_advantage", &policy_advantage, py::arg("bundle"), py::arg("n_states"),
          py::arg("n_actions"));
    m.def("w_advantage", &w_advantage, py::arg("mdp"), py::arg("bundle"));
    m.def("grad_value_wrt_policy", &grad_value_wrt_policy);
    m.def("grad_value_wrt_transitions", &grad_value_wrt_transitions);

    m.def("project_simplex",
          [](std::vector<double> x) { return project_simplex(std::move(x)); });
    m.def("project_uncertainty",
          [](std::vector<double> w, const UncertaintySet& set) {
              return project_uncertainty(std::move(w), set);
          });

    m.def(
        "make_gridworld",
        [](int width, int height, double goal_reward, double step_reward, double slip,
           double gamma) {
            GridSpec spec;
            spec.width = width;
            spec.height = height;
            spec.goal_reward = goal_reward;
            spec.step_reward = step_reward;
            spec.slip = slip;
            spec.gamma = gamma;
            return make_gridworld(spec);
        },
        py::arg("width") = 5, py::arg("height") = 5, py::arg("goal_reward") = 10.0,
        py::arg("step_reward") = -1.0, py::arg("slip") = 0.1, py::arg("gamma") = 0.95);
    m.def("random_mdp", &random_mdp, py::arg("n_states"), py::arg("n_actions"), py::arg("gamma"),
          py::arg("seed"));
    m.def(
        "make_uncertainty_set",
        [](const TransitionParams& nominal, int q, double tau, std::uint64_t seed,
           bool randomize_nominal) {
            Rng rng(seed);
            return make_uncertainty_set(nominal, q, tau, rng, randomize_nominal);
        },
        py::arg("nominal"), py::arg("q"), py::arg("tau"), py::arg("seed") = 0,
        py::arg("randomize_nominal") = false);

    m.def(
        "run_game",
        [](const Mdp& mdp, const UncertaintySet& set, int rounds, const std::string& pi_strategy,
           const std::string& w_strategy, double regularizer_weight, double eta_pi, double eta_w,
           int oracle_iters, double oracle_tol, std::uint64_t seed, int eval_stride,
           int eval_restarts) {
            GameConfig cfg;
            cfg.mdp = mdp;
            cfg.uncertainty = set;
            cfg.rounds = rounds;
            cfg.pi_strategy = pi_strategy_from(pi_strategy);
            cfg.w_strategy = w_strategy_from(w_strategy);
            cfg.regularizer_weight = regularizer_weight;
            cfg.eta_pi = eta_pi;
            cfg.eta_w = eta_w;
            cfg.oracle_cfg_pi.max_iters = oracle_iters;
            cfg.oracle_cfg_pi.stagnation_tol = oracle_tol;
            cfg.oracle_cfg_w = cfg.oracle_cfg_pi;
            cfg.seed = seed;
            cfg.eval_stride = eval_stride;
            cfg.eval_restarts = eval_restarts;
            return run_game(cfg);
        },
        py::arg("mdp"), py::arg("uncertainty"), py::arg("rounds"), py::arg("pi_strategy") = "ftpl",
        py::arg("w_strategy") = "best_response", py::arg("regularizer_weight") = 0.0,
        py::arg("eta_pi") = 0.0, py::arg("eta_w") = 0.0, py::arg("oracle_iters") = 100,
        py::arg("oracle_tol") = 1e-7, py::arg("seed") = 0, py::arg("eval_stride") = 0,
        py::arg("eval_restarts") = 2);

    m.def(
        "drpg_baseline",
        [](const Mdp& mdp, const UncertaintySet& set, int rounds, int oracle_iters,
           double oracle_tol, std::uint64_t seed, int eval_stride, int eval_restarts) {
            GameConfig cfg;
            cfg.mdp = mdp;
            cfg.uncertainty = set;
            cfg.rounds = rounds;
            cfg.oracle_cfg_pi.max_iters = oracle_iters;
            cfg.oracle_cfg_pi.stagnation_tol = oracle_tol;
            cfg.oracle_cfg_w = cfg.oracle_cfg_pi;
            cfg.seed = seed;
            cfg.eval_stride = eval_stride;
            cfg.eval_restarts = eval_restarts;
            return drpg_baseline(cfg);
        },
        py::arg("mdp"), py::arg("uncertainty"), py::arg("rounds"), py::arg("oracle_iters") = 100,
        py::arg("oracle_tol") = 1e-7, py::arg("seed") = 0, py::arg("eval_stride") = 0,
        py::arg("eval_restarts") = 2);

    m.def(
        "evaluate_robustness",
        [](const Mdp& mdp, const PolicyParams& policy, const UncertaintySet& set, int restarts,
           int oracle_iters, double oracle_tol, std::uint64_t seed) {
            PgdConfig cfg;
            cfg.max_iters = oracle_iters;
            cfg.stagnation_tol = oracle_tol;
            Rng rng(seed);
            return evaluate_robustness(mdp, policy, set, restarts, cfg, rng);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("uncertainty"), py::arg("restarts") = 3,
        py::arg("oracle_iters") = 200, py::arg("oracle_tol") = 1e-9, py::arg("seed") = 0);

    m.def(
        "compute_regrets",
        [](const GameTrace& trace, int oracle_iters, double oracle_tol, int restarts) {
            PgdConfig cfg;
            cfg.max_iters = oracle_iters;
            cfg.stagnation_tol = oracle_tol;
            return compute_regrets(trace, cfg, restarts);
        },
        py::arg("trace"), py::arg("oracle_iters") = 200, py::arg("oracle_tol") = 1e-9,
        py::arg("restarts") = 2);

    m.def("build_value_system", &build_value_system);
    m.def("allocate_samples", &allocate_samples, py::arg("system"), py::arg("budget"));
    m.def(
        "estimate_value",
        [](const Mdp& mdp, const PolicyParams& policy, const TransitionParams& w,
           const SampleAllocation& alloc, double noise_sd, std::uint64_t seed) {
            Rng rng(seed);
            auto est = estimate_value(mdp, policy, w, alloc, noise_sd, rng);
            return py::make_tuple(est.v_hat, est.initial_value);
        },
        py::arg("mdp"), py::arg("policy"), py::arg("w"), py::arg("alloc"), py::arg("noise_sd"),
        py::arg("seed") = 0);
    m.def(
        "chebyshev_error_bound",
        [](const ValueSystem& system, const SampleAllocation& alloc, double noise_sd, double psi) {
            auto bound = chebyshev_error_bound(system, alloc, noise_sd, psi);
            return py::make_tuple(bound.bound, bound.confidence);
        },
        py::arg("system"), py::arg("alloc"), py::arg("noise_sd"), py::arg("psi"));

    m.def("fit_rate",
          [](std::vector<std::pair<double, double>> series, double reference) {
              return fit_rate(series, reference);
          });

    m.def("save_mdp",
          [](const std::string& path, const Mdp& mdp, const TransitionParams* nominal) {
              save_mdp(path, mdp, nominal);
          },
          py::arg("path"), py::arg("mdp"), py::arg("nominal") = nullptr);
    m.def("load_mdp", [](const std::string& path) {
        auto [mdp, nominal] = load_mdp(path);
        return py::make_tuple(mdp, nominal);
    });
    m.def("save_policy",
          [](const std::string& path, const PolicyParams& policy) { save_policy(path, policy); });
    m.def("load_policy", [](const std::string& path) { return load_policy(path); });
}
