#include "rmdp/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rmdp {

namespace {

void check_distribution(std::span<const double> p, double tol, const char* what) {
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= -tol))
            throw std::invalid_argument(std::string(what) + ": negative probability");
        sum += x;
    }
    if (std::abs(sum - 1.0) > tol)
        throw std::invalid_argument(std::string(what) + ": row sums to " + std::to_string(sum));
}

} // namespace

void Mdp::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("Mdp: state and action counts must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("Mdp: gamma must lie in [0, 1)");
    if (reward.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument("Mdp: reward table has wrong shape");
    if (mu.size() != static_cast<std::size_t>(n_states))
        throw std::invalid_argument("Mdp: mu has wrong shape");
    check_distribution(mu, 1e-9, "Mdp.mu");
    for (double r : reward)
        if (std::abs(r) > r_max + 1e-12)
            throw std::invalid_argument("Mdp: reward magnitude exceeds declared r_max");
}

PolicyParams PolicyParams::uniform(int n_states, int n_actions) {
    PolicyParams p;
    p.n_states = n_states;
    p.n_actions = n_actions;
    p.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions);
    return p;
}

void PolicyParams::validate(double tol) const {
    if (probs.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument("PolicyParams: wrong shape");
    for (int s = 0; s < n_states; ++s)
        check_distribution(row(s), tol, "PolicyParams row");
}

void TransitionParams::validate(double tol) const {
    if (probs.size() != static_cast<std::size_t>(n_states) * n_actions * n_states)
        throw std::invalid_argument("TransitionParams: wrong shape");
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            check_distribution(row(s, a), tol, "TransitionParams row");
}

ValueBundle solve_value(const Mdp& mdp, const PolicyParams& policy, const TransitionParams& w) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    if (policy.n_states != S || policy.n_actions != A || w.n_states != S || w.n_actions != A)
        throw std::invalid_argument("solve_value: shape mismatch");

    // P_pi(s, s') = sum_a pi(a,s) W(s',a,s); r_pi(s) = sum_a pi(a,s) r(s,a).
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(S, S);
    Eigen::VectorXd r_pi(S);
    for (int s = 0; s < S; ++s) {
        double rs = 0.0;
        for (int a = 0; a < A; ++a) {
            const double pa = policy.at(s, a);
            rs += pa * mdp.reward_at(s, a);
            if (pa == 0.0)
                continue;
            auto next = w.row(s, a);
            for (int sn = 0; sn < S; ++sn)
                system(s, sn) -= mdp.gamma * pa * next[sn];
        }
        r_pi(s) = rs;
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd v = lu.solve(r_pi);

    const double residual = (system * v - r_pi).lpNorm<Eigen::Infinity>();
    if (!(residual <= 1e-6))
        throw std::runtime_error("solve_value: Bellman solve residual " + std::to_string(residual));

    // Occupancy: (I - gamma P_pi)^T d = (1-gamma) mu, same factorization.
    Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(mdp.mu.data(), S);
    Eigen::VectorXd d = lu.transpose().solve((1.0 - mdp.gamma) * mu);

    ValueBundle bundle;
    bundle.v.assign(v.data(), v.data() + S);
    bundle.d_mu.assign(d.data(), d.data() + S);
    bundle.q.resize(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            auto next = w.row(s, a);
            double exp_v = 0.0;
            for (int sn = 0; sn < S; ++sn)
                exp_v += next[sn] * v(sn);
            bundle.q[static_cast<std::size_t>(s) * A + a] = mdp.reward_at(s, a) + mdp.gamma * exp_v;
        }
    }

    const double rc = lu.rcond();
    bundle.condition_estimate = rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    return bundle;
}

double initial_value(const Mdp& mdp, const ValueBundle& bundle) {
    double total = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        total += mdp.mu[s] * bundle.v[s];
    return total;
}

std::vector<double> policy_advantage(const ValueBundle& bundle, int n_states, int n_actions) {
    std::vector<double> adv(static_cast<std::size_t>(n_states) * n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            adv[static_cast<std::size_t>(s) * n_actions + a] =
                bundle.q[static_cast<std::size_t>(s) * n_actions + a] - bundle.v[s];
    return adv;
}

std::vector<double> w_advantage(const Mdp& mdp, const ValueBundle& bundle) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    std::vector<double> adv(static_cast<std::size_t>(S) * A * S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double base = mdp.reward_at(s, a) - bundle.v[s];
            double* out = adv.data() + (static_cast<std::size_t>(s) * A + a) * S;
            for (int sn = 0; sn < S; ++sn)
                out[sn] = mdp.gamma * bundle.v[sn] + base;
        }
    return adv;
}

std::vector<double> grad_value_wrt_policy(const Mdp& mdp, const PolicyParams& policy,
                                          const TransitionParams& w) {
    ValueBundle bundle = solve_value(mdp, policy, w);
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    const double scale = 1.0 / (1.0 - mdp.gamma);
    std::vector<double> grad(static_cast<std::size_t>(S) * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            grad[static_cast<std::size_t>(s) * A + a] =
                scale * bundle.d_mu[s] * bundle.q[static_cast<std::size_t>(s) * A + a];
    return grad;
}

std::vector<double> grad_value_wrt_transitions(const Mdp& mdp, const PolicyParams& policy,
                                               const TransitionParams& w) {
    ValueBundle bundle = solve_value(mdp, policy, w);
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    const double scale = mdp.gamma / (1.0 - mdp.gamma);
    std::vector<double> grad(static_cast<std::size_t>(S) * A * S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double factor = scale * bundle.d_mu[s] * policy.at(s, a);
            double* out = grad.data() + (static_cast<std::size_t>(s) * A + a) * S;
            for (int sn = 0; sn < S; ++sn)
                out[sn] = factor * bundle.v[sn];
        }
    return grad;
}

// --- serialization -----------------------------------------------------------

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_block(std::ostream& out, std::span<const double> xs, int per_line) {
    int col = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out << fmt(xs[i]);
        if (++col == per_line || i + 1 == xs.size()) {
            out << '\n';
            col = 0;
        } else {
            out << ' ';
        }
    }
}

std::vector<double> read_values(std::istream& in, std::size_t count, const char* what) {
    std::vector<double> xs(count);
    for (std::size_t i = 0; i < count; ++i)
        if (!(in >> xs[i]))
            throw std::runtime_error(std::string("load: truncated ") + what + " table");
    return xs;
}

} // namespace

void save_mdp(std::ostream& out, const Mdp& mdp, const TransitionParams* nominal) {
    out << "n_states " << mdp.n_states << '\n';
    out << "n_actions " << mdp.n_actions << '\n';
    out << "gamma " << fmt(mdp.gamma) << '\n';
    out << "r_max " << fmt(mdp.r_max) << '\n';
    out << "reward\n";
    write_block(out, mdp.reward, mdp.n_actions);
    out << "mu\n";
    write_block(out, mdp.mu, mdp.n_states);
    if (nominal) {
        const int S = mdp.n_states;
        const int A = mdp.n_actions;
        out << "transitions\n";
        // (s',a,s) row-major: s' slowest, s fastest.
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(S) * A * S);
        for (int sn = 0; sn < S; ++sn)
            for (int a = 0; a < A; ++a)
                for (int s = 0; s < S; ++s)
                    flat.push_back(nominal->at(sn, a, s));
        write_block(out, flat, S);
    }
}

void save_mdp(const std::string& path, const Mdp& mdp, const TransitionParams* nominal) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_mdp: cannot open " + path);
    save_mdp(out, mdp, nominal);
}

std::pair<Mdp, std::optional<TransitionParams>> load_mdp(std::istream& in) {
    Mdp mdp;
    std::optional<TransitionParams> nominal;
    std::string key;
    bool have_states = false, have_actions = false, have_gamma = false;
    while (in >> key) {
        if (key == "n_states") {
            in >> mdp.n_states;
            have_states = true;
        } else if (key == "n_actions") {
            in >> mdp.n_actions;
            have_actions = true;
        } else if (key == "gamma") {
            in >> mdp.gamma;
            have_gamma = true;
        } else if (key == "r_max") {
            in >> mdp.r_max;
        } else if (key == "reward") {
            if (!have_states || !have_actions)
                throw std::runtime_error("load_mdp: reward table before shape header");
            mdp.reward = read_values(in, static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, "reward");
        } else if (key == "mu") {
            mdp.mu = read_values(in, static_cast<std::size_t>(mdp.n_states), "mu");
        } else if (key == "transitions") {
            const int S = mdp.n_states;
            const int A = mdp.n_actions;
            auto flat = read_values(in, static_cast<std::size_t>(S) * A * S, "transition");
            TransitionParams w;
            w.n_states = S;
            w.n_actions = A;
            w.probs.resize(flat.size());
            std::size_t i = 0;
            for (int sn = 0; sn < S; ++sn)
                for (int a = 0; a < A; ++a)
                    for (int s = 0; s < S; ++s)
                        w.probs[(static_cast<std::size_t>(s) * A + a) * S + sn] = flat[i++];
            nominal = std::move(w);
        } else {
            throw std::runtime_error("load_mdp: unknown key '" + key + "'");
        }
    }
    if (!have_states || !have_actions || !have_gamma || mdp.reward.empty() || mdp.mu.empty())
        throw std::runtime_error("load_mdp: incomplete file");
    if (mdp.r_max == 0.0)
        for (double r : mdp.reward)
            mdp.r_max = std::max(mdp.r_max, std::abs(r));
    return {std::move(mdp), std::move(nominal)};
}

std::pair<Mdp, std::optional<TransitionParams>> load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_mdp: cannot open " + path);
    return load_mdp(in);
}

void save_policy(std::ostream& out, const PolicyParams& policy) {
    out << "n_states " << policy.n_states << '\n';
    out << "n_actions " << policy.n_actions << '\n';
    out << "probs\n";
    write_block(out, policy.probs, policy.n_actions);
}

void save_policy(const std::string& path, const PolicyParams& policy) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_policy: cannot open " + path);
    save_policy(out, policy);
}

PolicyParams load_policy(std::istream& in) {
    PolicyParams policy;
    std::string key;
    while (in >> key) {
        if (key == "n_states")
            in >> policy.n_states;
        else if (key == "n_actions")
            in >> policy.n_actions;
        else if (key == "probs")
            policy.probs =
                read_values(in, static_cast<std::size_t>(policy.n_states) * policy.n_actions, "policy");
        else
            throw std::runtime_error("load_policy: unknown key '" + key + "'");
    }
    if (policy.probs.empty())
        throw std::runtime_error("load_policy: incomplete file");
    return policy;
}

PolicyParams load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_policy: cannot open " + path);
    return load_policy(in);
}

} // namespace rmdp
