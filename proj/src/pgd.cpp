#include "rmdp/pgd.hpp"

#include "rmdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rmdp {

namespace {

double norm2(std::span<const double> x) {
    double acc = 0.0;
    for (double xi : x)
        acc += xi * xi;
    return std::sqrt(acc);
}

bool all_finite(std::span<const double> x) {
    for (double xi : x)
        if (!std::isfinite(xi))
            return false;
    return true;
}

// Step heuristic: probe gradient norms at the start point and a few nearby
// feasible points, then beta = 1 / (2 max norm). The probe radius shrinks
// with dimension so probes stay local; the probe source is fixed so the
// whole minimize call stays a pure function of its inputs.
double estimate_step(const DiffObjective& objective, const ProjectionFn& projection,
                     std::span<const double> x0) {
    Rng rng(0x5bd1e995u);
    const std::size_t n = x0.size();
    const double radius = 0.5 / std::sqrt(static_cast<double>(n));
    std::vector<double> point(n), grad(n);
    double max_norm = 0.0;
    for (int probe = 0; probe < 10; ++probe) {
        for (std::size_t i = 0; i < n; ++i)
            point[i] = probe == 0 ? x0[i] : x0[i] + rng.uniform(-radius, radius);
        projection(point);
        std::fill(grad.begin(), grad.end(), 0.0);
        objective(point, grad);
        max_norm = std::max(max_norm, norm2(grad));
    }
    return max_norm > 0.0 ? 1.0 / (2.0 * max_norm) : 1.0;
}

} // namespace

double estimate_step_size(const DiffObjective& objective, const ProjectionFn& projection,
                          std::span<const double> x0) {
    return estimate_step(objective, projection, x0);
}

PgdReport pgd_minimize(const DiffObjective& objective, const ProjectionFn& projection,
                       std::span<const double> x0, const PgdConfig& cfg) {
    if (cfg.max_iters <= 0)
        throw std::invalid_argument("pgd_minimize: max_iters must be positive");

    const std::size_t n = x0.size();
    std::vector<double> x(x0.begin(), x0.end());
    projection(x);

    double beta = cfg.step_size > 0.0 ? cfg.step_size : estimate_step(objective, projection, x0);

    std::vector<double> grad(n, 0.0), cand(n), cand_grad(n);
    double f = objective(x, grad);

    PgdReport report;
    report.value_trace.reserve(cfg.max_iters + 1);
    report.value_trace.push_back(f);

    auto fail = [&](const char* what) {
        report.final_point = x;
        report.final_value = f;
        report.step_size = beta;
        throw std::runtime_error(std::string("pgd_minimize: ") + what);
    };

    if (!std::isfinite(f) || !all_finite(grad))
        fail("non-finite objective at start point");

    double grad_map = 0.0;
    int iters = 0;
    int slow_iters = 0;
    while (iters < cfg.max_iters) {
        for (std::size_t i = 0; i < n; ++i)
            cand[i] = x[i] - beta * grad[i];
        projection(cand);

        double move = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x[i] - cand[i];
            move += d * d;
        }
        grad_map = std::sqrt(move) / beta;
        if (cfg.stagnation_tol > 0.0 &&
            grad_map < cfg.stagnation_tol * std::max(1.0, norm2(grad)))
            break;

        std::fill(cand_grad.begin(), cand_grad.end(), 0.0);
        double f_cand = objective(cand, cand_grad);
        if (!std::isfinite(f_cand) || !all_finite(cand_grad))
            fail("non-finite objective during descent");

        // Backtrack: halve the step until the move stops ascending.
        int halvings = 0;
        while (f_cand > f + 1e-12 && halvings < 40) {
            beta *= 0.5;
            ++halvings;
            for (std::size_t i = 0; i < n; ++i)
                cand[i] = x[i] - beta * grad[i];
            projection(cand);
            std::fill(cand_grad.begin(), cand_grad.end(), 0.0);
            f_cand = objective(cand, cand_grad);
            if (!std::isfinite(f_cand) || !all_finite(cand_grad))
                fail("non-finite objective during backtracking");
        }

        const double progress = f - f_cand;
        x.swap(cand);
        grad.swap(cand_grad);
        f = f_cand;
        ++iters;
        report.value_trace.push_back(f);

        if (cfg.stagnation_tol > 0.0) {
            slow_iters = progress < cfg.stagnation_tol * (1.0 + std::abs(f)) ? slow_iters + 1 : 0;
            if (slow_iters >= 3)
                break;
        }
    }

    // Gradient mapping at the exit point with the final step size.
    for (std::size_t i = 0; i < n; ++i)
        cand[i] = x[i] - beta * grad[i];
    projection(cand);
    double move = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - cand[i];
        move += d * d;
    }

    report.final_point = std::move(x);
    report.final_value = f;
    report.iterations_used = iters;
    report.gradient_mapping_norm = std::sqrt(move) / beta;
    report.final_gradient_norm = norm2(grad);
    report.step_size = beta;
    return report;
}

AlphaEstimate estimate_alpha(const PgdReport& report, std::optional<double> reference_min) {
    if (reference_min)
        return {report.final_value - *reference_min, false};
    return {report.gradient_mapping_norm, true};
}

} // namespace rmdp
