#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace rmdp {

/// Differentiable objective handle: returns f(x) and, when `grad` is
/// nonempty (same size as x, caller-zeroed), adds the gradient into it.
/// Composites sum terms by accumulating into the same buffer.
using DiffObjective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// In-place projection onto the feasible set.
using ProjectionFn = std::function<void(std::span<double> x)>;

enum class PgdMode { plain, strong_dominance };

struct PgdConfig {
    double step_size = 0.0; // 0 = estimate from local gradient norms
    int max_iters = 100;
    // Early exit once the gradient-mapping norm drops below
    // stagnation_tol * max(1, ||grad f||), or once three consecutive
    // iterations each improve the objective by less than
    // stagnation_tol * (1 + |f|). 0 = always run the budget.
    double stagnation_tol = 0.0;
    PgdMode mode = PgdMode::plain;
};

struct PgdReport {
    std::vector<double> final_point;
    double final_value = 0.0;
    int iterations_used = 0;
    double gradient_mapping_norm = 0.0;   // ||x - Proj(x - beta grad f(x))|| / beta at exit
    double final_gradient_norm = 0.0;     // ||grad f|| at the exit point
    double step_size = 0.0;               // beta actually in effect at exit
    std::vector<double> value_trace;      // objective value per accepted iterate
};

/// Projected gradient descent: x <- Proj(x - beta grad f(x)). Iterates stay
/// feasible; halves beta on any observed ascent. Returns after max_iters or
/// once the gradient-mapping norm drops below stagnation_tol.
PgdReport pgd_minimize(const DiffObjective& objective, const ProjectionFn& projection,
                       std::span<const double> x0, const PgdConfig& cfg);

/// The default step heuristic on its own: 1 / (2 max gradient norm) over
/// the start point and nearby feasible probes. Useful for fixing one step
/// size across many calls on objectives of the same scale.
double estimate_step_size(const DiffObjective& objective, const ProjectionFn& projection,
                          std::span<const double> x0);

struct AlphaEstimate {
    double alpha = 0.0;
    bool heuristic = false; // true when no reference minimum was supplied
};

/// Oracle error: final_value - reference_min when a reference is known,
/// otherwise the gradient-mapping norm flagged as a heuristic proxy.
AlphaEstimate estimate_alpha(const PgdReport& report, std::optional<double> reference_min = {});

} // namespace rmdp
