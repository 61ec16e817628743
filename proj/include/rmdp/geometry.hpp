#pragma once

#include "rmdp/mdp.hpp"
#include "rmdp/rng.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmdp {

/// Feasible adversary region: q-norm ball of radius tau around a nominal
/// tensor, intersected with the per-(action, state) simplices. The norm is
/// taken over the whole flattened tensor.
struct UncertaintySet {
    TransitionParams nominal;
    int q = 2; // 1 or 2
    double tau = 0.0;

    void validate() const;
    bool contains(const TransitionParams& w, double tol = 1e-8) const;
    double ball_distance(std::span<const double> w) const;
};

/// Perturbation spec for the FTPL family: dim iid draws from Exp(eta),
/// eta read as a rate (mean 1/eta per coordinate).
struct NoiseSpec {
    double eta = 1.0;
    int dim = 0;
};

/// Euclidean projection onto the standard simplex, in place
/// (sort-and-threshold construction).
void project_simplex(std::span<double> x);
std::vector<double> project_simplex(std::vector<double> x);

/// Row-wise simplex projection for a flat tensor of n_rows rows of row_len.
void project_simplex_rows(std::span<double> x, int row_len);

/// Euclidean projection onto {y : ||y - center||_q <= tau}, in place.
/// q=2 scales radially; q=1 soft-thresholds the sorted magnitudes.
void project_ball(std::span<double> x, std::span<const double> center, int q, double tau);

/// Dykstra non-convergence carries the final constraint violations.
struct ProjectionError : std::runtime_error {
    ProjectionError(const std::string& msg, double row_violation, double ball_violation)
        : std::runtime_error(msg), row_violation(row_violation), ball_violation(ball_violation) {}
    double row_violation;
    double ball_violation;
};

/// Euclidean projection onto (per-row simplices) intersected with the
/// q-ball. The ball constraint is dualized: for each multiplier the inner
/// problem splits into per-row simplex proxes, and a bracketed root search
/// finds the smallest multiplier whose solution meets the ball. The result
/// satisfies both membership tests within 1e-8. `lambda_hint`, when given,
/// warm-starts the multiplier bracket and receives the solved value.
TransitionParams project_uncertainty(std::vector<double> w, const UncertaintySet& set,
                                     double* lambda_hint = nullptr);

/// dim independent Exp(eta) draws; deterministic under a fixed-seed source.
std::vector<double> sample_exp_noise(const NoiseSpec& spec, Rng& rng);

} // namespace rmdp
