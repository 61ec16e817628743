#pragma once

#include "rmdp/geometry.hpp"
#include "rmdp/pgd.hpp"
#include "rmdp/rng.hpp"

#include <functional>
#include <span>
#include <vector>

namespace rmdp {

/// Ordered sequence of per-round loss handles; index t-1 holds round t.
struct LossHistory {
    std::vector<DiffObjective> losses;

    void append(DiffObjective loss) { losses.push_back(std::move(loss)); }
    int rounds() const { return static_cast<int>(losses.size()); }
    bool empty() const { return losses.empty(); }
};

/// Approximate optimization oracle: minimizes a composite objective from a
/// warm start. The projection and iteration budget live inside the handle.
using OracleFn = std::function<PgdReport(const DiffObjective& objective, std::span<const double> warm_start)>;

OracleFn make_pgd_oracle(ProjectionFn projection, PgdConfig cfg);

// The four learners. Each draws fresh noise per call (when it uses noise),
// composes the oracle argument, and returns the oracle report whose
// final_point is the round's choice. `noise_override` substitutes a fixed
// perturbation vector for unit tests.

/// x_t = oracle( sum_{i<t} f_i(x) - <sigma, x> ); history holds rounds 1..t-1.
PgdReport ftpl_step(const LossHistory& history, const NoiseSpec& noise, const OracleFn& oracle,
                    std::span<const double> warm_start, Rng& rng,
                    const std::vector<double>* noise_override = nullptr);

/// FTPL with an optimistic term m_t added to the composite.
PgdReport oftpl_step(const LossHistory& history, const DiffObjective& optimistic,
                     const NoiseSpec& noise, const OracleFn& oracle,
                     std::span<const double> warm_start, Rng& rng,
                     const std::vector<double>* noise_override = nullptr);

/// x_t = oracle(f_t); the current loss is visible, no noise.
PgdReport best_response_step(const DiffObjective& current_loss, const OracleFn& oracle,
                             std::span<const double> warm_start);

/// x_t = oracle( sum_{i<=t} f_i(x) - <sigma, x> ); history includes round t.
PgdReport ftpl_plus_step(const LossHistory& history, const NoiseSpec& noise, const OracleFn& oracle,
                         std::span<const double> warm_start, Rng& rng,
                         const std::vector<double>* noise_override = nullptr);

} // namespace rmdp
