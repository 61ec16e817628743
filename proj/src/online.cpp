#include "rmdp/online.hpp"

#include <stdexcept>
#include <utility>

namespace rmdp {

OracleFn make_pgd_oracle(ProjectionFn projection, PgdConfig cfg) {
    return [projection = std::move(projection), cfg](const DiffObjective& objective,
                                                     std::span<const double> warm_start) {
        return pgd_minimize(objective, projection, warm_start, cfg);
    };
}

namespace {

std::vector<double> draw_noise(const NoiseSpec& spec, Rng& rng,
                               const std::vector<double>* noise_override, std::size_t dim) {
    if (noise_override) {
        if (noise_override->size() != dim)
            throw std::invalid_argument("noise override has wrong dimension");
        return *noise_override;
    }
    NoiseSpec s = spec;
    s.dim = static_cast<int>(dim);
    return sample_exp_noise(s, rng);
}

// sum of history losses minus <sigma, x>, optionally plus an optimistic term.
DiffObjective perturbed_sum(const LossHistory& history, std::vector<double> sigma,
                            const DiffObjective* optimistic) {
    return [&history, sigma = std::move(sigma), optimistic](std::span<const double> x,
                                                            std::span<double> grad) {
        double value = 0.0;
        for (const auto& loss : history.losses)
            value += loss(x, grad);
        if (optimistic)
            value += (*optimistic)(x, grad);
        for (std::size_t i = 0; i < x.size(); ++i)
            value -= sigma[i] * x[i];
        if (!grad.empty())
            for (std::size_t i = 0; i < grad.size(); ++i)
                grad[i] -= sigma[i];
        return value;
    };
}

} // namespace

PgdReport ftpl_step(const LossHistory& history, const NoiseSpec& noise, const OracleFn& oracle,
                    std::span<const double> warm_start, Rng& rng,
                    const std::vector<double>* noise_override) {
    auto sigma = draw_noise(noise, rng, noise_override, warm_start.size());
    return oracle(perturbed_sum(history, std::move(sigma), nullptr), warm_start);
}

PgdReport oftpl_step(const LossHistory& history, const DiffObjective& optimistic,
                     const NoiseSpec& noise, const OracleFn& oracle,
                     std::span<const double> warm_start, Rng& rng,
                     const std::vector<double>* noise_override) {
    auto sigma = draw_noise(noise, rng, noise_override, warm_start.size());
    return oracle(perturbed_sum(history, std::move(sigma), &optimistic), warm_start);
}

PgdReport best_response_step(const DiffObjective& current_loss, const OracleFn& oracle,
                             std::span<const double> warm_start) {
    return oracle(current_loss, warm_start);
}

PgdReport ftpl_plus_step(const LossHistory& history, const NoiseSpec& noise, const OracleFn& oracle,
                         std::span<const double> warm_start, Rng& rng,
                         const std::vector<double>* noise_override) {
    if (history.empty())
        throw std::invalid_argument("ftpl_plus_step: current loss must be in the history");
    auto sigma = draw_noise(noise, rng, noise_override, warm_start.size());
    return oracle(perturbed_sum(history, std::move(sigma), nullptr), warm_start);
}

} // namespace rmdp
