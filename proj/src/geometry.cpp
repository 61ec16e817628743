#include "rmdp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>

namespace rmdp {

long g_solve_count = 0;

void UncertaintySet::validate() const {
    nominal.validate();
    if (q != 1 && q != 2)
        throw std::invalid_argument("UncertaintySet: q must be 1 or 2");
    if (!(tau >= 0.0))
        throw std::invalid_argument("UncertaintySet: tau must be nonnegative");
}

double UncertaintySet::ball_distance(std::span<const double> w) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = w[i] - nominal.probs[i];
        acc += q == 1 ? std::abs(d) : d * d;
    }
    return q == 1 ? acc : std::sqrt(acc);
}

bool UncertaintySet::contains(const TransitionParams& w, double tol) const {
    if (w.probs.size() != nominal.probs.size())
        return false;
    for (int s = 0; s < w.n_states; ++s)
        for (int a = 0; a < w.n_actions; ++a) {
            auto row = w.row(s, a);
            double sum = 0.0;
            for (double x : row) {
                if (x < -tol)
                    return false;
                sum += x;
            }
            if (std::abs(sum - 1.0) > tol)
                return false;
        }
    return ball_distance(w.probs) <= tau + tol;
}

void project_simplex(std::span<double> x) {
    if (x.empty())
        throw std::invalid_argument("project_simplex: empty input");
    // Sort descending, find the threshold, clip.
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        running += u[j];
        const double cand = (running - 1.0) / static_cast<double>(j + 1);
        if (u[j] - cand > 0.0)
            theta = cand;
    }
    for (double& xi : x)
        xi = std::max(xi - theta, 0.0);
}

std::vector<double> project_simplex(std::vector<double> x) {
    project_simplex(std::span<double>(x));
    return x;
}

void project_simplex_rows(std::span<double> x, int row_len) {
    for (std::size_t off = 0; off < x.size(); off += row_len)
        project_simplex(x.subspan(off, row_len));
}

namespace {

// L1-ball projection of the difference vector via the sorted-magnitude
// threshold (Duchi et al. construction).
void shrink_to_l1_ball(std::span<double> diff, double tau) {
    double l1 = 0.0;
    for (double d : diff)
        l1 += std::abs(d);
    if (l1 <= tau)
        return;
    std::vector<double> mags(diff.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        mags[i] = std::abs(diff[i]);
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    double running = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < mags.size(); ++j) {
        running += mags[j];
        const double cand = (running - tau) / static_cast<double>(j + 1);
        if (mags[j] - cand > 0.0)
            theta = cand;
    }
    for (double& d : diff) {
        const double mag = std::max(std::abs(d) - theta, 0.0);
        d = std::copysign(mag, d);
    }
}

} // namespace

void project_ball(std::span<double> x, std::span<const double> center, int q, double tau) {
    if (x.size() != center.size())
        throw std::invalid_argument("project_ball: shape mismatch");
    if (!(tau >= 0.0))
        throw std::invalid_argument("project_ball: tau must be nonnegative");
    if (q == 2) {
        double norm2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - center[i];
            norm2 += d * d;
        }
        const double norm = std::sqrt(norm2);
        if (norm <= tau)
            return;
        const double scale = tau / norm;
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = center[i] + scale * (x[i] - center[i]);
    } else if (q == 1) {
        std::vector<double> diff(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            diff[i] = x[i] - center[i];
        shrink_to_l1_ball(diff, tau);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = center[i] + diff[i];
    } else {
        throw std::invalid_argument("project_ball: q must be 1 or 2");
    }
}

namespace {

// min over the simplex of sum_i (x_i - w_i)^2 + lam |x_i - c_i|, solved
// exactly: with row multiplier nu each entry is piecewise linear in nu, so
// the stochasticity constraint reduces to a sorted breakpoint scan. When
// `dh` is given it accumulates this row's d/dlam of ||x - c||_1, which is
// -2 n_above n_below / (n_above + n_below) for the active branch counts.
void l1_prox_row_onto_simplex(std::span<double> x, std::span<const double> w,
                              std::span<const double> c, double lam, double* dh = nullptr) {
    const std::size_t n = w.size();
    // rows within lam/2 of the center settle exactly on it (nu = 0, all
    // entries on the plateau, and the center row is stochastic)
    bool on_plateau = true;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(w[i] - c[i]) > 0.5 * lam) {
            on_plateau = false;
            break;
        }
    if (on_plateau) {
        for (std::size_t i = 0; i < n; ++i)
            x[i] = c[i];
        return;
    }
    // per entry: x(nu) = w - lam/2 - nu/2 above the plateau, c on it,
    // w + lam/2 - nu/2 below, then clipped at zero
    thread_local std::vector<std::pair<double, double>> events; // (nu, slope change)
    events.clear();
    events.reserve(3 * n);
    double sum0 = 0.0;   // sum at nu -> -inf, offset part
    double slope = -0.5 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double enter_plateau = 2.0 * (w[i] - 0.5 * lam - c[i]);
        const double exit_plateau = 2.0 * (w[i] + 0.5 * lam - c[i]);
        const double hit_zero = 2.0 * (w[i] + 0.5 * lam);
        events.emplace_back(enter_plateau, +0.5);
        events.emplace_back(exit_plateau, -0.5);
        events.emplace_back(hit_zero, +0.5);
        sum0 += w[i] - 0.5 * lam;
    }
    std::sort(events.begin(), events.end());

    // walk segments until the row sum crosses 1
    double nu = events.front().first - 1.0;
    double sum = sum0 - 0.5 * static_cast<double>(n) * nu;
    double nu_star = nu;
    bool found = sum <= 1.0;
    if (!found) {
        for (const auto& [at, dslope] : events) {
            const double next_sum = sum + slope * (at - nu);
            if (next_sum <= 1.0) {
                nu_star = nu + (1.0 - sum) / slope;
                found = true;
                break;
            }
            sum = next_sum;
            nu = at;
            slope += dslope;
        }
        if (!found) // numerically all mass clipped; fall back to the last event
            nu_star = nu;
    }

    int n_above = 0, n_below = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = w[i] - 0.5 * nu_star;
        double v;
        if (t - 0.5 * lam > c[i]) {
            v = t - 0.5 * lam;
            ++n_above;
        } else if (t + 0.5 * lam < c[i]) {
            v = t + 0.5 * lam;
            if (v > 0.0)
                ++n_below;
        } else {
            v = c[i];
        }
        x[i] = std::max(v, 0.0);
    }
    if (dh && n_above + n_below > 0)
        *dh -= 2.0 * n_above * n_below / static_cast<double>(n_above + n_below);
}

} // namespace

TransitionParams project_uncertainty(std::vector<double> w, const UncertaintySet& set,
                                     double* lambda_hint) {
    const int S = set.nominal.n_states;
    const int A = set.nominal.n_actions;
    if (w.size() != set.nominal.probs.size())
        throw std::invalid_argument("project_uncertainty: shape mismatch");

    TransitionParams out;
    out.n_states = S;
    out.n_actions = A;

    if (set.tau == 0.0) { // singleton set
        out.probs = set.nominal.probs;
        return out;
    }

    // Dualize the ball constraint: for multiplier lam >= 0 the inner problem
    // splits into per-row simplex proxes; the exact projection sits at the
    // smallest lam whose solution meets the ball. Monotone in lam, so a
    // bracketed secant (Illinois) search closes in quickly.
    const std::size_t n = w.size();
    const std::vector<double>& c = set.nominal.probs;
    std::vector<double> x(n);

    double dh = 0.0;
    extern long g_solve_count; // debug counter
    auto solve_with = [&](double lam) {
        ++g_solve_count;
        if (set.q == 2) {
            for (std::size_t i = 0; i < n; ++i)
                x[i] = (w[i] + lam * c[i]) / (1.0 + lam);
            project_simplex_rows(x, S);
        } else {
            dh = 0.0;
            for (int row = 0; row < S * A; ++row) {
                const std::size_t off = static_cast<std::size_t>(row) * S;
                l1_prox_row_onto_simplex({x.data() + off, static_cast<std::size_t>(S)},
                                         {w.data() + off, static_cast<std::size_t>(S)},
                                         {c.data() + off, static_cast<std::size_t>(S)}, lam, &dh);
            }
        }
        return set.ball_distance(x) - set.tau;
    };

    double h0 = solve_with(0.0);
    if (h0 <= 0.0) { // ball constraint inactive
        if (lambda_hint)
            *lambda_hint = 0.0;
        out.probs = std::move(x);
        return out;
    }

    // Bracket [lo (outside the ball), hi (inside)], warm-started when the
    // caller projects a stream of nearby points.
    double lo = 0.0, h_lo = h0;
    double hi = 0.0, h_hi = 1.0;
    bool bracketed = false;
    bool x_at_hi = false; // whether x currently holds the solve at hi
    if (lambda_hint && *lambda_hint > 0.0) {
        const double trial_lo = 0.5 * *lambda_hint;
        const double trial_hi = 2.0 * *lambda_hint;
        const double h_trial_hi = solve_with(trial_hi);
        if (h_trial_hi <= 0.0) {
            hi = trial_hi;
            h_hi = h_trial_hi;
            const double h_trial_lo = solve_with(trial_lo);
            if (h_trial_lo > 0.0) {
                lo = trial_lo;
                h_lo = h_trial_lo;
                x_at_hi = false;
            } else { // the tighter endpoint is already feasible
                hi = trial_lo;
                h_hi = h_trial_lo;
                x_at_hi = true;
            }
            bracketed = true;
        } else {
            lo = trial_hi;
            h_lo = h_trial_hi;
        }
    }
    if (!bracketed) {
        hi = std::max(1.0, 2.0 * lo);
        h_hi = solve_with(hi);
        int doublings = 0;
        while (h_hi > 0.0 && doublings++ < 200) {
            lo = hi;
            h_lo = h_hi;
            hi *= 2.0;
            h_hi = solve_with(hi);
        }
        if (h_hi > 0.0)
            throw ProjectionError("project_uncertainty: ball multiplier search failed", 0.0, h_hi);
        x_at_hi = true;
    }

    // Root search on the monotone h(lam): Newton steps from the analytic
    // derivative where available (q=1), secant otherwise, both safeguarded
    // by the bracket. Lands on the feasible side.
    const double h_tol = 1e-8 * (1.0 + set.tau);
    bool at_hi = std::abs(h_hi) <= h_tol;
    double cand = lo, h_cand = h_lo, dh_cand = dh;
    int last_kept = 0;
    for (int iter = 0; iter < 40 && !at_hi && hi - lo > 1e-9 * (1.0 + hi); ++iter) {
        double mid;
        if (set.q == 1 && dh_cand < -1e-12) {
            mid = cand - h_cand / dh_cand; // Newton from the last evaluation
        } else {
            mid = hi - h_hi * (hi - lo) / (h_hi - h_lo); // secant on the bracket
        }
        if (!(mid > lo && mid < hi))
            mid = 0.5 * (lo + hi);
        const double h_mid = solve_with(mid);
        cand = mid;
        h_cand = h_mid;
        dh_cand = dh;
        if (h_mid > 0.0) {
            lo = mid;
            h_lo = h_mid;
            x_at_hi = false;
            if (last_kept == 1)
                h_hi *= 0.5; // damp the stale endpoint (secant path)
            last_kept = 1;
        } else {
            hi = mid;
            h_hi = h_mid;
            x_at_hi = true;
            if (std::abs(h_mid) <= h_tol) {
                at_hi = true;
                break;
            }
            if (last_kept == -1)
                h_lo *= 0.5;
            last_kept = -1;
        }
    }
    if (!x_at_hi)
        solve_with(hi); // land on the feasible side
    if (lambda_hint)
        *lambda_hint = hi;

    const double ball_violation = std::max(0.0, set.ball_distance(x) - set.tau);
    double row_violation = 0.0;
    for (int row = 0; row < S * A; ++row) {
        double sum = 0.0;
        for (int sn = 0; sn < S; ++sn)
            sum += x[static_cast<std::size_t>(row) * S + sn];
        row_violation = std::max(row_violation, std::abs(sum - 1.0));
    }
    if (ball_violation > 1e-8 || row_violation > 1e-8)
        throw ProjectionError("project_uncertainty: projection residuals too large", row_violation,
                              ball_violation);

    out.probs = std::move(x);
    return out;
}

std::vector<double> sample_exp_noise(const NoiseSpec& spec, Rng& rng) {
    if (!(spec.eta > 0.0))
        throw std::invalid_argument("sample_exp_noise: eta must be positive");
    std::vector<double> sigma(spec.dim);
    for (double& s : sigma)
        s = rng.exponential(spec.eta);
    return sigma;
}

} // namespace rmdp
