// Martingale toolkit: the balance identity between mean velocity and jump
// compensation, reconstruction of sojourn laws from hazard ratios, and
// intensity-change plans.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jtel/core.hpp"
#include "jtel/distributions.hpp"
#include "jtel/simulate.hpp"
#include "jtel/volterra.hpp"

namespace jtel::martingale {

// ---------------------------------------------------------------------------
// Balance identity
// ---------------------------------------------------------------------------

struct BalanceReport {
    std::vector<double> grid;
    std::array<std::vector<double>, 2> residuals;  // survival*cbar + h*f per state
    double max_abs_residual = 0.0;
    bool is_martingale = false;
    /// Grid nodes where the jump and the mean velocity share a sign.
    std::array<int, 2> sign_violations = {0, 0};
    double tolerance = 1e-8;
};

/// Evaluates the drift-compensation residual survival_i cbar_i + h_i f_i on
/// the grid. The model is a martingale exactly when both residuals vanish.
inline BalanceReport balance_residual(const ProcessSpec& spec, const std::vector<double>& grid,
                                      double tolerance = 1e-8) {
    BalanceReport report;
    report.grid = grid;
    report.tolerance = tolerance;
    for (int idx = 0; idx < 2; ++idx) {
        const State i = state_of(idx);
        const SojournDistribution& dist = spec.sojourn[idx];
        auto& res = report.residuals[idx];
        res.resize(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double t = grid[k];
            const double cbar = volterra::averaged_velocity(spec, i, t);
            const double h = spec.jump[idx](t);
            res[k] = dist.survival(t) * cbar + h * dist.density(t);
            if (!std::isfinite(res[k]))
                throw std::runtime_error("balance_residual: non-finite residual at t = " +
                                         std::to_string(t));
            report.max_abs_residual = std::max(report.max_abs_residual, std::abs(res[k]));
            const double scale = std::max({1.0, std::abs(cbar), std::abs(h)});
            if (std::abs(cbar) > 1e-12 * scale && std::abs(h) > 1e-12 * scale &&
                cbar * h > 0.0)
                ++report.sign_violations[idx];
        }
    }
    report.is_martingale = report.max_abs_residual < tolerance;
    return report;
}

// ---------------------------------------------------------------------------
// Sojourn laws from ratios
// ---------------------------------------------------------------------------

/// Pair of mean-velocity-to-jump ratios r_i = cbar_i / h_i with their support.
struct RatioSpec {
    std::array<std::function<double(double)>, 2> ratio;
    std::array<double, 2> support_lower = {0.0, 0.0};
    std::array<double, 2> support_upper = {kInf, kInf};
    /// Analytic divergence flag for the hazard integral, when known.
    std::array<std::optional<bool>, 2> diverges;

    static RatioSpec from_families(const FamilySpec& f0, const FamilySpec& f1) {
        RatioSpec out;
        const HazardRatio r0 = jtel::martingale_ratio(f0);
        const HazardRatio r1 = jtel::martingale_ratio(f1);
        out.ratio = {r0.value, r1.value};
        out.support_lower = {r0.support_lower, r1.support_lower};
        out.support_upper = {r0.support_upper, r1.support_upper};
        out.diverges = {r0.diverges, r1.diverges};
        return out;
    }
};

struct ReconstructedLaws {
    StatePair<SojournDistribution> laws;
    /// Whether the hazard integral was certified to diverge, per state.
    std::array<bool, 2> survival_vanishes = {true, true};
    /// Set when the divergence call came from the numeric heuristic rather
    /// than an analytic flag.
    std::array<bool, 2> heuristic = {false, false};
};

namespace detail {

inline double interp_linear(const std::vector<double>& xs, const std::vector<double>& ys,
                            double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    std::size_t lo = 0, hi = xs.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (xs[mid] <= x ? lo : hi) = mid;
    }
    const double w = (x - xs[lo]) / (xs[lo + 1] - xs[lo]);
    return ys[lo] + w * (ys[lo + 1] - ys[lo]);
}

}  // namespace detail

/// Builds the sojourn laws generated by the ratios: survival(t) =
/// exp(integral of r over [0, t]) and density -r survival. The cumulative
/// integral is carried along `grid` with interior-node panels, so support
/// edges aligned to grid nodes do not leak across the panel boundary.
/// Throws when a ratio is non-negative in the interior of its support; flags
/// (without throwing) ratios whose hazard integral fails to diverge.
inline ReconstructedLaws density_from_ratio(const RatioSpec& ratios,
                                            const std::vector<double>& grid) {
    if (grid.size() < 2 || grid.front() < 0.0)
        throw std::invalid_argument("density_from_ratio: needs an increasing grid from t >= 0");
    ReconstructedLaws out;
    for (int i = 0; i < 2; ++i) {
        const auto& r = ratios.ratio[i];
        const double sup_lo = ratios.support_lower[i];
        const double sup_hi = ratios.support_upper[i];
        auto guarded = [r, sup_hi](double t) {
            return (t >= sup_hi) ? -kInf : r(t);
        };
        for (double t : grid) {
            if (t >= sup_hi) break;
            const double v = r(t);
            if (t > sup_lo && v >= 0.0)
                throw std::invalid_argument(
                    "density_from_ratio: ratio is non-negative at t = " + std::to_string(t) +
                    "; a martingale model requires a strictly negative ratio inside the support");
        }
        std::vector<double> nodes;
        nodes.reserve(grid.size());
        for (double t : grid) {
            if (t >= sup_hi) break;
            nodes.push_back(t);
        }
        std::vector<double> cumulative =
            cumulative_integral([&](double s) { return r(s); }, nodes);

        // Divergence of the hazard integral: analytic flag when present, else
        // compare the integral over a long horizon against -log(eps).
        bool diverges;
        bool heuristic = false;
        if (ratios.diverges[i].has_value()) {
            diverges = *ratios.diverges[i];
        } else if (std::isfinite(sup_hi)) {
            diverges = true;  // blow-up support edge
        } else {
            heuristic = true;
            const double horizon = 10.0 * nodes.back();
            const double tail = integrate_gl_panels([&](double s) { return -r(s); },
                                                    nodes.front(), horizon, 64);
            diverges = tail > -std::log(1e-12);
        }
        out.survival_vanishes[i] = diverges;
        out.heuristic[i] = heuristic;

        const double slope_end = nodes.size() >= 2 ? r(nodes.back()) : 0.0;
        auto log_survival = [nodes, cumulative, slope_end, sup_hi](double t) -> double {
            if (t <= nodes.front()) return 0.0;
            if (t >= sup_hi) return -kInf;
            if (t > nodes.back())
                return cumulative.back() + slope_end * (t - nodes.back());
            return detail::interp_linear(nodes, cumulative, t);
        };

        SojournDistribution law;
        law.support_lower = sup_lo;
        law.support_upper = sup_hi;
        law.survival = [log_survival](double t) {
            return t <= 0.0 ? 1.0 : std::exp(log_survival(t));
        };
        law.cdf = [survival = law.survival](double t) { return 1.0 - survival(t); };
        law.density = [guarded, survival = law.survival, sup_lo](double t) {
            if (t < sup_lo || !(t >= 0.0)) return 0.0;
            const double s = survival(t);
            if (s == 0.0) return 0.0;
            const double v = -guarded(t) * s;
            return std::isfinite(v) ? v : 0.0;
        };
        law.scale_hint = std::isfinite(sup_hi) ? 0.5 * sup_hi
                                               : std::max(nodes.back() / 5.0, 1e-6);
        law.quantile = make_numeric_quantile(law.cdf, law.density, sup_lo, sup_hi,
                                             law.scale_hint);
        law.hazard_diverges = diverges;
        out.laws[i] = std::move(law);
    }
    return out;
}

/// Composes the printed family ratio with the reconstruction and reports the
/// largest pointwise density error on `grid`.
inline double roundtrip_check(const FamilySpec& family, const std::vector<double>& grid) {
    const SojournDistribution reference = build(family);
    RatioSpec ratios = RatioSpec::from_families(family, family);
    const ReconstructedLaws rebuilt = density_from_ratio(ratios, grid);
    double worst = 0.0;
    for (double t : grid) {
        if (t >= reference.support_upper) break;
        worst = std::max(worst,
                         std::abs(rebuilt.laws[0].density(t) - reference.density(t)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Plans and calibration
// ---------------------------------------------------------------------------

/// Plan for re-weighting paths sampled under base exponential intensities so
/// the target-intensity martingale law prices them.
inline mc::GirsanovPlan build_girsanov_plan(std::pair<double, double> base_intensities,
                                            std::pair<double, double> target_intensities) {
    return mc::GirsanovPlan(base_intensities.first, base_intensities.second,
                            target_intensities.first, target_intensities.second);
}

/// Solves for the exponential intensities implied by observed separable
/// regimes c_i(tau, t) = gamma_i(tau) kappa_i(t), h_i(t) = rho_i kappa_i(t):
/// the balance identity reduces to two scalar equations
/// lambda_{1-i} * Laplace(gamma_i)(lambda_{1-i}) = -lambda_i rho_i.
/// Requires rho_i < 0 (jumps opposing the mean velocity).
inline std::pair<double, double> calibrate_exponential_intensities(
    const std::function<double(double)>& gamma0, const std::function<double(double)>& gamma1,
    double rho0, double rho1, double gamma_scale = 1.0) {
    if (!(rho0 < 0.0) || !(rho1 < 0.0))
        throw std::invalid_argument(
            "calibrate_exponential_intensities: requires rho_i < 0 (jump opposite to velocity)");
    auto weighted_laplace = [&](const std::function<double(double)>& gamma, double lam) {
        const double upper = std::max(60.0 / lam, 8.0 * gamma_scale);
        return lam * integrate_gl_tail(
                         [&](double tau) { return std::exp(-lam * tau) * gamma(tau); }, 0.0,
                         upper, 1.0 / lam);
    };
    // lambda0 follows from lambda1 through the first equation; close the loop
    // with bisection on the second.
    auto lambda0_of = [&](double lam1) { return -weighted_laplace(gamma0, lam1) / rho0; };
    auto mismatch = [&](double lam1) {
        const double lam0 = lambda0_of(lam1);
        if (!(lam0 > 0.0)) return kInf;
        return weighted_laplace(gamma1, lam0) + lam1 * rho1;
    };
    // mismatch decreases in lambda1: positive near zero when a genuine root
    // exists, negative for large rates. Expand the upper end until it goes
    // negative, then bisect. Degenerate problems collapse onto the trivial
    // zero-rate root and fail the positivity check at the left end.
    double lo = 1e-6, hi = 1.0;
    while (mismatch(hi) > 0.0 && hi < 1e8) hi *= 2.0;
    if (!(mismatch(lo) > 1e-10) || !(mismatch(hi) <= 0.0))
        throw std::runtime_error(
            "calibrate_exponential_intensities: no positive-intensity solution bracketed");
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (mismatch(mid) > 0.0 ? lo : hi) = mid;
        if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
    }
    const double lam1 = 0.5 * (lo + hi);
    const double lam0 = lambda0_of(lam1);
    const double residual0 = weighted_laplace(gamma0, lam1) + lam0 * rho0;
    const double residual1 = weighted_laplace(gamma1, lam0) + lam1 * rho1;
    const double scale = std::max({1.0, lam0, lam1});
    if (std::abs(residual0) > 1e-8 * scale || std::abs(residual1) > 1e-8 * scale)
        throw std::runtime_error(
            "calibrate_exponential_intensities: bisection did not reach a balanced root");
    return {lam0, lam1};
}

}  // namespace jtel::martingale
