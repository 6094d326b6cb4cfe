// Shared builders for test models.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "jtel/analytic.hpp"
#include "jtel/core.hpp"
#include "jtel/distributions.hpp"

namespace support {

/// Constant-everything model: velocities v0/v1, jumps j0/j1, exponential
/// rates l0/l1.
inline jtel::ProcessSpec constant_spec(double v0, double v1, double j0, double j1, double l0,
                                       double l1, jtel::State initial = jtel::State::s0) {
    jtel::ProcessSpec spec;
    spec.velocity[0] = jtel::VelocityRegime::constant(v0);
    spec.velocity[1] = jtel::VelocityRegime::constant(v1);
    spec.jump[0] = jtel::JumpRegime::constant(j0);
    spec.jump[1] = jtel::JumpRegime::constant(j1);
    spec.sojourn[0] = jtel::build(jtel::Exponential{l0});
    spec.sojourn[1] = jtel::build(jtel::Exponential{l1});
    spec.initial_state = initial;
    return spec;
}

/// Martingale-balanced model over arbitrary families: constant jumps kappa_i
/// and time-varying velocities c_i(t) = kappa_i r_i(t), where r_i is the
/// family hazard ratio. The displacement closed form is kappa_i times the
/// log-survival difference, exact for every family. `flip_sign[i]` breaks the
/// balance of state i deliberately.
inline jtel::ProcessSpec calibrated_spec(const jtel::FamilySpec& f0, const jtel::FamilySpec& f1,
                                         double kappa0, double kappa1, bool flip0 = false,
                                         bool flip1 = false,
                                         jtel::State initial = jtel::State::s0) {
    jtel::ProcessSpec spec;
    const jtel::FamilySpec families[2] = {f0, f1};
    const double kappas[2] = {kappa0, kappa1};
    const bool flips[2] = {flip0, flip1};
    for (int i = 0; i < 2; ++i) {
        auto dist = jtel::build(families[i]);
        const auto ratio = jtel::martingale_ratio(families[i]);
        const double upper = std::isfinite(dist.support_upper)
                                 ? dist.support_upper * (1.0 - 1e-9)
                                 : jtel::kInf;
        const double kappa = kappas[i];
        auto r_guarded = [value = ratio.value, upper](double t) {
            return t < upper ? value(t) : 0.0;
        };
        auto log_survival = [survival = dist.survival, upper](double t) {
            return t < upper ? std::log(survival(t)) : std::log(survival(upper));
        };
        spec.velocity[i] = jtel::VelocityRegime(
            [r_guarded, kappa](double, double u) { return kappa * r_guarded(u); },
            [log_survival, kappa](double, double u, double t) {
                return kappa * (log_survival(t) - log_survival(u));
            },
            false);
        spec.jump[i] = jtel::JumpRegime::constant(flips[i] ? -kappa : kappa);
        spec.sojourn[i] = std::move(dist);
    }
    spec.initial_state = initial;
    return spec;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k)
        out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    return out;
}

/// Grid over the support of the constant-case density, split at its jump
/// discontinuities (the cone edges and their shifted copies) with nodes inset
/// by a hair so trapezoid panels never straddle a one-sided value.
inline std::vector<double> split_support_grid(const jtel::analytic::ConstantCaseParams& p,
                                              jtel::State i, double t,
                                              std::size_t per_segment) {
    const double hi_amp = p.jump_amplitude(i);
    std::vector<double> breaks = {p.c1 * t, p.c0 * t, p.c1 * t + hi_amp, p.c0 * t + hi_amp};
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [&](double a, double b) { return std::abs(a - b) < 1e-13; }),
                 breaks.end());
    const double inset = 1e-11 * (1.0 + std::abs(breaks.back() - breaks.front()));
    std::vector<double> grid;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const auto seg = linspace(breaks[s] + inset, breaks[s + 1] - inset, per_segment);
        grid.insert(grid.end(), seg.begin(), seg.end());
    }
    return grid;
}

}  // namespace support
