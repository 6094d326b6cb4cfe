// Closed-form transition densities for the constant-parameter case: constant
// velocities c0 > c1, constant jump amplitudes, exponential sojourns.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "jtel/bessel.hpp"
#include "jtel/core.hpp"
#include "jtel/density_result.hpp"

namespace jtel::analytic {

struct ConstantCaseParams {
    double c0, c1;          // velocities, c0 > c1 strictly
    double h0, h1;          // jump amplitudes
    double lambda0, lambda1;  // switching rates

    ConstantCaseParams(double c0_, double c1_, double h0_, double h1_, double l0, double l1)
        : c0(c0_), c1(c1_), h0(h0_), h1(h1_), lambda0(l0), lambda1(l1) {
        if (!(c0 > c1))
            throw std::invalid_argument("constant case: requires c0 > c1 (zero-width cone)");
        if (!(lambda0 > 0.0) || !(lambda1 > 0.0))
            throw std::invalid_argument("constant case: requires positive rates");
    }

    double velocity(State s) const { return s == State::s0 ? c0 : c1; }
    double jump_amplitude(State s) const { return s == State::s0 ? h0 : h1; }
    double rate(State s) const { return s == State::s0 ? lambda0 : lambda1; }
    double cone_width() const { return c0 - c1; }
};

/// Coordinates of a point (x, t) relative to the light cone (c1 t, c0 t):
/// xi is the time the fast regime must have been active, theta the
/// exponential weight. theta vanishes outside the open cone.
struct KinematicFrame {
    double xi;
    double t_minus_xi;
    double theta;

    KinematicFrame(const ConstantCaseParams& p, double x, double t) {
        xi = (x - p.c1 * t) / (p.c0 - p.c1);
        t_minus_xi = t - xi;
        theta = (xi > 0.0 && xi < t)
                    ? std::exp(-p.lambda0 * xi - p.lambda1 * t_minus_xi) / (p.c0 - p.c1)
                    : 0.0;
    }
};

/// Accumulated jump displacement after n switches from initial state i:
/// amplitudes alternate starting with h_i.
inline double jump_shift(const ConstantCaseParams& p, State i, int n) {
    const double hi = p.jump_amplitude(i);
    const double ho = p.jump_amplitude(flip(i));
    return ((n + 1) / 2) * hi + (n / 2) * ho;
}

inline double atom_mass(const ConstantCaseParams& p, State i, double t) {
    return std::exp(-p.rate(i) * t);
}
inline double atom_location(const ConstantCaseParams& p, State i, double t) {
    return p.velocity(i) * t;
}

/// Support interval of the absolutely continuous part.
inline std::pair<double, double> support(const ConstantCaseParams& p, State i, double t) {
    const double hi = p.jump_amplitude(i);
    const double h_even = hi + p.jump_amplitude(flip(i));
    double lo_shift = std::min({0.0, hi, h_even});
    double hi_shift = std::max({0.0, hi, h_even});
    return {p.c1 * t + lo_shift, p.c0 * t + hi_shift};
}

/// Joint density of the position and the event of exactly n switches by time
/// t, started from state i. n >= 1; the n = 0 part is the atom.
inline double density_n(const ConstantCaseParams& p, State i, double x, double t, int n) {
    if (!(t > 0.0)) throw std::domain_error("density_n: requires t > 0");
    if (n < 1)
        throw std::invalid_argument(
            "density_n: n = 0 is the singular part; use atom_mass/atom_location");
    const KinematicFrame frame(p, x - jump_shift(p, i, n), t);
    if (frame.theta == 0.0) return 0.0;

    const double log_l0 = std::log(p.lambda0), log_l1 = std::log(p.lambda1);
    const double log_xi = std::log(frame.xi), log_rest = std::log(frame.t_minus_xi);
    double log_q;
    if (n % 2 == 0) {
        const int m = n / 2;
        log_q = m * (log_l0 + log_l1) - std::lgamma(m) - std::lgamma(m + 1);
        if (i == State::s0)
            log_q += m * log_xi + (m - 1) * log_rest;
        else
            log_q += (m - 1) * log_xi + m * log_rest;
    } else {
        const int m = (n - 1) / 2;
        log_q = -2.0 * std::lgamma(m + 1) + m * (log_xi + log_rest);
        if (i == State::s0)
            log_q += (m + 1) * log_l0 + m * log_l1;
        else
            log_q += m * log_l0 + (m + 1) * log_l1;
    }
    return std::exp(log_q) * frame.theta;
}

/// Smallest truncation order whose tail is below tol: (lambda_max t)^n / n!.
inline int series_truncation(const ConstantCaseParams& p, double t, double tol = 1e-12) {
    const double z = std::max(p.lambda0, p.lambda1) * t;
    int n = 1;
    while (n * std::log(z > 0 ? z : 1e-300) - std::lgamma(n + 1.0) >= std::log(tol) && n < 400)
        ++n;
    return n;
}

/// Partial order sum: continuous density through n_max switches.
inline double density_series(const ConstantCaseParams& p, State i, double x, double t,
                             int n_max) {
    double sum = 0.0;
    for (int n = 1; n <= n_max; ++n) sum += density_n(p, i, x, t, n);
    return sum;
}

/// Pointwise value of the two-Bessel-term closed form for the continuous
/// density. Exact when the jump amplitudes cancel (h0 + h1 = 0); elsewhere the
/// order sum is authoritative.
inline double density_closed_form(const ConstantCaseParams& p, State i, double x, double t) {
    const double li = p.rate(i);
    const KinematicFrame shifted(p, x - p.jump_amplitude(i), t);
    double term1 = 0.0;
    if (shifted.theta > 0.0) {
        const double z =
            2.0 * std::sqrt(p.lambda0 * p.lambda1 * shifted.xi * shifted.t_minus_xi);
        term1 = li * shifted.theta * bessel_i(0, z);
    }
    const KinematicFrame plain(p, x, t);
    double term2 = 0.0;
    if (plain.theta > 0.0) {
        const double z = 2.0 * std::sqrt(p.lambda0 * p.lambda1 * plain.xi * plain.t_minus_xi);
        const double side = (i == State::s0) ? plain.xi : plain.t_minus_xi;
        term2 = 2.0 * p.lambda0 * p.lambda1 * side * plain.theta * bessel_i1_over_z(z);
    }
    return term1 + term2;
}

/// Full density at time t on a grid of sample points: atom plus the closed
/// form evaluated pointwise.
inline DensityResult density_total(const ConstantCaseParams& p, State i, double t,
                                   const std::vector<double>& x_grid) {
    if (!(t > 0.0)) throw std::domain_error("density_total: requires t > 0");
    DensityResult out;
    out.layout = DensityResult::Layout::nodal;
    out.atom_location = atom_location(p, i, t);
    out.atom_mass = atom_mass(p, i, t);
    out.x_grid = x_grid;
    out.density_values.resize(x_grid.size());
    for (std::size_t k = 0; k < x_grid.size(); ++k)
        out.density_values[k] = density_closed_form(p, i, x_grid[k], t);

    const auto [lo, hi] = support(p, i, t);
    const double pad = 1e-9 * (1.0 + std::abs(hi - lo));
    out.covers_support =
        !x_grid.empty() && x_grid.front() <= lo + pad && x_grid.back() >= hi - pad;
    const double scale = std::max({1.0, std::abs(p.h0), std::abs(p.h1)});
    out.closed_form_exact = std::abs(p.h0 + p.h1) <= 1e-12 * scale;
    return out;
}

}  // namespace jtel::analytic
