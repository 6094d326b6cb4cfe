// Modified Bessel functions I0 and I1 by direct series summation.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jtel {

// Beyond z ~ 709 the unscaled value exceeds the double range.
inline constexpr double kBesselOverflow = std::numeric_limits<double>::infinity();

namespace detail {

// Sum of the I0 (m = 0) or I1/z-normalised (m = 1) power series, optionally
// with every term scaled by exp(-z) so partial sums stay on scale for large z.
inline double bessel_series(int m, double z, bool scaled) {
    const double q = 0.25 * z * z;
    double term = scaled ? std::exp(-z) : 1.0;
    if (m == 1) term *= 0.5;
    double sum = term;
    for (int n = 1; n < 4000; ++n) {
        term *= q / (static_cast<double>(n) * (n + m));
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

}  // namespace detail

/// I0(z) or I1(z) for z >= 0. The plain series is summed for z <= 30; above
/// that the terms are evaluated exp(-z)-scaled and the result rescaled, which
/// keeps intermediate sums bounded.
inline double bessel_i(int order, double z) {
    if (order != 0 && order != 1) throw std::domain_error("bessel_i: order must be 0 or 1");
    if (z < 0.0) throw std::domain_error("bessel_i: requires z >= 0");
    if (z > 700.0) return kBesselOverflow;
    const bool scaled = z > 30.0;
    double sum = detail::bessel_series(order, z, scaled);
    if (order == 1) sum *= z;
    return scaled ? std::exp(z) * sum : sum;
}

/// I1(z) / z, finite down to z = 0 where it equals 1/2.
inline double bessel_i1_over_z(double z) {
    if (z < 0.0) throw std::domain_error("bessel_i1_over_z: requires z >= 0");
    if (z > 700.0) return kBesselOverflow;
    const bool scaled = z > 30.0;
    double sum = detail::bessel_series(1, z, scaled);
    return scaled ? std::exp(z) * sum : sum;
}

}  // namespace jtel
