// Density evaluation result shared by the closed-form and Monte Carlo paths.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

namespace jtel {

/// Singular atom plus the absolutely continuous part of a position law at a
/// fixed time, on an x-grid.
///
/// Two layouts are used. `nodal`: x_grid holds sample points and
/// density_values pointwise densities (continuous mass = trapezoid).
/// `histogram`: x_grid holds bin edges (one more entry than density_values)
/// and each value is the bin-averaged density (continuous mass = exact sum).
struct DensityResult {
    enum class Layout { nodal, histogram };

    double atom_location = std::numeric_limits<double>::quiet_NaN();
    double atom_mass = 0.0;
    /// Standard deviation of the no-switch positions; zero when the atom is a
    /// genuine point mass (constant velocity regimes).
    double atom_dispersion = 0.0;

    std::vector<double> x_grid;
    std::vector<double> density_values;
    Layout layout = Layout::nodal;

    /// Continuous mass that fell outside the grid (Monte Carlo only).
    double mass_below = 0.0;
    double mass_above = 0.0;

    /// Cleared when the grid fails to cover the support of the continuous part.
    bool covers_support = true;
    /// Set when the two-term closed form is the exact order sum (jump
    /// amplitudes cancel); cleared as a diagnostic otherwise.
    bool closed_form_exact = true;

    double continuous_mass() const {
        double sum = 0.0;
        if (layout == Layout::histogram) {
            for (std::size_t b = 0; b < density_values.size(); ++b)
                sum += density_values[b] * (x_grid[b + 1] - x_grid[b]);
        } else {
            for (std::size_t k = 1; k < x_grid.size(); ++k)
                sum += 0.5 * (density_values[k] + density_values[k - 1]) *
                       (x_grid[k] - x_grid[k - 1]);
        }
        return sum;
    }

    double total_mass() const {
        return atom_mass + continuous_mass() + mass_below + mass_above;
    }
};

}  // namespace jtel
