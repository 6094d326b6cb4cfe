// Trapezoidal product-integration solvers for the coupled Volterra systems
// satisfied by the moments of the process, the exponential-case closed form,
// and the expectation surface of a payoff.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jtel/core.hpp"

namespace jtel::volterra {

using GridFn = std::vector<double>;
using GridFnPair = std::array<GridFn, 2>;

struct UniformGrid {
    double dt = 0.0;
    std::size_t steps = 0;  // nodes are 0..steps

    static UniformGrid over(double horizon, double dt) {
        if (!(dt > 0.0) || !(horizon > 0.0))
            throw std::invalid_argument("grid: requires horizon > 0 and dt > 0");
        UniformGrid g;
        g.dt = dt;
        g.steps = static_cast<std::size_t>(std::llround(horizon / dt));
        if (g.steps < 1) g.steps = 1;
        return g;
    }

    std::size_t size() const { return steps + 1; }
    double time(std::size_t k) const { return dt * static_cast<double>(k); }
    double horizon() const { return time(steps); }
};

// ---------------------------------------------------------------------------
// Averages over the memory variable
// ---------------------------------------------------------------------------

namespace detail {

/// Average of `fn` over the sojourn law of the state opposite to i, truncated
/// at the 1 - 1e-10 quantile. Memory-free callers skip the quadrature.
inline double memory_average(const ProcessSpec& spec, State i,
                             const std::function<double(double)>& fn) {
    const SojournDistribution& other = spec.sojourn[flip(i)];
    const double lo = other.support_lower;
    const double hi = other.truncation_point();
    return integrate_gl_tail([&](double tau) { return other.density(tau) * fn(tau); }, lo, hi,
                             other.scale_hint);
}

}  // namespace detail

/// Mean velocity at elapsed time s of a segment in state i, averaged over the
/// previous sojourn.
inline double averaged_velocity(const ProcessSpec& spec, State i, double s) {
    const VelocityRegime& v = spec.velocity[i];
    if (!v.memory_dependent()) return v(0.0, s);
    return detail::memory_average(spec, i, [&](double tau) { return v(tau, s); });
}

/// Mean of (displacement over [0, t] + shift)^m, averaged over the previous
/// sojourn. shift = 0 gives the averaged displacement powers, shift = h_i(t)
/// the convolution weights of the moment recursion.
inline double averaged_displacement_pow(const ProcessSpec& spec, State i, double t, int m,
                                        double shift = 0.0) {
    const VelocityRegime& v = spec.velocity[i];
    if (!v.memory_dependent())
        return std::pow(displacement(v, 0.0, 0.0, t) + shift, m);
    return detail::memory_average(spec, i, [&](double tau) {
        return std::pow(displacement(v, tau, 0.0, t) + shift, m);
    });
}

// ---------------------------------------------------------------------------
// Discrete system and the pair solver
// ---------------------------------------------------------------------------

/// Kernel samples with split-integration semantics at aligned breaks: `mid`
/// carries midpoint values for interior nodes, `left` the left limits used
/// when a convolution range ends on the node.
struct KernelGrid {
    GridFnPair mid;
    GridFnPair left;
};

/// Coupled pair x_0 = a_0 + f_0 * x_1, x_1 = a_1 + f_1 * x_0 sampled on a
/// uniform grid (kernels are the sojourn densities).
struct VolterraSystem {
    UniformGrid grid;
    GridFnPair forcing;
    KernelGrid kernel;
};

/// Node samples of both sojourn densities. Rejects non-integrable node values
/// and grids too coarse for a kernel support offset. A node landing on an
/// interior discontinuity carries the midpoint of the one-sided limits, which
/// keeps the trapezoid rule equivalent to split integration there.
inline KernelGrid sample_kernels(const ProcessSpec& spec, const UniformGrid& grid) {
    KernelGrid out;
    for (int i = 0; i < 2; ++i) {
        const SojournDistribution& dist = spec.sojourn[i];
        if (dist.support_lower > 0.0 && grid.dt > dist.support_lower / 4.0)
            throw std::invalid_argument(
                "kernel support starts at " + std::to_string(dist.support_lower) +
                ": requires dt <= " + std::to_string(dist.support_lower / 4.0));
        out.mid[i].resize(grid.size());
        out.left[i].resize(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double t = grid.time(k);
            double mid = dist.density(t);
            double left = mid;
            for (double b : dist.density_breaks) {
                if (std::abs(t - b) <= 1e-9 * (1.0 + std::abs(b))) {
                    const double step = 1e-6 * (1.0 + std::abs(b));
                    left = dist.density(b - step);
                    mid = 0.5 * (left + dist.density(b + step));
                    break;
                }
            }
            if (!std::isfinite(mid))
                throw std::runtime_error("kernel density is non-finite at t = " +
                                         std::to_string(t));
            out.mid[i][k] = mid;
            out.left[i][k] = left;
        }
    }
    return out;
}

/// Joint time-stepping of the coupled pair by the trapezoidal product rule;
/// the two implicit diagonal terms are eliminated exactly at each step.
/// Second-order accurate for smooth inputs.
inline GridFnPair solve_pair(const VolterraSystem& system) {
    const std::size_t n = system.grid.size();
    const double dt = system.grid.dt;
    for (int i = 0; i < 2; ++i) {
        if (system.forcing[i].size() != n || system.kernel.mid[i].size() != n ||
            system.kernel.left[i].size() != n)
            throw std::invalid_argument("solve_pair: forcing/kernel size mismatch with grid");
        for (double v : system.forcing[i])
            if (!std::isfinite(v)) throw std::runtime_error("solve_pair: non-finite forcing");
    }
    GridFnPair x{GridFn(n), GridFn(n)};
    x[0][0] = system.forcing[0][0];
    x[1][0] = system.forcing[1][0];
    const double alpha0 = 0.5 * dt * system.kernel.mid[0][0];
    const double alpha1 = 0.5 * dt * system.kernel.mid[1][0];
    const double denom = 1.0 - alpha0 * alpha1;
    for (std::size_t k = 1; k < n; ++k) {
        // the s = t_k endpoint takes the left limit of the kernel
        double s0 = 0.5 * system.kernel.left[0][k] * x[1][0];
        double s1 = 0.5 * system.kernel.left[1][k] * x[0][0];
        for (std::size_t j = 1; j < k; ++j) {
            s0 += system.kernel.mid[0][j] * x[1][k - j];
            s1 += system.kernel.mid[1][j] * x[0][k - j];
        }
        const double rhs0 = system.forcing[0][k] + dt * s0;
        const double rhs1 = system.forcing[1][k] + dt * s1;
        x[0][k] = (rhs0 + alpha0 * rhs1) / denom;
        x[1][k] = rhs1 + alpha1 * x[0][k];
    }
    return x;
}

// ---------------------------------------------------------------------------
// Forcing terms
// ---------------------------------------------------------------------------

/// First-moment forcing a_i(t): cumulative trapezoid of
/// survival_i(s) cbar_i(s) + f_i(s) h_i(s). Vanishes identically on
/// martingale-balanced models.
inline GridFnPair forcing_mean(const ProcessSpec& spec, const UniformGrid& grid) {
    GridFnPair out;
    for (int idx = 0; idx < 2; ++idx) {
        const State i = state_of(idx);
        const SojournDistribution& dist = spec.sojourn[idx];
        const JumpRegime& jump = spec.jump[idx];
        auto integrand_at = [&](double t) {
            return dist.survival(t) * averaged_velocity(spec, i, t) +
                   dist.density(t) * jump(t);
        };
        // one-sided node values so that panels never straddle a break
        GridFn from_right(grid.size()), from_left(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double t = grid.time(k);
            double plus = integrand_at(t);
            double minus = plus;
            for (double b : dist.density_breaks) {
                if (std::abs(t - b) <= 1e-9 * (1.0 + std::abs(b))) {
                    const double step = 1e-6 * (1.0 + std::abs(b));
                    minus = integrand_at(b - step);
                    plus = integrand_at(b + step);
                    break;
                }
            }
            if (!std::isfinite(plus) || !std::isfinite(minus))
                throw std::runtime_error("forcing_mean: non-finite integrand at t = " +
                                         std::to_string(t));
            from_right[k] = plus;
            from_left[k] = minus;
        }
        out[idx].assign(grid.size(), 0.0);
        for (std::size_t k = 1; k < grid.size(); ++k)
            out[idx][k] =
                out[idx][k - 1] + 0.5 * grid.dt * (from_right[k - 1] + from_left[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

struct MomentSolution {
    int order = 0;
    GridFnPair values;
    double dt = 0.0;
    std::string rule = "trapezoidal-product";
};

namespace detail {

// Trapezoidal convolution (w * mu)(t_k) over [0, t_k] for one k, with a
// separate left-limit weight for the s = t_k endpoint.
inline double convolve_at(const GridFn& w_mid, const GridFn& w_left, const GridFn& mu,
                          double dt, std::size_t k) {
    if (k == 0) return 0.0;
    double s = 0.5 * (w_mid[0] * mu[k] + w_left[k] * mu[0]);
    for (std::size_t j = 1; j < k; ++j) s += w_mid[j] * mu[k - j];
    return s * dt;
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r *= static_cast<double>(n - k + j) / j;
    return r;
}

inline void check_moment_existence(const ProcessSpec& spec, int order) {
    for (int idx = 0; idx < 2; ++idx) {
        const State i = state_of(idx);
        if (!spec.velocity[i].memory_dependent()) continue;
        const SojournDistribution& other = spec.sojourn[flip(i)];
        if (static_cast<double>(order) >= other.sup_finite_moment)
            throw std::invalid_argument(
                "moment of order " + std::to_string(order) +
                " does not exist: memory-dependent velocity averaged against a sojourn law "
                "with finite moments only below " +
                std::to_string(other.sup_finite_moment));
    }
}

}  // namespace detail

/// Solves the moment systems recursively for orders 0..N. Order zero is the
/// exact constant one, order one uses the integrated-by-parts forcing, higher
/// orders build their forcing from lower moments through binomial-weighted
/// convolutions.
inline std::vector<MomentSolution> solve_moments(const ProcessSpec& spec, int order_max,
                                                 const UniformGrid& grid) {
    if (order_max < 0 || order_max > 6)
        throw std::invalid_argument("solve_moments: supported orders are 0..6");
    detail::check_moment_existence(spec, order_max);
    const KernelGrid kernels = sample_kernels(spec, grid);
    const std::size_t n = grid.size();

    // Node caches shared across orders.
    GridFnPair survival, jump_amp;
    for (int i = 0; i < 2; ++i) {
        survival[i].resize(n);
        jump_amp[i].resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            survival[i][k] = spec.sojourn[i].survival(grid.time(k));
            jump_amp[i][k] = spec.jump[i](grid.time(k));
        }
    }

    std::vector<MomentSolution> solutions;
    solutions.reserve(order_max + 1);
    MomentSolution zero;
    zero.order = 0;
    zero.dt = grid.dt;
    zero.values = {GridFn(n, 1.0), GridFn(n, 1.0)};
    solutions.push_back(std::move(zero));

    for (int N = 1; N <= order_max; ++N) {
        VolterraSystem system;
        system.grid = grid;
        system.kernel = kernels;
        if (N == 1) {
            system.forcing = forcing_mean(spec, grid);
        } else {
            for (int idx = 0; idx < 2; ++idx) {
                const State i = state_of(idx);
                GridFn a(n, 0.0);
                for (std::size_t k = 0; k < n; ++k)
                    a[k] = survival[idx][k] *
                           averaged_displacement_pow(spec, i, grid.time(k), N);
                for (int j = 0; j <= N - 1; ++j) {
                    const int m = N - j;
                    GridFn w_mid(n), w_left(n);
                    for (std::size_t k = 0; k < n; ++k) {
                        const double pow_term = averaged_displacement_pow(
                            spec, i, grid.time(k), m, jump_amp[idx][k]);
                        w_mid[k] = kernels.mid[idx][k] * pow_term;
                        w_left[k] = kernels.left[idx][k] * pow_term;
                    }
                    const double c = detail::binomial(N, j);
                    const GridFn& lower = solutions[j].values[index(flip(i))];
                    for (std::size_t k = 1; k < n; ++k)
                        a[k] += c * detail::convolve_at(w_mid, w_left, lower, grid.dt, k);
                }
                system.forcing[idx] = std::move(a);
            }
        }
        MomentSolution sol;
        sol.order = N;
        sol.dt = grid.dt;
        sol.values = solve_pair(system);
        solutions.push_back(std::move(sol));
    }
    return solutions;
}

/// Variance grid functions from the solved first and second moments.
inline GridFnPair variance_from_moments(const std::vector<MomentSolution>& solutions) {
    if (solutions.size() < 3)
        throw std::invalid_argument("variance_from_moments: needs orders up to 2");
    GridFnPair out;
    for (int i = 0; i < 2; ++i) {
        const GridFn& m1 = solutions[1].values[i];
        const GridFn& m2 = solutions[2].values[i];
        out[i].resize(m1.size());
        for (std::size_t k = 0; k < m1.size(); ++k) out[i][k] = m2[k] - m1[k] * m1[k];
    }
    return out;
}

/// Direct variance solve: the variance pair satisfies its own Volterra system
/// whose forcing couples the mean surface into a shifted squared deviation.
/// `means` must be the first-moment solution on the same grid.
inline GridFnPair solve_variance_direct(const ProcessSpec& spec, const UniformGrid& grid,
                                        const GridFnPair& means) {
    const KernelGrid kernels = sample_kernels(spec, grid);
    const std::size_t n = grid.size();
    VolterraSystem system;
    system.grid = grid;
    system.kernel = kernels;
    for (int idx = 0; idx < 2; ++idx) {
        const State i = state_of(idx);
        const SojournDistribution& dist = spec.sojourn[idx];
        GridFn lbar(n), hval(n);
        for (std::size_t k = 0; k < n; ++k) {
            lbar[k] = averaged_displacement_pow(spec, i, grid.time(k), 1);
            hval[k] = spec.jump[idx](grid.time(k));
        }
        const GridFn& mu_self = means[idx];
        const GridFn& mu_other = means[index(flip(i))];
        GridFn b(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const double t = grid.time(k);
            const double dev = lbar[k] - mu_self[k];
            double acc = dist.survival(t) * dev * dev;
            if (k > 0) {
                double s = 0.0;
                for (std::size_t j = 0; j <= k; ++j) {
                    const double w = (j == 0 || j == k) ? 0.5 : 1.0;
                    const double f =
                        (j == k) ? kernels.left[idx][j] : kernels.mid[idx][j];
                    const double inner = lbar[j] + hval[j] + mu_other[k - j] - mu_self[k];
                    s += w * f * inner * inner;
                }
                acc += grid.dt * s;
            }
            b[k] = acc;
        }
        system.forcing[idx] = std::move(b);
    }
    return solve_pair(system);
}

// ---------------------------------------------------------------------------
// Exponential-case closed form
// ---------------------------------------------------------------------------

struct Mat2 {
    double a00 = 0, a01 = 0, a10 = 0, a11 = 0;

    static Mat2 identity() { return {1, 0, 0, 1}; }
    Mat2 operator*(const Mat2& o) const {
        return {a00 * o.a00 + a01 * o.a10, a00 * o.a01 + a01 * o.a11,
                a10 * o.a00 + a11 * o.a10, a10 * o.a01 + a11 * o.a11};
    }
    Mat2 operator+(const Mat2& o) const {
        return {a00 + o.a00, a01 + o.a01, a10 + o.a10, a11 + o.a11};
    }
    Mat2 scaled(double s) const { return {s * a00, s * a01, s * a10, s * a11}; }
    std::array<double, 2> apply(double v0, double v1) const {
        return {a00 * v0 + a01 * v1, a10 * v0 + a11 * v1};
    }
};

/// The two-state generator algebra: off-diagonal intensity matrix L, generator
/// Lambda, and the scalar phi giving exp(t Lambda) = I + phi(t) Lambda.
struct ExponentialCaseMatrices {
    double lambda0, lambda1;

    ExponentialCaseMatrices(double l0, double l1) : lambda0(l0), lambda1(l1) {
        if (!(l0 > 0.0) || !(l1 > 0.0))
            throw std::invalid_argument("exponential case: requires positive rates");
    }

    Mat2 intensity() const { return {0.0, lambda0, lambda1, 0.0}; }
    Mat2 generator() const { return {-lambda0, lambda0, lambda1, -lambda1}; }
    double two_lambda() const { return lambda0 + lambda1; }
    double phi(double t) const { return -std::expm1(-two_lambda() * t) / two_lambda(); }
    Mat2 exp_generator(double t) const {
        return Mat2::identity() + generator().scaled(phi(t));
    }
};

/// Exponential-sojourn closed form for the moment pair, given its forcing on
/// the grid: mu(t) = a(t) + integral of (I + phi(t-s) Lambda) L a(s) ds.
inline GridFnPair closed_form_moments(const GridFnPair& forcing, double lambda0, double lambda1,
                                      const UniformGrid& grid) {
    const ExponentialCaseMatrices mats(lambda0, lambda1);
    const Mat2 L = mats.intensity();
    const std::size_t n = grid.size();
    if (forcing[0].size() != n || forcing[1].size() != n)
        throw std::invalid_argument("closed_form_moments: forcing size mismatch with grid");
    // Precompute L a(s).
    std::vector<std::array<double, 2>> la(n);
    for (std::size_t j = 0; j < n; ++j) la[j] = L.apply(forcing[0][j], forcing[1][j]);
    GridFnPair mu{GridFn(n), GridFn(n)};
    for (std::size_t k = 0; k < n; ++k) {
        double acc0 = 0.0, acc1 = 0.0;
        for (std::size_t j = 0; j <= k; ++j) {
            const double w = (j == 0 || j == k) ? 0.5 : 1.0;
            const Mat2 prop = mats.exp_generator(grid.time(k - j));
            const auto v = prop.apply(la[j][0], la[j][1]);
            acc0 += w * v[0];
            acc1 += w * v[1];
        }
        const double dtw = (k == 0) ? 0.0 : grid.dt;
        mu[0][k] = forcing[0][k] + dtw * acc0;
        mu[1][k] = forcing[1][k] + dtw * acc1;
    }
    return mu;
}

/// Model-level entry: refuses non-exponential sojourns, then applies the
/// closed form to the first-moment forcing.
inline GridFnPair closed_form_mean(const ProcessSpec& spec, const UniformGrid& grid) {
    for (int i = 0; i < 2; ++i)
        if (!spec.sojourn[i].exponential_rate)
            throw std::invalid_argument(
                "closed_form_mean: sojourn law " + std::to_string(i) +
                " is not exponential; the matrix closed form does not apply");
    return closed_form_moments(forcing_mean(spec, grid), *spec.sojourn[0].exponential_rate,
                               *spec.sojourn[1].exponential_rate, grid);
}

// ---------------------------------------------------------------------------
// Expectation surface
// ---------------------------------------------------------------------------

struct ExpectationSurface {
    std::vector<double> x_grid;
    UniformGrid t_grid;
    /// values[i][k] is the row over x at time node k for initial state i.
    std::array<std::vector<GridFn>, 2> values;
    bool used_extrapolation = false;
};

namespace detail {

inline double interp(const std::vector<double>& xs, const GridFn& ys, double x,
                     bool& extrapolated) {
    const double x0 = xs.front();
    const double dx = xs[1] - xs[0];
    double pos = (x - x0) / dx;
    if (pos <= 0.0) {
        if (pos < -1e-12) extrapolated = true;
        const double w = pos;
        return ys[0] + w * (ys[1] - ys[0]);
    }
    const std::size_t last = xs.size() - 1;
    if (pos >= static_cast<double>(last)) {
        if (pos > static_cast<double>(last) + 1e-12) extrapolated = true;
        const double w = pos - static_cast<double>(last - 1);
        return ys[last - 1] + w * (ys[last] - ys[last - 1]);
    }
    const std::size_t j = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(j);
    return ys[j] + w * (ys[j + 1] - ys[j]);
}

}  // namespace detail

/// Solves the expectation system u_i(x, t) = E g(x + X_i(t)) by time stepping
/// with linear interpolation in x. The working grid extends the requested one
/// by the reachable displacement range; evaluations beyond it extrapolate
/// linearly and set a flag on the result.
inline ExpectationSurface solve_expectation(const ProcessSpec& spec,
                                            const std::function<double(double)>& payoff,
                                            const std::vector<double>& x_grid,
                                            const UniformGrid& t_grid) {
    if (x_grid.size() < 2) throw std::invalid_argument("solve_expectation: x grid too small");
    const double dx = x_grid[1] - x_grid[0];
    for (std::size_t k = 1; k < x_grid.size(); ++k)
        if (std::abs((x_grid[k] - x_grid[k - 1]) - dx) > 1e-9 * dx)
            throw std::invalid_argument("solve_expectation: x grid must be uniform");
    const KernelGrid kernels = sample_kernels(spec, t_grid);
    const std::size_t nt = t_grid.size();

    // Reachable shift bound: largest segment displacement plus a jump budget.
    double max_shift = 0.0;
    for (int idx = 0; idx < 2; ++idx) {
        const State i = state_of(idx);
        double seg = 0.0, jump = 0.0;
        for (std::size_t k = 0; k < nt; ++k) {
            const double t = t_grid.time(k);
            seg = std::max(seg, std::abs(averaged_displacement_pow(spec, i, t, 1)));
            jump = std::max(jump, std::abs(spec.jump[idx](t)));
        }
        max_shift = std::max(max_shift, seg + 8.0 * jump);
    }
    const std::size_t pad = static_cast<std::size_t>(std::ceil(max_shift / dx)) + 2;

    std::vector<double> xs(x_grid.size() + 2 * pad);
    for (std::size_t j = 0; j < xs.size(); ++j)
        xs[j] = x_grid.front() + (static_cast<double>(j) - static_cast<double>(pad)) * dx;

    const std::size_t nx = xs.size();
    ExpectationSurface out;
    out.x_grid = x_grid;
    out.t_grid = t_grid;

    // Per-state, per-time-node shift l_i(s) + h_i(s); the memory-dependent
    // case keeps quadrature nodes over the previous sojourn.
    struct ShiftTable {
        bool averaged = false;
        std::vector<double> plain;                 // one shift per s-node
        std::vector<std::vector<double>> shifts;   // per s-node, per tau-node
        std::vector<double> weights;               // tau weights (sum to ~1)
    };
    std::array<ShiftTable, 2> shifts;
    for (int idx = 0; idx < 2; ++idx) {
        const State i = state_of(idx);
        ShiftTable& table = shifts[idx];
        if (!spec.velocity[i].memory_dependent()) {
            table.plain.resize(nt);
            for (std::size_t k = 0; k < nt; ++k)
                table.plain[k] = displacement(spec.velocity[i], 0.0, 0.0, t_grid.time(k)) +
                                 spec.jump[idx](t_grid.time(k));
        } else {
            // quantile-space quadrature: tau-nodes are quantiles of the
            // opposite sojourn law, so the weights need no density factor and
            // heavy tails stay well resolved
            table.averaged = true;
            const SojournDistribution& other = spec.sojourn[flip(i)];
            const GaussLegendreRule rule(32);
            std::vector<double> taus(rule.nodes.size());
            table.weights.resize(rule.nodes.size());
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double v = 0.5 * (1.0 + rule.nodes[q]);
                taus[q] = other.quantile(v);
                table.weights[q] = 0.5 * rule.weights[q];
            }
            table.shifts.assign(nt, std::vector<double>(taus.size()));
            for (std::size_t k = 0; k < nt; ++k)
                for (std::size_t q = 0; q < taus.size(); ++q)
                    table.shifts[k][q] =
                        displacement(spec.velocity[i], taus[q], 0.0, t_grid.time(k)) +
                        spec.jump[idx](t_grid.time(k));
        }
    }

    // Free term G_i(x, t) and the initial row u(x, 0) = g(x).
    std::array<std::vector<GridFn>, 2> u;
    std::array<std::vector<GridFn>, 2> free_term;
    bool extrapolated = false;
    for (int idx = 0; idx < 2; ++idx) {
        const State i = state_of(idx);
        u[idx].assign(nt, GridFn(nx, 0.0));
        free_term[idx].assign(nt, GridFn(nx, 0.0));
        for (std::size_t k = 0; k < nt; ++k) {
            const double t = t_grid.time(k);
            const double surv = spec.sojourn[idx].survival(t);
            for (std::size_t j = 0; j < nx; ++j) {
                double g;
                if (!spec.velocity[i].memory_dependent()) {
                    g = payoff(xs[j] + displacement(spec.velocity[i], 0.0, 0.0, t));
                } else {
                    g = detail::memory_average(spec, i, [&](double tau) {
                        return payoff(xs[j] + displacement(spec.velocity[i], tau, 0.0, t));
                    });
                }
                free_term[idx][k][j] = surv * g;
            }
        }
        for (std::size_t j = 0; j < nx; ++j) u[idx][0][j] = payoff(xs[j]);
    }

    auto shifted_row_value = [&](int idx, std::size_t s_node, const GridFn& row,
                                 double x) -> double {
        const ShiftTable& table = shifts[idx];
        if (!table.averaged)
            return detail::interp(xs, row, x + table.plain[s_node], extrapolated);
        double acc = 0.0;
        for (std::size_t q = 0; q < table.weights.size(); ++q)
            acc += table.weights[q] *
                   detail::interp(xs, row, x + table.shifts[s_node][q], extrapolated);
        return acc;
    };

    const double dt = t_grid.dt;
    for (std::size_t k = 1; k < nt; ++k) {
        // Explicit part: s-nodes 1..k touch earlier time levels only.
        std::array<GridFn, 2> explicit_part{GridFn(nx, 0.0), GridFn(nx, 0.0)};
        for (int idx = 0; idx < 2; ++idx) {
            const int other = 1 - idx;
            for (std::size_t j = 0; j < nx; ++j) {
                double acc = 0.0;
                for (std::size_t s = 1; s <= k; ++s) {
                    const double w = (s == k) ? 0.5 : 1.0;
                    const double f = (s == k) ? kernels.left[idx][s] : kernels.mid[idx][s];
                    acc += w * f * shifted_row_value(idx, s, u[other][k - s], xs[j]);
                }
                explicit_part[idx][j] = free_term[idx][k][j] + dt * acc;
            }
        }
        // Implicit s = 0 term couples the two current rows; a few Gauss-Seidel
        // sweeps converge since the coupling weight is dt f_i(0) / 2.
        for (int idx = 0; idx < 2; ++idx) u[idx][k] = explicit_part[idx];
        for (int sweep = 0; sweep < 3; ++sweep) {
            for (int idx = 0; idx < 2; ++idx) {
                const int other = 1 - idx;
                const double w0 = 0.5 * dt * kernels.mid[idx][0];
                if (w0 == 0.0) continue;
                for (std::size_t j = 0; j < nx; ++j)
                    u[idx][k][j] =
                        explicit_part[idx][j] + w0 * shifted_row_value(idx, 0, u[other][k], xs[j]);
            }
        }
    }

    // Restrict to the requested grid.
    for (int idx = 0; idx < 2; ++idx) {
        out.values[idx].assign(nt, GridFn(x_grid.size()));
        for (std::size_t k = 0; k < nt; ++k)
            for (std::size_t j = 0; j < x_grid.size(); ++j)
                out.values[idx][k][j] = u[idx][k][j + pad];
    }
    out.used_extrapolation = extrapolated;
    return out;
}

}  // namespace jtel::volterra
