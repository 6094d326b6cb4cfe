// Quadrature kernels: adaptive Gauss-Kronrod 15(7) and Gauss-Legendre panels.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace jtel {

/// Gauss-Legendre nodes and weights on [-1, 1], computed once per order by
/// Newton iteration on the Legendre recurrence.
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendreRule(int n) {
        nodes.resize(n);
        weights.resize(n);
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

inline const GaussLegendreRule& gauss_legendre_64() {
    static const GaussLegendreRule rule(64);
    return rule;
}

inline const GaussLegendreRule& gauss_legendre_4() {
    static const GaussLegendreRule rule(4);
    return rule;
}

/// Integral of f over [a, b] with a single fixed-order rule.
template <class F>
double integrate_gl(const F& f, double a, double b, const GaussLegendreRule& rule) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * sum;
}

/// Integral of f over [a, b] split into `panels` equal panels of a 64-node rule.
template <class F>
double integrate_gl_panels(const F& f, double a, double b, int panels) {
    if (!(b > a)) return 0.0;
    const auto& rule = gauss_legendre_64();
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p)
        sum += integrate_gl(f, a + p * h, a + (p + 1) * h, rule);
    return sum;
}

/// Integral over [a, b] where b may be many orders of magnitude beyond `scale`
/// (heavy-tailed weights): linear panels out to 8*scale, then geometrically
/// widening panels to b.
template <class F>
double integrate_gl_tail(const F& f, double a, double b, double scale) {
    if (!(b > a)) return 0.0;
    if (scale <= 0.0 || !std::isfinite(scale)) scale = 1.0;
    const double linear_end = std::min(b, a + 8.0 * scale);
    double sum = integrate_gl_panels(f, a, linear_end, 16);
    double lo = linear_end;
    double width = std::max(scale, linear_end - a);
    const auto& rule = gauss_legendre_64();
    while (lo < b) {
        double hi = std::min(b, lo + width);
        sum += integrate_gl(f, lo, hi, rule);
        lo = hi;
        width *= 2.0;
    }
    return sum;
}

namespace detail {

// QUADPACK 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kGk15Nodes = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
inline constexpr std::array<double, 8> kGk15Weights = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr std::array<double, 4> kGauss7Weights = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <class F>
void gk15(const F& f, double a, double b, double& kronrod, double& err) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double fk[15];
    for (int i = 0; i < 7; ++i) {
        fk[i] = f(mid - half * kGk15Nodes[i]);
        fk[14 - i] = f(mid + half * kGk15Nodes[i]);
    }
    fk[7] = f(mid);
    for (int i = 0; i < 15; ++i) {
        if (!std::isfinite(fk[i])) {
            double x = (i < 7) ? mid - half * kGk15Nodes[i]
                               : (i == 7 ? mid : mid + half * kGk15Nodes[14 - i]);
            throw std::runtime_error("non-finite integrand value at x = " + std::to_string(x));
        }
    }
    double resk = kGk15Weights[7] * fk[7];
    double resg = kGauss7Weights[3] * fk[7];
    for (int i = 0; i < 7; ++i) resk += kGk15Weights[i] * (fk[i] + fk[14 - i]);
    for (int i = 0; i < 3; ++i) resg += kGauss7Weights[i] * (fk[2 * i + 1] + fk[13 - 2 * i]);
    kronrod = resk * half;
    err = std::abs((resk - resg) * half);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b] to absolute tolerance
/// `abs_tol`. Throws if the subdivision budget (2^20 intervals) is exhausted.
template <class F>
double integrate_adaptive(const F& f, double a, double b, double abs_tol = 1e-10) {
    if (a == b) return 0.0;
    double sign = 1.0;
    if (b < a) {
        std::swap(a, b);
        sign = -1.0;
    }
    struct Interval {
        double a, b, value, error;
    };
    double value, error;
    detail::gk15(f, a, b, value, error);
    std::vector<Interval> heap{{a, b, value, error}};
    double total = value, total_err = error;
    std::size_t splits = 0;
    constexpr std::size_t kMaxSplits = std::size_t{1} << 20;
    while (total_err > abs_tol) {
        if (++splits > kMaxSplits)
            throw std::runtime_error("adaptive quadrature: subdivision budget exhausted");
        std::size_t worst = 0;
        for (std::size_t i = 1; i < heap.size(); ++i)
            if (heap[i].error > heap[worst].error) worst = i;
        Interval iv = heap[worst];
        const double mid = 0.5 * (iv.a + iv.b);
        Interval left{iv.a, mid, 0, 0}, right{mid, iv.b, 0, 0};
        detail::gk15(f, left.a, left.b, left.value, left.error);
        detail::gk15(f, right.a, right.b, right.value, right.error);
        total += left.value + right.value - iv.value;
        total_err += left.error + right.error - iv.error;
        heap[worst] = left;
        heap.push_back(right);
        if (mid == iv.a || mid == iv.b) break;  // interval at floating-point resolution
    }
    return sign * total;
}

/// Cumulative integral of f along `grid` (increasing nodes): returns I with
/// I[k] = integral from grid[0] to grid[k], each panel by a 4-node
/// Gauss-Legendre rule. Panel nodes are interior, so integrands with jumps or
/// support edges aligned to grid nodes are integrated exactly on each side.
template <class F>
std::vector<double> cumulative_integral(const F& f, const std::vector<double>& grid) {
    std::vector<double> out(grid.size(), 0.0);
    const auto& rule = gauss_legendre_4();
    for (std::size_t k = 1; k < grid.size(); ++k)
        out[k] = out[k - 1] + integrate_gl(f, grid[k - 1], grid[k], rule);
    return out;
}

}  // namespace jtel
