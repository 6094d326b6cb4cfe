// Sojourn-time distribution families and the hazard ratios that generate them
// as martingale models.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>

#include "jtel/core.hpp"

namespace jtel {

// ---------------------------------------------------------------------------
// Family parameter records
// ---------------------------------------------------------------------------

struct Exponential {
    double lambda;
};
struct Erlang {
    double lambda;
    int n;
};
/// Density lambda * t^alpha * exp(-lambda t^(alpha+1) / (alpha+1)); a Weibull
/// reparametrisation kept exactly in this printed form.
struct WeibullType {
    double lambda;
    double alpha;
};
struct Pareto {
    double lambda;  // tail exponent, restricted to (0, 2)
    double b;       // support starts at b
};
struct Logistic {
    double lambda;
};
struct HalfCauchy {
    double a;
};
struct Uniform {
    double upper;
};

using FamilySpec =
    std::variant<Exponential, Erlang, WeibullType, Pareto, Logistic, HalfCauchy, Uniform>;

inline std::string family_name(const FamilySpec& family) {
    struct Visitor {
        std::string operator()(const Exponential&) const { return "exponential"; }
        std::string operator()(const Erlang&) const { return "erlang"; }
        std::string operator()(const WeibullType&) const { return "weibull"; }
        std::string operator()(const Pareto&) const { return "pareto"; }
        std::string operator()(const Logistic&) const { return "logistic"; }
        std::string operator()(const HalfCauchy&) const { return "half_cauchy"; }
        std::string operator()(const Uniform&) const { return "uniform"; }
    };
    return std::visit(Visitor{}, family);
}

inline void validate(const FamilySpec& family) {
    struct Visitor {
        void operator()(const Exponential& f) const {
            if (!(f.lambda > 0.0)) throw std::invalid_argument("exponential: requires lambda > 0");
        }
        void operator()(const Erlang& f) const {
            if (!(f.lambda > 0.0)) throw std::invalid_argument("erlang: requires lambda > 0");
            if (f.n < 1) throw std::invalid_argument("erlang: requires shape n >= 1");
        }
        void operator()(const WeibullType& f) const {
            if (!(f.lambda > 0.0)) throw std::invalid_argument("weibull: requires lambda > 0");
            if (!(f.alpha > -1.0)) throw std::invalid_argument("weibull: requires alpha > -1");
        }
        void operator()(const Pareto& f) const {
            if (!(f.lambda > 0.0 && f.lambda < 2.0))
                throw std::invalid_argument("pareto: requires 0 < lambda < 2");
            if (!(f.b > 0.0)) throw std::invalid_argument("pareto: requires b > 0");
        }
        void operator()(const Logistic& f) const {
            if (!(f.lambda > 0.0)) throw std::invalid_argument("logistic: requires lambda > 0");
        }
        void operator()(const HalfCauchy& f) const {
            if (!(f.a > 0.0)) throw std::invalid_argument("half_cauchy: requires a > 0");
        }
        void operator()(const Uniform& f) const {
            if (!(f.upper > 0.0)) throw std::invalid_argument("uniform: requires upper > 0");
        }
    };
    std::visit(Visitor{}, family);
}

namespace detail {

// Partial exponential sum: sum_{k=0}^{n-1} (lambda t)^k / k!.
inline double erlang_partial_sum(double lambda, int n, double t) {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < n; ++k) {
        term *= lambda * t / k;
        sum += term;
    }
    return sum;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// build: family record -> full sojourn distribution
// ---------------------------------------------------------------------------

/// Materialises the density/survival/cdf triple and the single-uniform
/// quantile sampler for a family. Samplers invert the distribution function in
/// closed form where one exists, otherwise numerically to 1e-10.
inline SojournDistribution build(const FamilySpec& family) {
    validate(family);
    SojournDistribution out;

    if (const auto* f = std::get_if<Exponential>(&family)) {
        const double lam = f->lambda;
        out.density = [lam](double t) { return t < 0.0 ? 0.0 : lam * std::exp(-lam * t); };
        out.survival = [lam](double t) { return t < 0.0 ? 1.0 : std::exp(-lam * t); };
        out.cdf = [lam](double t) { return t < 0.0 ? 0.0 : -std::expm1(-lam * t); };
        out.quantile = [lam](double u) { return -std::log1p(-u) / lam; };
        out.scale_hint = 1.0 / lam;
        out.exponential_rate = lam;
    } else if (const auto* f = std::get_if<Erlang>(&family)) {
        const double lam = f->lambda;
        const int n = f->n;
        const double log_norm = n * std::log(lam) - std::lgamma(n);
        out.density = [lam, n, log_norm](double t) {
            if (t < 0.0) return 0.0;
            if (t == 0.0) return n == 1 ? lam : 0.0;
            return std::exp(log_norm + (n - 1) * std::log(t) - lam * t);
        };
        out.survival = [lam, n](double t) {
            if (t <= 0.0) return 1.0;
            return std::exp(-lam * t) * detail::erlang_partial_sum(lam, n, t);
        };
        out.cdf = [survival = out.survival](double t) { return 1.0 - survival(t); };
        out.quantile =
            make_numeric_quantile(out.cdf, out.density, 0.0, kInf, static_cast<double>(n) / lam);
        out.scale_hint = static_cast<double>(n) / lam;
        if (n == 1) out.exponential_rate = lam;
    } else if (const auto* f = std::get_if<WeibullType>(&family)) {
        const double lam = f->lambda, alpha = f->alpha;
        const double p = alpha + 1.0;
        out.density = [lam, alpha, p](double t) {
            if (t < 0.0) return 0.0;
            if (t == 0.0) {
                if (alpha > 0.0) return 0.0;
                if (alpha == 0.0) return lam;
                return kInf;
            }
            return lam * std::pow(t, alpha) * std::exp(-lam * std::pow(t, p) / p);
        };
        out.survival = [lam, p](double t) {
            return t <= 0.0 ? 1.0 : std::exp(-lam * std::pow(t, p) / p);
        };
        out.cdf = [survival = out.survival](double t) { return 1.0 - survival(t); };
        out.quantile = [lam, p](double u) {
            return std::pow(-p * std::log1p(-u) / lam, 1.0 / p);
        };
        out.scale_hint = std::pow(p / lam, 1.0 / p);
    } else if (const auto* f = std::get_if<Pareto>(&family)) {
        const double lam = f->lambda, b = f->b;
        out.density = [lam, b](double t) {
            return t > b ? lam * std::pow(b / t, lam) / t : 0.0;
        };
        out.survival = [lam, b](double t) { return t <= b ? 1.0 : std::pow(b / t, lam); };
        out.cdf = [survival = out.survival](double t) { return 1.0 - survival(t); };
        out.quantile = [lam, b](double u) { return b * std::pow(1.0 - u, -1.0 / lam); };
        out.support_lower = b;
        out.scale_hint = b * std::pow(2.0, 1.0 / lam);
        out.sup_finite_moment = lam;
        out.density_breaks = {b};
    } else if (const auto* f = std::get_if<Logistic>(&family)) {
        const double lam = f->lambda;
        out.density = [lam](double t) {
            if (t < 0.0) return 0.0;
            const double w = std::exp(-lam * t);
            return 2.0 * lam * w / ((1.0 + w) * (1.0 + w));
        };
        out.survival = [lam](double t) {
            if (t <= 0.0) return 1.0;
            const double w = std::exp(-lam * t);
            return 2.0 * w / (1.0 + w);
        };
        out.cdf = [lam](double t) { return t <= 0.0 ? 0.0 : std::tanh(0.5 * lam * t); };
        out.quantile = [lam](double u) { return 2.0 * std::atanh(u) / lam; };
        out.scale_hint = 2.0 * std::log(2.0) / lam;
    } else if (const auto* f = std::get_if<HalfCauchy>(&family)) {
        const double a = f->a;
        out.density = [a](double t) {
            return t < 0.0 ? 0.0 : (2.0 * a / M_PI) / (a * a + t * t);
        };
        out.survival = [a](double t) {
            return t <= 0.0 ? 1.0 : (2.0 / M_PI) * std::atan(a / t);
        };
        out.cdf = [a](double t) { return t <= 0.0 ? 0.0 : (2.0 / M_PI) * std::atan(t / a); };
        out.quantile = [a](double u) { return a * std::tan(0.5 * M_PI * u); };
        out.scale_hint = a;
        out.sup_finite_moment = 1.0;
    } else if (const auto* f = std::get_if<Uniform>(&family)) {
        const double A = f->upper;
        // right-continuous at 0, like the other families
        out.density = [A](double t) { return (t >= 0.0 && t < A) ? 1.0 / A : 0.0; };
        out.survival = [A](double t) {
            if (t <= 0.0) return 1.0;
            return t >= A ? 0.0 : 1.0 - t / A;
        };
        out.cdf = [survival = out.survival](double t) { return 1.0 - survival(t); };
        out.quantile = [A](double u) { return u * A; };
        out.support_upper = A;
        out.scale_hint = 0.5 * A;
        out.density_breaks = {A};
    }
    return out;
}

// ---------------------------------------------------------------------------
// martingale_ratio: the hazard-negated ratio generating each family
// ---------------------------------------------------------------------------

/// Ratio r(t) with support metadata. For a family built by `build`, r equals
/// -density/survival everywhere in the interior of the support.
struct HazardRatio {
    std::function<double(double)> value;
    double support_lower = 0.0;
    double support_upper = kInf;
    /// The integral of -r over the support diverges (analytic fact per family).
    bool diverges = true;
};

/// The ratio of mean velocity to jump amplitude that makes the family a
/// martingale model: r(t) = -f(t) / survival(t).
inline HazardRatio martingale_ratio(const FamilySpec& family) {
    validate(family);
    HazardRatio out;

    if (const auto* f = std::get_if<Exponential>(&family)) {
        const double lam = f->lambda;
        out.value = [lam](double) { return -lam; };
    } else if (const auto* f = std::get_if<Erlang>(&family)) {
        const double lam = f->lambda;
        const int n = f->n;
        const double log_fac = std::lgamma(n);
        out.value = [lam, n, log_fac](double t) {
            if (t <= 0.0) return n == 1 ? -lam : 0.0;
            const double num = lam * std::exp((n - 1) * std::log(lam * t) - log_fac);
            return -num / detail::erlang_partial_sum(lam, n, t);
        };
    } else if (const auto* f = std::get_if<WeibullType>(&family)) {
        const double lam = f->lambda, alpha = f->alpha;
        out.value = [lam, alpha](double t) {
            if (t < 0.0) return 0.0;
            if (t == 0.0) {
                if (alpha > 0.0) return 0.0;
                if (alpha == 0.0) return -lam;
                return -kInf;
            }
            return -lam * std::pow(t, alpha);
        };
    } else if (const auto* f = std::get_if<Pareto>(&family)) {
        const double lam = f->lambda, b = f->b;
        out.value = [lam, b](double t) { return t > b ? -lam / t : 0.0; };
        out.support_lower = b;
    } else if (const auto* f = std::get_if<Logistic>(&family)) {
        const double lam = f->lambda;
        out.value = [lam](double t) {
            return t < 0.0 ? 0.0 : -lam / (1.0 + std::exp(-lam * t));
        };
    } else if (const auto* f = std::get_if<HalfCauchy>(&family)) {
        const double a = f->a;
        out.value = [a](double t) {
            if (t < 0.0) return 0.0;
            const double wedge = t > 0.0 ? std::atan(a / t) : 0.5 * M_PI;
            return -a / ((a * a + t * t) * wedge);
        };
    } else if (const auto* f = std::get_if<Uniform>(&family)) {
        const double A = f->upper;
        out.value = [A](double t) {
            if (t >= A)
                throw std::domain_error("uniform ratio: t outside support (survival is zero)");
            return t < 0.0 ? 0.0 : -1.0 / (A - t);
        };
        out.support_upper = A;
    }
    return out;
}

}  // namespace jtel
