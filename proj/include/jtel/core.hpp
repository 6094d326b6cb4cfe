// Core model types for Markov-modulated random motions with sojourn memory:
// two velocity regimes, two jump regimes, two alternating sojourn laws.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jtel/quadrature.hpp"
#include "jtel/rng.hpp"

namespace jtel {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

/// One of the two regime labels.
enum class State : int { s0 = 0, s1 = 1 };

constexpr State flip(State s) { return s == State::s0 ? State::s1 : State::s0; }
constexpr int index(State s) { return static_cast<int>(s); }
constexpr State state_of(int i) { return i == 0 ? State::s0 : State::s1; }

/// Pair of values indexed by State.
template <class T>
struct StatePair {
    T items[2];

    T& operator[](State s) { return items[index(s)]; }
    const T& operator[](State s) const { return items[index(s)]; }
    T& operator[](int i) { return items[i]; }
    const T& operator[](int i) const { return items[i]; }
};

// ---------------------------------------------------------------------------
// Regimes
// ---------------------------------------------------------------------------

/// Velocity regime c(T, u): T is the duration of the previously completed
/// sojourn, u is the time elapsed since the segment began. An optional closed
/// form for the elapsed-time integral of c avoids quadrature in hot paths.
class VelocityRegime {
  public:
    using Velocity = std::function<double(double /*T*/, double /*u*/)>;
    /// Closed displacement form: integral of c(T, s) ds over s in [u, t].
    using Displacement = std::function<double(double /*T*/, double /*u*/, double /*t*/)>;

    VelocityRegime() = default;
    VelocityRegime(Velocity velocity, Displacement closed_form, bool memory_dependent)
        : velocity_(std::move(velocity)),
          closed_form_(std::move(closed_form)),
          memory_dependent_(memory_dependent) {}

    /// Regime with a single constant rate; memory-free.
    static VelocityRegime constant(double v) {
        VelocityRegime r(
            [v](double, double) { return v; },
            [v](double, double u, double t) { return v * (t - u); }, false);
        r.constant_value_ = v;
        return r;
    }

    /// Memory-free regime c(u) with an optional antiderivative-based closed form.
    static VelocityRegime of_time(std::function<double(double)> c,
                                  Displacement closed_form = nullptr) {
        return VelocityRegime([c = std::move(c)](double, double u) { return c(u); },
                              std::move(closed_form), false);
    }

    double operator()(double T, double u) const { return velocity_(T, u); }
    bool memory_dependent() const { return memory_dependent_; }
    bool has_closed_displacement() const { return static_cast<bool>(closed_form_); }
    std::optional<double> constant_value() const { return constant_value_; }
    bool valid() const { return static_cast<bool>(velocity_); }

    double closed_displacement(double T, double u, double t) const {
        return closed_form_(T, u, t);
    }

  private:
    Velocity velocity_;
    Displacement closed_form_;
    bool memory_dependent_ = false;
    std::optional<double> constant_value_;
};

/// Jump regime h(T): amplitude of the jump ending a sojourn of duration T.
class JumpRegime {
  public:
    using Amplitude = std::function<double(double)>;

    JumpRegime() = default;
    explicit JumpRegime(Amplitude amplitude) : amplitude_(std::move(amplitude)) {}

    static JumpRegime constant(double h) {
        JumpRegime r([h](double) { return h; });
        r.constant_value_ = h;
        return r;
    }
    static JumpRegime zero() { return constant(0.0); }

    double operator()(double T) const { return amplitude_(T); }
    std::optional<double> constant_value() const { return constant_value_; }
    bool valid() const { return static_cast<bool>(amplitude_); }

  private:
    Amplitude amplitude_;
    std::optional<double> constant_value_;
};

// ---------------------------------------------------------------------------
// Sojourn distributions
// ---------------------------------------------------------------------------

/// Sojourn-time law on [support_lower, support_upper): density f, survival
/// F-bar, distribution function F, and a single-uniform quantile sampler.
struct SojournDistribution {
    std::function<double(double)> density;
    std::function<double(double)> survival;
    std::function<double(double)> cdf;
    std::function<double(double)> quantile;

    double support_lower = 0.0;
    double support_upper = kInf;
    /// Typical magnitude of a draw; sizes quadrature panels over the support.
    double scale_hint = 1.0;
    /// Moments of order strictly below this bound are finite.
    double sup_finite_moment = kInf;
    /// Set when the tail integral of the hazard is known to diverge.
    bool hazard_diverges = true;
    /// Rate parameter when the law is exponential; enables closed forms.
    std::optional<double> exponential_rate;
    /// Interior discontinuity points of the density (support edges inside
    /// (0, inf)); grid-based integrators average the one-sided limits there.
    std::vector<double> density_breaks;

    bool valid() const {
        return density && survival && cdf && quantile;
    }

    /// One draw, consuming exactly one uniform from the stream.
    double sample(RandomStream& rng) const { return quantile(rng.uniform()); }

    /// Upper truncation point for averages over this law.
    double truncation_point() const {
        if (std::isfinite(support_upper)) return support_upper;
        return quantile(1.0 - 1e-10);
    }
};

/// Quantile by safeguarded Newton/bisection on the distribution function.
inline std::function<double(double)> make_numeric_quantile(
    std::function<double(double)> cdf, std::function<double(double)> density,
    double lower, double upper, double scale) {
    return [cdf = std::move(cdf), density = std::move(density), lower, upper,
            scale](double u) -> double {
        if (u <= 0.0) return lower;
        double lo = lower;
        double hi;
        if (std::isfinite(upper)) {
            if (u >= 1.0) return upper;
            hi = upper;
        } else {
            hi = lower + scale;
            int guard = 0;
            while (cdf(hi) < u) {
                lo = hi;
                hi = lower + (hi - lower) * 2.0;
                if (++guard > 1100)
                    throw std::runtime_error("quantile inversion: bracket search failed");
            }
        }
        double t = 0.5 * (lo + hi);
        for (int iter = 0; iter < 200; ++iter) {
            const double fv = cdf(t) - u;
            if (fv > 0.0)
                hi = t;
            else
                lo = t;
            double step = std::numeric_limits<double>::quiet_NaN();
            if (density) {
                const double d = density(t);
                if (d > 0.0 && std::isfinite(d)) step = t - fv / d;
            }
            if (std::isfinite(step) && step > lo && step < hi)
                t = step;
            else
                t = 0.5 * (lo + hi);
            if (hi - lo <= 1e-12 * std::max(1.0, std::abs(t))) break;
        }
        return t;
    };
}

// ---------------------------------------------------------------------------
// Process specification and trajectories
// ---------------------------------------------------------------------------

/// Full model: velocity, jump and sojourn regimes for both states plus the
/// initial state. Immutable after construction; shared freely across threads.
struct ProcessSpec {
    StatePair<VelocityRegime> velocity;
    StatePair<JumpRegime> jump;
    StatePair<SojournDistribution> sojourn;
    State initial_state = State::s0;

    void validate() const {
        for (int i = 0; i < 2; ++i) {
            if (!velocity[i].valid())
                throw std::invalid_argument("ProcessSpec: velocity regime " +
                                            std::to_string(i) + " undefined");
            if (!jump[i].valid())
                throw std::invalid_argument("ProcessSpec: jump regime " + std::to_string(i) +
                                            " undefined");
            if (!sojourn[i].valid())
                throw std::invalid_argument("ProcessSpec: sojourn distribution " +
                                            std::to_string(i) + " undefined");
        }
    }
};

/// Switch skeleton of one trajectory.
///
/// switch_times[0] = 0 and switch_times[n] is the n-th regime change.
/// sojourns[0] is the pre-start sojourn (time already spent in the opposite
/// state when the motion begins); sojourns[n] = switch_times[n] -
/// switch_times[n-1] for n >= 1. states[n] is the state occupied on
/// (switch_times[n], switch_times[n+1]], jumps[n-1] is the jump applied at
/// switch_times[n], and positions[n] is the location right after that switch.
struct Path {
    std::vector<double> switch_times;
    std::vector<double> sojourns;
    std::vector<State> states;
    std::vector<double> jumps;
    std::vector<double> positions;
    double horizon = 0.0;

    /// Number of switches in (0, t].
    std::size_t switch_count(double t) const {
        std::size_t n = 0;
        while (n + 1 < switch_times.size() && switch_times[n + 1] <= t) ++n;
        return n;
    }
};

// ---------------------------------------------------------------------------
// Kinematics
// ---------------------------------------------------------------------------

/// Displacement accumulated by `regime` between elapsed times u and t of one
/// segment whose previous sojourn lasted T. Uses the closed form when the
/// regime provides one, otherwise adaptive quadrature to 1e-10.
inline double displacement(const VelocityRegime& regime, double T, double u, double t) {
    if (!(u >= 0.0) || !(t >= u)) throw std::domain_error("displacement: requires 0 <= u <= t");
    if (u == t) return 0.0;
    if (regime.has_closed_displacement()) {
        double value = regime.closed_displacement(T, u, t);
        if (!std::isfinite(value))
            throw std::runtime_error("displacement: closed form returned non-finite value");
        return value;
    }
    return integrate_adaptive([&](double s) { return regime(T, s); }, u, t, 1e-10);
}

/// Position of the path at time t in [0, horizon]. Right-continuous at switch
/// times: the jump at t is included.
inline double position_at(const Path& path, const ProcessSpec& spec, double t) {
    if (!(t >= 0.0) || !(t <= path.horizon))
        throw std::domain_error("position_at: t outside [0, horizon]");
    const std::size_t n = path.switch_count(t);
    const State s = path.states[n];
    return path.positions[n] +
           displacement(spec.velocity[s], path.sojourns[n], 0.0, t - path.switch_times[n]);
}

/// Rebuilds the positions-at-switches sequence from scratch through
/// displacement() and the jump amplitudes. Used to cross-check stored paths.
inline std::vector<double> reconstruct_positions(const Path& path, const ProcessSpec& spec) {
    std::vector<double> pos(path.switch_times.size());
    pos[0] = 0.0;
    for (std::size_t n = 1; n < path.switch_times.size(); ++n) {
        const State s = path.states[n - 1];
        const double seg = path.switch_times[n] - path.switch_times[n - 1];
        pos[n] = pos[n - 1] + displacement(spec.velocity[s], path.sojourns[n - 1], 0.0, seg) +
                 path.jumps[n - 1];
    }
    return pos;
}

}  // namespace jtel
