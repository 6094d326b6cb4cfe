// Seeded random streams and streaming moment accumulators for reproducible
// Monte Carlo: batch b of a run with seed s always sees the same stream,
// independent of thread count.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace jtel {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform(0,1) source backed by a mt19937_64 engine. Draws use the top 53
/// bits directly so the stream does not depend on library distribution
/// internals. `antithetic` flips every uniform to 1-u.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed, bool antithetic = false)
        : engine_(seed), antithetic_(antithetic) {}

    static RandomStream for_batch(std::uint64_t seed, std::uint64_t batch_index,
                                  bool antithetic = false) {
        return RandomStream(splitmix64(seed ^ splitmix64(batch_index)), antithetic);
    }

    /// Uniform draw strictly inside (0, 1).
    double uniform() {
        double u = ((engine_() >> 11) + 0.5) * 0x1.0p-53;
        return antithetic_ ? 1.0 - u : u;
    }

    std::mt19937_64& engine() { return engine_; }
    bool antithetic() const { return antithetic_; }
    void set_antithetic(bool on) { antithetic_ = on; }

  private:
    std::mt19937_64 engine_;
    bool antithetic_;
};

/// Streaming central moments up to order four with an associative pairwise
/// merge, so batched accumulation gives the same totals in any partition as
/// long as the merge order is fixed.
class MomentAccumulator {
  public:
    void add(double x) {
        const double n1 = static_cast<double>(n_);
        n_ += 1;
        const double n = static_cast<double>(n_);
        const double delta = x - mean_;
        const double dn = delta / n;
        const double dn2 = dn * dn;
        const double term1 = delta * dn * n1;
        mean_ += dn;
        m4_ += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * m2_ - 4.0 * dn * m3_;
        m3_ += term1 * dn * (n - 2.0) - 3.0 * dn * m2_;
        m2_ += term1;
    }

    void merge(const MomentAccumulator& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
        const double n = na + nb;
        const double delta = o.mean_ - mean_;
        const double d2 = delta * delta;
        const double m2 = m2_ + o.m2_ + d2 * na * nb / n;
        const double m3 = m3_ + o.m3_ + d2 * delta * na * nb * (na - nb) / (n * n) +
                          3.0 * delta * (na * o.m2_ - nb * m2_) / n;
        const double m4 = m4_ + o.m4_ +
                          d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                          6.0 * d2 * (na * na * o.m2_ + nb * nb * m2_) / (n * n) +
                          4.0 * delta * (na * o.m3_ - nb * m3_) / n;
        mean_ += delta * nb / n;
        m2_ = m2;
        m3_ = m3;
        m4_ = m4;
        n_ += o.n_;
    }

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Population variance (second central moment over n).
    double variance() const { return n_ ? m2_ / static_cast<double>(n_) : 0.0; }
    double fourth_central() const { return n_ ? m4_ / static_cast<double>(n_) : 0.0; }

    double mean_std_error() const {
        return n_ ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }
    double variance_std_error() const {
        if (n_ < 2) return 0.0;
        const double v = variance();
        const double spread = fourth_central() - v * v;
        return std::sqrt(std::max(spread, 0.0) / static_cast<double>(n_));
    }

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0, m2_ = 0.0, m3_ = 0.0, m4_ = 0.0;
};

}  // namespace jtel
