// Exact path sampling, batch-parallel Monte Carlo estimators, and the
// likelihood-ratio weights of the intensity change of measure.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "jtel/core.hpp"
#include "jtel/density_result.hpp"
#include "jtel/rng.hpp"

namespace jtel::mc {

struct SimConfig {
    std::size_t n_paths = 10000;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    bool antithetic = false;

    void validate() const {
        if (n_paths < 1) throw std::invalid_argument("SimConfig: requires n_paths >= 1");
        if (!(horizon > 0.0)) throw std::invalid_argument("SimConfig: requires horizon > 0");
    }
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
};

// ---------------------------------------------------------------------------
// Path sampling
// ---------------------------------------------------------------------------

/// Draws one trajectory: the pre-start sojourn from the opposite state's law,
/// then alternating sojourns until the horizon is crossed. The jump ending a
/// sojourn uses the regime of the state just left, evaluated at that sojourn's
/// duration.
inline Path sample_path(const ProcessSpec& spec, double horizon, RandomStream& rng) {
    if (!(horizon > 0.0)) throw std::invalid_argument("sample_path: requires horizon > 0");
    Path path;
    path.horizon = horizon;
    State s = spec.initial_state;
    path.switch_times.push_back(0.0);
    path.sojourns.push_back(spec.sojourn[flip(s)].sample(rng));
    path.states.push_back(s);
    path.positions.push_back(0.0);

    double tau = 0.0;
    while (true) {
        const double sojourn = spec.sojourn[s].sample(rng);
        const double next = tau + sojourn;
        if (next > horizon) break;
        const double jump = spec.jump[s](sojourn);
        const double pos = path.positions.back() +
                           displacement(spec.velocity[s], path.sojourns.back(), 0.0, sojourn) +
                           jump;
        tau = next;
        s = flip(s);
        path.switch_times.push_back(tau);
        path.sojourns.push_back(sojourn);
        path.jumps.push_back(jump);
        path.states.push_back(s);
        path.positions.push_back(pos);
    }
    return path;
}

// ---------------------------------------------------------------------------
// Batch scheduling
//
// Every antithetic pair (or single path, when antithetics are off) owns a
// stream derived from (seed, pair index), so the sampled paths are a pure
// function of the configuration. Threads only grab chunks of the index space;
// per-chunk partials are reduced in index order afterwards.
// ---------------------------------------------------------------------------

/// Paths handed to one worker at a time; also the reducer slot width.
inline constexpr std::size_t kPathChunk = 256;

inline RandomStream stream_for_path(const SimConfig& config, std::size_t path_index) {
    if (!config.antithetic)
        return RandomStream::for_batch(config.seed, path_index, false);
    return RandomStream::for_batch(config.seed, path_index / 2, path_index % 2 == 1);
}

/// Runs `consume(path_index, path)` over all configured paths using `threads`
/// workers. Deterministic: the set of sampled paths does not depend on the
/// thread count.
template <class Consume>
void for_each_path(const ProcessSpec& spec, const SimConfig& config, unsigned threads,
                   Consume&& consume) {
    config.validate();
    spec.validate();
    const std::size_t n_chunks = (config.n_paths + kPathChunk - 1) / kPathChunk;
    threads = std::max(1u, threads);

    std::atomic<std::size_t> next_chunk{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t chunk = next_chunk.fetch_add(1);
            if (chunk >= n_chunks) return;
            const std::size_t begin = chunk * kPathChunk;
            const std::size_t end = std::min(begin + kPathChunk, config.n_paths);
            for (std::size_t p = begin; p < end; ++p) {
                RandomStream rng = stream_for_path(config, p);
                Path path = sample_path(spec, config.horizon, rng);
                consume(p, path);
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
}

namespace detail {

/// Chunk-indexed accumulator slots merged in fixed order.
template <class Partial>
class ChunkReducer {
  public:
    explicit ChunkReducer(std::size_t n_paths)
        : slots_((n_paths + kPathChunk - 1) / kPathChunk) {}

    Partial& slot(std::size_t path_index) { return slots_[path_index / kPathChunk]; }

    template <class Merge>
    Partial reduce(Merge&& merge) const {
        Partial total{};
        for (const Partial& s : slots_) merge(total, s);
        return total;
    }

  private:
    std::vector<Partial> slots_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Plain estimators
// ---------------------------------------------------------------------------

namespace detail {

inline MomentAccumulator accumulate_positions(const ProcessSpec& spec, double t,
                                              const SimConfig& config, unsigned threads) {
    if (!(t >= 0.0) || t > config.horizon)
        throw std::domain_error("estimator: requires 0 <= t <= horizon");
    ChunkReducer<MomentAccumulator> reducer(config.n_paths);
    for_each_path(spec, config, threads, [&](std::size_t p, const Path& path) {
        reducer.slot(p).add(position_at(path, spec, t));
    });
    return reducer.reduce(
        [](MomentAccumulator& into, const MomentAccumulator& from) { into.merge(from); });
}

}  // namespace detail

inline McEstimate mc_mean(const ProcessSpec& spec, double t, const SimConfig& config,
                          unsigned threads = 1) {
    const MomentAccumulator acc = detail::accumulate_positions(spec, t, config, threads);
    return {acc.mean(), acc.mean_std_error(), static_cast<std::size_t>(acc.count())};
}

inline McEstimate mc_variance(const ProcessSpec& spec, double t, const SimConfig& config,
                              unsigned threads = 1) {
    const MomentAccumulator acc = detail::accumulate_positions(spec, t, config, threads);
    return {acc.variance(), acc.variance_std_error(), static_cast<std::size_t>(acc.count())};
}

// ---------------------------------------------------------------------------
// Density estimation
// ---------------------------------------------------------------------------

/// Histogram density of the position at time t on bins given by `edges`, with
/// the no-switch sub-population reported separately as the atom. For constant
/// initial velocity the atom sits exactly at c_i t; otherwise its empirical
/// mean and dispersion are reported.
inline DensityResult mc_density(const ProcessSpec& spec, double t,
                                const std::vector<double>& edges, const SimConfig& config,
                                unsigned threads = 1) {
    if (config.n_paths < 100)
        throw std::invalid_argument("mc_density: needs at least 100 paths for a usable estimate");
    if (edges.size() < 2) throw std::invalid_argument("mc_density: needs at least one bin");
    for (std::size_t k = 1; k < edges.size(); ++k)
        if (!(edges[k] > edges[k - 1]))
            throw std::invalid_argument("mc_density: bin edges must be strictly increasing");
    if (!(t > 0.0) || t > config.horizon)
        throw std::domain_error("mc_density: requires 0 < t <= horizon");

    struct Partial {
        std::vector<std::int64_t> counts;
        std::int64_t below = 0, above = 0;
        MomentAccumulator atom_positions;
    };
    const std::size_t n_bins = edges.size() - 1;
    detail::ChunkReducer<Partial> reducer(config.n_paths);
    for_each_path(spec, config, threads, [&](std::size_t p, const Path& path) {
        Partial& part = reducer.slot(p);
        if (part.counts.empty()) part.counts.assign(n_bins, 0);
        const double x = position_at(path, spec, t);
        if (path.switch_count(t) == 0) {
            part.atom_positions.add(x);
        } else if (x < edges.front()) {
            ++part.below;
        } else if (x >= edges.back()) {
            ++part.above;
        } else {
            const std::size_t bin =
                std::upper_bound(edges.begin(), edges.end(), x) - edges.begin() - 1;
            ++part.counts[std::min(bin, n_bins - 1)];
        }
    });
    const Partial total = reducer.reduce([&](Partial& into, const Partial& from) {
        if (into.counts.empty()) into.counts.assign(n_bins, 0);
        if (!from.counts.empty())
            for (std::size_t b = 0; b < n_bins; ++b) into.counts[b] += from.counts[b];
        into.below += from.below;
        into.above += from.above;
        into.atom_positions.merge(from.atom_positions);
    });

    DensityResult out;
    out.layout = DensityResult::Layout::histogram;
    out.x_grid = edges;
    out.density_values.resize(n_bins);
    const double n = static_cast<double>(config.n_paths);
    for (std::size_t b = 0; b < n_bins; ++b)
        out.density_values[b] =
            static_cast<double>(total.counts[b]) / (n * (edges[b + 1] - edges[b]));
    out.mass_below = static_cast<double>(total.below) / n;
    out.mass_above = static_cast<double>(total.above) / n;
    out.atom_mass = static_cast<double>(total.atom_positions.count()) / n;
    if (auto c = spec.velocity[spec.initial_state].constant_value()) {
        out.atom_location = *c * t;
        out.atom_dispersion = 0.0;
    } else if (total.atom_positions.count() > 0) {
        out.atom_location = total.atom_positions.mean();
        out.atom_dispersion = std::sqrt(total.atom_positions.variance());
    }
    out.covers_support = (total.below + total.above) == 0;
    return out;
}

// ---------------------------------------------------------------------------
// Change of measure
// ---------------------------------------------------------------------------

/// Intensity change from base exponential rates mu to target rates lambda:
/// star velocities c*_i = mu_i - lambda_i and star jumps h*_i = -c*_i / mu_i.
/// The resulting weights 1 + h*_i = lambda_i / mu_i stay positive.
struct GirsanovPlan {
    double mu0, mu1;
    double lambda0, lambda1;

    GirsanovPlan(double mu0_, double mu1_, double lambda0_, double lambda1_)
        : mu0(mu0_), mu1(mu1_), lambda0(lambda0_), lambda1(lambda1_) {
        if (!(mu0 > 0.0) || !(mu1 > 0.0))
            throw std::invalid_argument("GirsanovPlan: base intensities must be positive");
        if (!(lambda0 > 0.0) || !(lambda1 > 0.0))
            throw std::invalid_argument("GirsanovPlan: target intensities must be positive");
    }

    double base(State s) const { return s == State::s0 ? mu0 : mu1; }
    double target(State s) const { return s == State::s0 ? lambda0 : lambda1; }
    double star_velocity(State s) const { return base(s) - target(s); }
    double star_jump(State s) const { return -star_velocity(s) / base(s); }
};

/// Likelihood ratio of the plan along one path up to time t: the exponential
/// of the segment-wise star-velocity integral times the product of
/// (1 + h*) factors, one per switch, indexed by the state whose sojourn the
/// switch completed. Unit mean over paths sampled under the base intensities.
inline double girsanov_weight(const Path& path, const GirsanovPlan& plan, double t) {
    if (!(t >= 0.0) || t > path.horizon)
        throw std::domain_error("girsanov_weight: requires 0 <= t <= horizon");
    double log_w = 0.0;
    for (std::size_t n = 0; n < path.switch_times.size(); ++n) {
        const double seg_start = path.switch_times[n];
        if (seg_start >= t) break;
        const double seg_end =
            (n + 1 < path.switch_times.size()) ? std::min(path.switch_times[n + 1], t) : t;
        log_w += plan.star_velocity(path.states[n]) * (seg_end - seg_start);
    }
    for (std::size_t k = 1; k < path.switch_times.size(); ++k) {
        if (path.switch_times[k] > t) break;
        log_w += std::log1p(plan.star_jump(path.states[k - 1]));
    }
    return std::exp(log_w);
}

/// Weighted diagnostics for a plan: the mean weight (should be one) and the
/// weighted mean of the position at t (zero when the target intensities make
/// the model a martingale).
struct GirsanovEstimates {
    McEstimate weight_mean;
    McEstimate weighted_position;
    McEstimate unweighted_position;
};

inline GirsanovEstimates mc_girsanov(const ProcessSpec& spec, const GirsanovPlan& plan, double t,
                                     const SimConfig& config, unsigned threads = 1) {
    if (!(t >= 0.0) || t > config.horizon)
        throw std::domain_error("mc_girsanov: requires 0 <= t <= horizon");
    struct Partial {
        MomentAccumulator weight, weighted, plain;
    };
    detail::ChunkReducer<Partial> reducer(config.n_paths);
    for_each_path(spec, config, threads, [&](std::size_t p, const Path& path) {
        Partial& part = reducer.slot(p);
        const double x = position_at(path, spec, t);
        const double w = girsanov_weight(path, plan, t);
        part.weight.add(w);
        part.weighted.add(w * x);
        part.plain.add(x);
    });
    const Partial total = reducer.reduce([](Partial& into, const Partial& from) {
        into.weight.merge(from.weight);
        into.weighted.merge(from.weighted);
        into.plain.merge(from.plain);
    });
    auto as_estimate = [&](const MomentAccumulator& acc) {
        return McEstimate{acc.mean(), acc.mean_std_error(),
                          static_cast<std::size_t>(acc.count())};
    };
    return {as_estimate(total.weight), as_estimate(total.weighted), as_estimate(total.plain)};
}

}  // namespace jtel::mc
