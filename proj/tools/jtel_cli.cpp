// Command-line front end: simulate | density | moments | check | girsanov.
// Exit codes: 0 ok, 1 usage, 2 config, 3 numerical failure.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "jtel/analytic.hpp"
#include "jtel/config.hpp"
#include "jtel/core.hpp"
#include "jtel/martingale.hpp"
#include "jtel/serialize.hpp"
#include "jtel/simulate.hpp"
#include "jtel/volterra.hpp"

namespace fs = std::filesystem;
using jtel::config::ConfigError;
using jtel::config::RunConfig;
using nlohmann::json;

namespace {

// RFC-4180 rows, '.' decimal, 17 significant digits.
class CsvWriter {
  public:
    explicit CsvWriter(const fs::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << "\r\n";
    }

    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
    static std::string num(std::uint64_t v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%" PRIu64, v);
        return buf;
    }

  private:
    std::ofstream out_;
};

void write_json(const fs::path& path, const json& value) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << value.dump(2) << "\n";
}

json base_record(const char* command, const RunConfig& run) {
    return json{{"command", command},
                {"seed", run.seed},
                {"horizon", run.horizon},
                {"t", run.eval_time()}};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& run, const fs::path& out_dir) {
    const jtel::ProcessSpec spec = run.model.build();
    jtel::mc::SimConfig sim;
    sim.n_paths = run.paths;
    sim.horizon = run.horizon;
    sim.seed = run.seed;
    sim.antithetic = run.antithetic;
    const double t = run.eval_time();

    struct Partial {
        jtel::MomentAccumulator positions;
        std::uint64_t no_switch = 0;
    };
    jtel::mc::detail::ChunkReducer<Partial> reducer(sim.n_paths);
    const std::size_t skeleton_limit = std::min(run.paths_csv_limit, run.paths);
    std::vector<jtel::Path> skeletons(skeleton_limit);
    jtel::mc::for_each_path(spec, sim, run.threads, [&](std::size_t p, const jtel::Path& path) {
        Partial& part = reducer.slot(p);
        part.positions.add(jtel::position_at(path, spec, t));
        if (path.switch_count(t) == 0) ++part.no_switch;
        if (p < skeleton_limit) skeletons[p] = path;
    });
    const Partial total = reducer.reduce([](Partial& into, const Partial& from) {
        into.positions.merge(from.positions);
        into.no_switch += from.no_switch;
    });

    CsvWriter csv(out_dir / "paths.csv");
    csv.row({"path", "event", "time", "state", "sojourn", "jump", "position"});
    for (std::size_t p = 0; p < skeleton_limit; ++p) {
        const jtel::Path& path = skeletons[p];
        for (std::size_t n = 0; n < path.switch_times.size(); ++n) {
            csv.row({CsvWriter::num(static_cast<std::uint64_t>(p)),
                     CsvWriter::num(static_cast<std::uint64_t>(n)),
                     CsvWriter::num(path.switch_times[n]),
                     CsvWriter::num(static_cast<std::uint64_t>(jtel::index(path.states[n]))),
                     CsvWriter::num(path.sojourns[n]),
                     CsvWriter::num(n == 0 ? 0.0 : path.jumps[n - 1]),
                     CsvWriter::num(path.positions[n])});
        }
    }

    const double n = static_cast<double>(run.paths);
    const double atom = static_cast<double>(total.no_switch) / n;
    json estimates = base_record("simulate", run);
    estimates["n_paths"] = run.paths;
    estimates["mean"] = jtel::to_json(jtel::mc::McEstimate{
        total.positions.mean(), total.positions.mean_std_error(), run.paths});
    estimates["variance"] = jtel::to_json(jtel::mc::McEstimate{
        total.positions.variance(), total.positions.variance_std_error(), run.paths});
    estimates["atom_mass"] = jtel::to_json(
        jtel::mc::McEstimate{atom, std::sqrt(std::max(atom * (1.0 - atom), 0.0) / n), run.paths});
    write_json(out_dir / "estimates.json", estimates);
    return 0;
}

// ---------------------------------------------------------------------------
// density
// ---------------------------------------------------------------------------

int cmd_density(const RunConfig& run, const fs::path& out_dir) {
    const auto params = run.model.constant_case();
    if (!params)
        throw ConfigError(
            "density: the closed form needs the constant case (constant velocities with "
            "c0 > c1, constant jumps, exponential sojourns)");
    const jtel::ProcessSpec spec = run.model.build();
    const double t = run.eval_time();
    const jtel::State i = run.model.initial_state;

    auto [lo, hi] = jtel::analytic::support(*params, i, t);
    if (run.x_min < run.x_max) {
        lo = run.x_min;
        hi = run.x_max;
    }
    std::vector<double> edges(run.bins + 1);
    for (int b = 0; b <= run.bins; ++b)
        edges[b] = lo + (hi - lo) * static_cast<double>(b) / run.bins;

    jtel::mc::SimConfig sim;
    sim.n_paths = run.paths;
    sim.horizon = run.horizon;
    sim.seed = run.seed;
    sim.antithetic = run.antithetic;
    const jtel::DensityResult mc =
        jtel::mc::mc_density(spec, t, edges, sim, run.threads);

    // Bin-averaged closed form, so both columns integrate the same way.
    const auto& rule = jtel::gauss_legendre_4();
    std::vector<double> analytic_avg(run.bins);
    for (int b = 0; b < run.bins; ++b) {
        const double width = edges[b + 1] - edges[b];
        analytic_avg[b] = jtel::integrate_gl(
                              [&](double x) {
                                  return jtel::analytic::density_closed_form(*params, i, x, t);
                              },
                              edges[b], edges[b + 1], rule) /
                          width;
    }

    double l1 = 0.0;
    CsvWriter csv(out_dir / "density.csv");
    csv.row({"x", "analytic", "monte_carlo", "abs_diff"});
    for (int b = 0; b < run.bins; ++b) {
        const double mid = 0.5 * (edges[b] + edges[b + 1]);
        const double diff = std::abs(analytic_avg[b] - mc.density_values[b]);
        l1 += diff * (edges[b + 1] - edges[b]);
        csv.row({CsvWriter::num(mid), CsvWriter::num(analytic_avg[b]),
                 CsvWriter::num(mc.density_values[b]), CsvWriter::num(diff)});
    }

    const jtel::DensityResult closed =
        jtel::analytic::density_total(*params, i, t, edges);
    json summary = base_record("density", run);
    summary["n_paths"] = run.paths;
    summary["bins"] = run.bins;
    summary["l1_distance"] = l1;
    summary["atom"] = {{"location", jtel::analytic::atom_location(*params, i, t)},
                       {"mass_analytic", jtel::analytic::atom_mass(*params, i, t)},
                       {"mass_monte_carlo", mc.atom_mass}};
    summary["grid_covers_support"] = closed.covers_support;
    summary["closed_form_exact"] = closed.closed_form_exact;
    summary["monte_carlo"] = jtel::to_json(mc);
    write_json(out_dir / "density.json", summary);
    return 0;
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

int cmd_moments(const RunConfig& run, const fs::path& out_dir) {
    const jtel::ProcessSpec spec = run.model.build();
    const auto grid = jtel::volterra::UniformGrid::over(run.horizon, run.dt);
    const auto solutions = jtel::volterra::solve_moments(spec, run.order, grid);

    std::vector<std::string> header{"t"};
    for (int k = 0; k <= run.order; ++k) {
        header.push_back("mu0_" + std::to_string(k));
        header.push_back("mu1_" + std::to_string(k));
    }
    double crosscheck = 0.0;
    jtel::volterra::GridFnPair variance{};
    if (run.order >= 2) {
        header.push_back("var0");
        header.push_back("var1");
        variance = jtel::volterra::variance_from_moments(solutions);
        const auto direct =
            jtel::volterra::solve_variance_direct(spec, grid, solutions[1].values);
        for (int i = 0; i < 2; ++i)
            for (std::size_t k = 0; k < grid.size(); ++k)
                crosscheck = std::max(crosscheck, std::abs(direct[i][k] - variance[i][k]));
    }

    CsvWriter csv(out_dir / "moments.csv");
    csv.row(header);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<std::string> row{CsvWriter::num(grid.time(k))};
        for (int ord = 0; ord <= run.order; ++ord) {
            row.push_back(CsvWriter::num(solutions[ord].values[0][k]));
            row.push_back(CsvWriter::num(solutions[ord].values[1][k]));
        }
        if (run.order >= 2) {
            row.push_back(CsvWriter::num(variance[0][k]));
            row.push_back(CsvWriter::num(variance[1][k]));
        }
        csv.row(row);
    }

    json summary = base_record("moments", run);
    summary["order"] = run.order;
    summary["dt"] = grid.dt;
    summary["rule"] = solutions[0].rule;
    if (run.order >= 2) summary["variance_crosscheck_max_error"] = crosscheck;
    write_json(out_dir / "moments.json", summary);
    return 0;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

int cmd_check(const RunConfig& run, const fs::path& out_dir) {
    const jtel::ProcessSpec spec = run.model.build();
    const auto grid_spec = jtel::volterra::UniformGrid::over(run.horizon, run.dt);
    std::vector<double> grid(grid_spec.size());
    for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = grid_spec.time(k);
    const auto report = jtel::martingale::balance_residual(spec, grid);
    json body = jtel::martingale::to_json(report);
    body.update(base_record("check", run));
    write_json(out_dir / "balance.json", body);
    return 0;
}

// ---------------------------------------------------------------------------
// girsanov
// ---------------------------------------------------------------------------

int cmd_girsanov(const RunConfig& run, const fs::path& out_dir) {
    if (!(run.mu[0] > 0.0) || !(run.mu[1] > 0.0) || !(run.lambda[0] > 0.0) ||
        !(run.lambda[1] > 0.0))
        throw ConfigError("girsanov: config needs a \"girsanov\" section with positive "
                          "\"mu\" and \"lambda\" pairs");
    // Demo model: sampled under exponential base intensities mu, with constant
    // regimes proportioned to the target intensities lambda.
    jtel::ProcessSpec spec;
    for (int i = 0; i < 2; ++i) {
        spec.sojourn[i] = jtel::build(jtel::Exponential{run.mu[i]});
        spec.jump[i] = jtel::JumpRegime::constant(1.0);
        spec.velocity[i] = jtel::VelocityRegime::constant(-run.lambda[i]);
    }
    spec.initial_state = run.model.initial_state;

    const auto plan = jtel::martingale::build_girsanov_plan({run.mu[0], run.mu[1]},
                                                            {run.lambda[0], run.lambda[1]});
    jtel::mc::SimConfig sim;
    sim.n_paths = run.paths;
    sim.horizon = run.horizon;
    sim.seed = run.seed;
    const auto est = jtel::mc::mc_girsanov(spec, plan, run.eval_time(), sim, run.threads);

    json out = base_record("girsanov", run);
    out["n_paths"] = run.paths;
    out["base_intensities"] = {run.mu[0], run.mu[1]};
    out["target_intensities"] = {run.lambda[0], run.lambda[1]};
    out["star_velocities"] = {plan.star_velocity(jtel::State::s0),
                              plan.star_velocity(jtel::State::s1)};
    out["star_jumps"] = {plan.star_jump(jtel::State::s0), plan.star_jump(jtel::State::s1)};
    out["weight_mean"] = jtel::to_json(est.weight_mean);
    out["weighted_mean"] = jtel::to_json(est.weighted_position);
    out["unweighted_mean"] = jtel::to_json(est.unweighted_position);
    write_json(out_dir / "girsanov.json", out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Damped jump-telegraph process toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    unsigned threads = 0;
    double dt = 0.0;
    std::uint64_t paths = 0;
    bool seed_set = false, threads_set = false, dt_set = false, paths_set = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "model/run configuration (JSON)")
            ->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "random seed")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--threads", threads, "worker threads")->each([&](const std::string&) {
            threads_set = true;
        });
        cmd->add_option("--dt", dt, "solver grid step")->each([&](const std::string&) {
            dt_set = true;
        });
        cmd->add_option("--paths", paths, "Monte Carlo path count")
            ->each([&](const std::string&) { paths_set = true; });
    };
    for (const char* name : {"simulate", "density", "moments", "check", "girsanov"})
        add_common(app.add_subcommand(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        RunConfig run = jtel::config::load_run_config(config_path);
        if (seed_set) run.seed = seed;
        if (threads_set) run.threads = threads;
        if (dt_set) {
            if (!(dt > 0.0)) throw ConfigError("--dt must be > 0");
            run.dt = dt;
        }
        if (paths_set) {
            if (paths < 1) throw ConfigError("--paths must be >= 1");
            run.paths = paths;
        }
        fs::create_directories(out_dir);

        const std::string command = app.get_subcommands().front()->get_name();
        if (command == "simulate") return cmd_simulate(run, out_dir);
        if (command == "density") return cmd_density(run, out_dir);
        if (command == "moments") return cmd_moments(run, out_dir);
        if (command == "check") return cmd_check(run, out_dir);
        if (command == "girsanov") return cmd_girsanov(run, out_dir);
        std::cerr << "unknown subcommand\n";
        return 1;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
}
