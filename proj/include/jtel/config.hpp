// JSON model configuration: sojourn families as tagged records plus a small
// typed expression grammar for velocity and jump regimes
// (const | poly(t) | exp-decay in T and t | product).
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jtel/analytic.hpp"
#include "jtel/core.hpp"
#include "jtel/distributions.hpp"

namespace jtel::config {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Expression grammar
// ---------------------------------------------------------------------------

/// Canonical expression value: scale * exp(-rate_T * T) * P(t) * exp(-rate_t * t).
/// Every grammar term is separable in (T, t), so products stay in this form
/// and the elapsed-time antiderivative has a closed form.
struct Expr {
    double scale = 1.0;
    double rate_T = 0.0;
    double rate_t = 0.0;
    std::vector<double> poly = {1.0};

    double evaluate(double T, double t) const {
        double p = 0.0;
        for (std::size_t k = poly.size(); k-- > 0;) p = p * t + poly[k];
        return scale * std::exp(-rate_T * T - rate_t * t) * p;
    }

    bool memory_dependent() const { return rate_T != 0.0; }

    std::optional<double> constant_value() const {
        if (rate_T == 0.0 && rate_t == 0.0 && poly.size() == 1)
            return scale * poly[0];
        return std::nullopt;
    }

    /// Antiderivative in t at fixed T (constant of integration at t = 0).
    double antiderivative(double T, double t) const {
        const double front = scale * std::exp(-rate_T * T);
        if (rate_t == 0.0) {
            double acc = 0.0;
            for (std::size_t k = poly.size(); k-- > 0;)
                acc = acc * t + poly[k] / static_cast<double>(k + 1);
            return front * acc * t;
        }
        // Integral of t^k exp(-B t) via the downward recurrence.
        const double B = rate_t;
        const double e = std::exp(-B * t);
        double acc = 0.0;
        double ik = -e / B + 1.0 / B;  // integral of exp(-B s) over [0, t]
        double tk = 1.0;
        for (std::size_t k = 0; k < poly.size(); ++k) {
            acc += poly[k] * ik;
            tk *= t;
            ik = (-tk * e + (k + 1.0) * ik) / B;
        }
        return front * acc;
    }

    Expr operator*(const Expr& o) const {
        Expr out;
        out.scale = scale * o.scale;
        out.rate_T = rate_T + o.rate_T;
        out.rate_t = rate_t + o.rate_t;
        out.poly.assign(poly.size() + o.poly.size() - 1, 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i)
            for (std::size_t j = 0; j < o.poly.size(); ++j)
                out.poly[i + j] += poly[i] * o.poly[j];
        return out;
    }
};

inline Expr parse_expr(const json& node, const std::string& where) {
    if (node.is_number()) {
        Expr e;
        e.scale = node.get<double>();
        return e;
    }
    if (!node.is_object() || !node.contains("kind"))
        throw ConfigError(where + ": expected a number or an object with a \"kind\" field");
    const std::string kind = node.at("kind").get<std::string>();
    if (kind == "const") {
        if (!node.contains("value")) throw ConfigError(where + ": const needs \"value\"");
        Expr e;
        e.scale = node.at("value").get<double>();
        return e;
    }
    if (kind == "poly") {
        if (!node.contains("coeffs") || !node.at("coeffs").is_array() ||
            node.at("coeffs").empty())
            throw ConfigError(where + ": poly needs a non-empty \"coeffs\" array");
        Expr e;
        e.poly = node.at("coeffs").get<std::vector<double>>();
        return e;
    }
    if (kind == "exp") {
        Expr e;
        e.scale = node.value("scale", 1.0);
        e.rate_T = node.value("rate_T", 0.0);
        e.rate_t = node.value("rate_t", 0.0);
        if (e.rate_T < 0.0 || e.rate_t < 0.0)
            throw ConfigError(where + ": exp rates must be >= 0 (decay only)");
        return e;
    }
    if (kind == "product") {
        if (!node.contains("factors") || !node.at("factors").is_array() ||
            node.at("factors").empty())
            throw ConfigError(where + ": product needs a non-empty \"factors\" array");
        Expr e;
        for (std::size_t i = 0; i < node.at("factors").size(); ++i)
            e = e * parse_expr(node.at("factors")[i],
                               where + ".factors[" + std::to_string(i) + "]");
        return e;
    }
    throw ConfigError(where + ": unknown expression kind \"" + kind + "\"");
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

inline FamilySpec parse_family(const json& node, const std::string& where) {
    if (!node.is_object() || !node.contains("family"))
        throw ConfigError(where + ": expected an object with a \"family\" field");
    auto need = [&](const char* key) -> double {
        if (!node.contains(key))
            throw ConfigError(where + ": family \"" + node.at("family").get<std::string>() +
                              "\" needs \"" + key + "\"");
        return node.at(key).get<double>();
    };
    const std::string name = node.at("family").get<std::string>();
    FamilySpec family;
    if (name == "exponential")
        family = Exponential{need("lambda")};
    else if (name == "erlang")
        family = Erlang{need("lambda"), node.value("n", 1)};
    else if (name == "weibull")
        family = WeibullType{need("lambda"), need("alpha")};
    else if (name == "pareto")
        family = Pareto{need("lambda"), need("b")};
    else if (name == "logistic")
        family = Logistic{need("lambda")};
    else if (name == "half_cauchy")
        family = HalfCauchy{need("a")};
    else if (name == "uniform")
        family = Uniform{need("upper")};
    else
        throw ConfigError(where + ": unknown family \"" + name + "\"");
    try {
        validate(family);
    } catch (const std::invalid_argument& err) {
        throw ConfigError(where + ": " + err.what());
    }
    return family;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct ModelConfig {
    FamilySpec families[2] = {Exponential{1.0}, Exponential{1.0}};
    Expr velocity[2];
    Expr jump[2];
    State initial_state = State::s0;

    ProcessSpec build() const {
        ProcessSpec spec;
        for (int i = 0; i < 2; ++i) {
            spec.sojourn[i] = jtel::build(families[i]);
            const Expr& v = velocity[i];
            if (auto c = v.constant_value()) {
                spec.velocity[i] = VelocityRegime::constant(*c);
            } else {
                spec.velocity[i] = VelocityRegime(
                    [v](double T, double u) { return v.evaluate(T, u); },
                    [v](double T, double u, double t) {
                        return v.antiderivative(T, t) - v.antiderivative(T, u);
                    },
                    v.memory_dependent());
            }
            const Expr& h = jump[i];
            if (auto c = h.constant_value())
                spec.jump[i] = JumpRegime::constant(*c);
            else
                spec.jump[i] = JumpRegime([h](double T) { return h.evaluate(0.0, T); });
        }
        spec.initial_state = initial_state;
        return spec;
    }

    /// Constant-case parameters when the model is in the solved regime:
    /// constant velocities and jumps, exponential sojourns.
    std::optional<analytic::ConstantCaseParams> constant_case() const {
        const auto* e0 = std::get_if<Exponential>(&families[0]);
        const auto* e1 = std::get_if<Exponential>(&families[1]);
        if (!e0 || !e1) return std::nullopt;
        const auto c0 = velocity[0].constant_value();
        const auto c1 = velocity[1].constant_value();
        const auto h0 = jump[0].constant_value();
        const auto h1 = jump[1].constant_value();
        if (!c0 || !c1 || !h0 || !h1) return std::nullopt;
        if (!(*c0 > *c1)) return std::nullopt;
        return analytic::ConstantCaseParams(*c0, *c1, *h0, *h1, e0->lambda, e1->lambda);
    }
};

inline ModelConfig parse_model(const json& node, const std::string& where) {
    if (!node.is_object()) throw ConfigError(where + ": expected an object");
    ModelConfig model;
    const int initial = node.value("initial_state", 0);
    if (initial != 0 && initial != 1)
        throw ConfigError(where + ".initial_state: must be 0 or 1");
    model.initial_state = state_of(initial);
    for (const char* key : {"sojourn", "velocity", "jump"}) {
        if (!node.contains(key) || !node.at(key).is_array() || node.at(key).size() != 2)
            throw ConfigError(where + "." + key + ": expected an array of two entries");
    }
    for (int i = 0; i < 2; ++i) {
        const std::string tag = "[" + std::to_string(i) + "]";
        model.families[i] = parse_family(node.at("sojourn")[i], where + ".sojourn" + tag);
        model.velocity[i] = parse_expr(node.at("velocity")[i], where + ".velocity" + tag);
        model.jump[i] = parse_expr(node.at("jump")[i], where + ".jump" + tag);
        if (model.jump[i].memory_dependent())
            throw ConfigError(where + ".jump" + tag +
                              ": jump amplitudes are functions of the completed sojourn only; "
                              "rate_T is not allowed here");
    }
    return model;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    ModelConfig model;
    double horizon = 1.0;
    double t = -1.0;  // evaluation time; defaults to horizon
    double dt = 1e-3;
    std::size_t paths = 100000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    int order = 2;
    int bins = 50;
    double x_min = 0.0, x_max = 0.0;  // 0,0 means automatic
    bool antithetic = false;
    std::size_t paths_csv_limit = 1000;
    double mu[2] = {0.0, 0.0};      // girsanov base intensities
    double lambda[2] = {0.0, 0.0};  // girsanov target intensities

    double eval_time() const { return t > 0.0 ? t : horizon; }
};

inline RunConfig parse_run_config(const json& root) {
    if (!root.is_object()) throw ConfigError("config: expected a JSON object");
    if (!root.contains("model")) throw ConfigError("config: missing \"model\"");
    RunConfig run;
    run.model = parse_model(root.at("model"), "model");
    run.horizon = root.value("horizon", 1.0);
    if (!(run.horizon > 0.0)) throw ConfigError("config.horizon: must be > 0");
    run.t = root.value("t", -1.0);
    if (root.contains("t") && !(run.t > 0.0))
        throw ConfigError("config.t: must be > 0");
    if (run.t > run.horizon) throw ConfigError("config.t: must not exceed horizon");
    run.dt = root.value("dt", 1e-3);
    if (!(run.dt > 0.0)) throw ConfigError("config.dt: must be > 0");
    run.paths = root.value("paths", std::size_t{100000});
    if (run.paths < 1) throw ConfigError("config.paths: must be >= 1");
    run.seed = root.value("seed", std::uint64_t{0});
    run.threads = root.value("threads", 1u);
    run.order = root.value("order", 2);
    if (run.order < 0 || run.order > 6)
        throw ConfigError("config.order: supported moment orders are 0..6");
    run.bins = root.value("bins", 50);
    if (run.bins < 1) throw ConfigError("config.bins: must be >= 1");
    run.x_min = root.value("x_min", 0.0);
    run.x_max = root.value("x_max", 0.0);
    run.antithetic = root.value("antithetic", false);
    run.paths_csv_limit = root.value("paths_csv_limit", std::size_t{1000});
    if (root.contains("girsanov")) {
        const json& g = root.at("girsanov");
        for (const char* key : {"mu", "lambda"})
            if (!g.contains(key) || !g.at(key).is_array() || g.at(key).size() != 2)
                throw ConfigError("config.girsanov: needs \"mu\" and \"lambda\" pairs");
        for (int i = 0; i < 2; ++i) {
            run.mu[i] = g.at("mu")[i].get<double>();
            run.lambda[i] = g.at("lambda")[i].get<double>();
        }
    }
    return run;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& err) {
        throw ConfigError("config: invalid JSON in " + path + ": " + err.what());
    }
    return parse_run_config(root);
}

}  // namespace jtel::config
