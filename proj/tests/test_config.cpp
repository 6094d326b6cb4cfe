#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>
#include <string>

#include <json.hpp>

#include "jtel/config.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using jtel::config::ConfigError;
using nlohmann::json;

namespace {

// =============================================================================
// Schema subset checker (type / required / properties / items)
// =============================================================================

void expect_matches_schema(const json& value, const json& schema, const std::string& where) {
    if (schema.contains("type")) {
        const std::string type = schema.at("type").get<std::string>();
        bool ok = (type == "object" && value.is_object()) ||
                  (type == "array" && value.is_array()) ||
                  (type == "number" && value.is_number()) ||
                  (type == "integer" && value.is_number_integer()) ||
                  (type == "string" && value.is_string()) ||
                  (type == "boolean" && value.is_boolean());
        ASSERT_TRUE(ok) << where << ": expected " << type << ", got " << value.type_name();
    }
    if (schema.contains("required")) {
        for (const auto& key : schema.at("required")) {
            ASSERT_TRUE(value.contains(key.get<std::string>()))
                << where << ": missing required key " << key;
        }
    }
    if (schema.contains("properties"))
        for (const auto& [key, sub] : schema.at("properties").items())
            if (value.contains(key))
                expect_matches_schema(value.at(key), sub, where + "." + key);
    if (schema.contains("items") && value.is_array())
        for (std::size_t k = 0; k < value.size(); ++k)
            expect_matches_schema(value[k], schema.at("items"),
                                  where + "[" + std::to_string(k) + "]");
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    EXPECT_TRUE(static_cast<bool>(in)) << "cannot open " << path;
    json value;
    in >> value;
    return value;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// =============================================================================
// Expression grammar
// =============================================================================

TEST(Expr, NumberLiteralIsConstant) {
    const auto e = jtel::config::parse_expr(json(2.5), "v");
    EXPECT_DOUBLE_EQ(e.evaluate(3.0, 7.0), 2.5);
    ASSERT_TRUE(e.constant_value().has_value());
    EXPECT_DOUBLE_EQ(*e.constant_value(), 2.5);
}

TEST(Expr, PolynomialEvaluation) {
    const auto e = jtel::config::parse_expr(json{{"kind", "poly"}, {"coeffs", {1.0, 0.0, 2.0}}},
                                            "v");
    EXPECT_DOUBLE_EQ(e.evaluate(0.0, 3.0), 1.0 + 2.0 * 9.0);
    EXPECT_FALSE(e.constant_value().has_value());
    EXPECT_FALSE(e.memory_dependent());
}

TEST(Expr, ExponentialDecayInBothVariables) {
    const auto e = jtel::config::parse_expr(
        json{{"kind", "exp"}, {"scale", 2.0}, {"rate_T", 0.5}, {"rate_t", 1.5}}, "v");
    EXPECT_NEAR(e.evaluate(2.0, 1.0), 2.0 * std::exp(-1.0 - 1.5), 1e-15);
    EXPECT_TRUE(e.memory_dependent());
}

TEST(Expr, ProductsStayInCanonicalForm) {
    const json node{{"kind", "product"},
                    {"factors",
                     {json{{"kind", "poly"}, {"coeffs", {0.0, 1.0}}},
                      json{{"kind", "exp"}, {"rate_t", 0.7}}, json(3.0)}}};
    const auto e = jtel::config::parse_expr(node, "v");
    EXPECT_NEAR(e.evaluate(0.0, 2.0), 3.0 * 2.0 * std::exp(-1.4), 1e-14);
}

TEST(Expr, AntiderivativeMatchesQuadrature) {
    const json node{{"kind", "product"},
                    {"factors",
                     {json{{"kind", "poly"}, {"coeffs", {0.5, -1.0, 2.0}}},
                      json{{"kind", "exp"}, {"scale", 1.3}, {"rate_T", 0.4}, {"rate_t", 0.9}}}}};
    const auto e = jtel::config::parse_expr(node, "v");
    jtel::RandomStream rng(31);
    for (int rep = 0; rep < 100; ++rep) {
        const double T = 3.0 * rng.uniform();
        double u = 2.0 * rng.uniform(), t = 2.0 * rng.uniform();
        if (u > t) std::swap(u, t);
        const double closed = e.antiderivative(T, t) - e.antiderivative(T, u);
        const double quad = jtel::integrate_adaptive(
            [&](double s) { return e.evaluate(T, s); }, u, t, 1e-12);
        ASSERT_NEAR(closed, quad, 1e-10);
    }
}

TEST(Expr, RejectsUnknownKindsAndGrowthRates) {
    EXPECT_THROW(jtel::config::parse_expr(json{{"kind", "sin"}}, "v"), ConfigError);
    EXPECT_THROW(jtel::config::parse_expr(json{{"kind", "exp"}, {"rate_t", -1.0}}, "v"),
                 ConfigError);
    EXPECT_THROW(jtel::config::parse_expr(json{{"kind", "poly"}}, "v"), ConfigError);
}

// =============================================================================
// Model parsing
// =============================================================================

json minimal_model() {
    return json{{"initial_state", 0},
                {"sojourn",
                 {json{{"family", "exponential"}, {"lambda", 1.0}},
                  json{{"family", "exponential"}, {"lambda", 1.0}}}},
                {"velocity", {1.0, -1.0}},
                {"jump", {0.0, 0.0}}};
}

TEST(Model, MinimalConfigBuilds) {
    const auto model = jtel::config::parse_model(minimal_model(), "model");
    const auto spec = model.build();
    spec.validate();
    EXPECT_TRUE(model.constant_case().has_value());
    EXPECT_DOUBLE_EQ(model.constant_case()->c0, 1.0);
}

TEST(Model, FamilyErrorsNameTheField) {
    json bad = minimal_model();
    bad["sojourn"][1] = json{{"family", "erlang"}, {"lambda", 1.0}, {"n", 0}};
    try {
        jtel::config::parse_model(bad, "model");
        FAIL() << "expected config error";
    } catch (const ConfigError& err) {
        const std::string what = err.what();
        EXPECT_NE(what.find("model.sojourn[1]"), std::string::npos) << what;
        EXPECT_NE(what.find("n >= 1"), std::string::npos) << what;
    }
}

TEST(Model, JumpsMayNotDependOnThePreviousSojourn) {
    json bad = minimal_model();
    bad["jump"][0] = json{{"kind", "exp"}, {"rate_T", 1.0}};
    EXPECT_THROW(jtel::config::parse_model(bad, "model"), ConfigError);
}

TEST(Model, NonConstantRegimesAreNotTheConstantCase) {
    json node = minimal_model();
    node["velocity"][0] = json{{"kind", "poly"}, {"coeffs", {0.0, 1.0}}};
    const auto model = jtel::config::parse_model(node, "model");
    EXPECT_FALSE(model.constant_case().has_value());
}

TEST(RunConfig, ValidatesScalarFields) {
    json root{{"model", minimal_model()}, {"horizon", 1.0}, {"t", 2.0}};
    EXPECT_THROW(jtel::config::parse_run_config(root), ConfigError);
    root["t"] = 0.0;
    EXPECT_THROW(jtel::config::parse_run_config(root), ConfigError);
    root["t"] = 0.5;
    EXPECT_NO_THROW(jtel::config::parse_run_config(root));
}

// =============================================================================
// CLI end to end
// =============================================================================

struct CliRun {
    int exit_code;
};

CliRun run_cli(const std::string& args) {
    const std::string command = std::string(JTEL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    return {WEXITSTATUS(status)};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("jtel_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_config(const fs::path& dir, const json& body) {
    const fs::path path = dir / "config.json";
    std::ofstream out(path);
    out << body.dump(2);
    return path;
}

json symmetric_run_config() {
    return json{{"model", minimal_model()}, {"horizon", 1.0}, {"t", 1.0},
                {"paths", 20000},           {"seed", 42},     {"bins", 25},
                {"dt", 0.002}};
}

TEST(Cli, SimulateProducesValidatedEstimates) {
    const auto dir = fresh_dir("simulate");
    const auto config = write_config(dir, symmetric_run_config());
    const auto run =
        run_cli("simulate --config " + config.string() + " --out " + dir.string());
    ASSERT_EQ(run.exit_code, 0);
    const json estimates = load_json(dir / "estimates.json");
    expect_matches_schema(estimates,
                          load_json(fs::path(JTEL_SOURCE_DIR) / "schemas" /
                                    "estimates.schema.json"),
                          "estimates");
    const double mean = estimates["mean"]["value"].get<double>();
    const double se = estimates["mean"]["std_error"].get<double>();
    EXPECT_NEAR(mean, oracle::symmetric_mean(1.0, 1.0, 1.0), 3.0 * se);
    EXPECT_TRUE(fs::exists(dir / "paths.csv"));
}

TEST(Cli, RepeatedSeedsAreByteIdenticalAcrossThreads) {
    const auto dir1 = fresh_dir("det1");
    const auto dir2 = fresh_dir("det2");
    const auto dir3 = fresh_dir("det3");
    const auto config = write_config(dir1, symmetric_run_config());
    ASSERT_EQ(run_cli("simulate --config " + config.string() + " --threads 1 --out " +
                      dir1.string())
                  .exit_code,
              0);
    ASSERT_EQ(run_cli("simulate --config " + config.string() + " --threads 4 --out " +
                      dir2.string())
                  .exit_code,
              0);
    ASSERT_EQ(run_cli("simulate --config " + config.string() + " --threads 8 --out " +
                      dir3.string())
                  .exit_code,
              0);
    EXPECT_EQ(read_bytes(dir1 / "estimates.json"), read_bytes(dir2 / "estimates.json"));
    EXPECT_EQ(read_bytes(dir1 / "paths.csv"), read_bytes(dir2 / "paths.csv"));
    EXPECT_EQ(read_bytes(dir1 / "estimates.json"), read_bytes(dir3 / "estimates.json"));
    EXPECT_EQ(read_bytes(dir1 / "paths.csv"), read_bytes(dir3 / "paths.csv"));
}

TEST(Cli, DensityReportsTheComparison) {
    const auto dir = fresh_dir("density");
    json body = symmetric_run_config();
    body["paths"] = 50000;
    const auto config = write_config(dir, body);
    ASSERT_EQ(run_cli("density --config " + config.string() + " --out " + dir.string())
                  .exit_code,
              0);
    const json summary = load_json(dir / "density.json");
    expect_matches_schema(
        summary, load_json(fs::path(JTEL_SOURCE_DIR) / "schemas" / "density.schema.json"),
        "density");
    EXPECT_LT(summary["l1_distance"].get<double>(), 0.05);
    EXPECT_TRUE(summary["grid_covers_support"].get<bool>());
    // csv has a header and one row per bin
    std::ifstream csv(dir / "density.csv");
    std::string line;
    int rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    EXPECT_EQ(rows, 26);
}

TEST(Cli, DensityFlagsAGridMissingTheSupport) {
    const auto dir = fresh_dir("density_narrow");
    json body = symmetric_run_config();
    body["paths"] = 2000;
    body["x_min"] = -0.2;
    body["x_max"] = 0.2;  // light cone at t = 1 is (-1, 1)
    const auto config = write_config(dir, body);
    ASSERT_EQ(run_cli("density --config " + config.string() + " --out " + dir.string())
                  .exit_code,
              0);
    const json summary = load_json(dir / "density.json");
    EXPECT_FALSE(summary["grid_covers_support"].get<bool>());
    EXPECT_FALSE(summary["monte_carlo"]["covers_support"].get<bool>());
}

TEST(Cli, DensityRefusesModelsOutsideTheClosedForm) {
    const auto dir = fresh_dir("density_refuse");
    json body = symmetric_run_config();
    body["model"]["sojourn"][0] = json{{"family", "erlang"}, {"lambda", 1.0}, {"n", 2}};
    const auto config = write_config(dir, body);
    EXPECT_EQ(run_cli("density --config " + config.string() + " --out " + dir.string())
                  .exit_code,
              2);
}

TEST(Cli, MomentsEmitVarianceColumnsAndCrossCheck) {
    const auto dir = fresh_dir("moments");
    json body;
    body["model"] = load_json(fs::path(JTEL_SOURCE_DIR) / "configs" /
                              "balanced_weibull.json")["model"];
    body["horizon"] = 1.0;
    body["dt"] = 0.001;
    body["order"] = 2;
    const auto config = write_config(dir, body);
    ASSERT_EQ(run_cli("moments --config " + config.string() + " --out " + dir.string())
                  .exit_code,
              0);
    const json summary = load_json(dir / "moments.json");
    expect_matches_schema(
        summary, load_json(fs::path(JTEL_SOURCE_DIR) / "schemas" / "moments.schema.json"),
        "moments");
    EXPECT_LT(summary["variance_crosscheck_max_error"].get<double>(), 1e-6);
    std::ifstream csv(dir / "moments.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_NE(header.find("mu0_2"), std::string::npos);
    EXPECT_NE(header.find("var1"), std::string::npos);
    // balanced model: first moments stay at zero all along the grid
    std::string line, last;
    while (std::getline(csv, line))
        if (line.size() > 1) last = line;
    std::stringstream fields(last);
    std::string field;
    std::vector<double> row;
    while (std::getline(fields, field, ',')) row.push_back(std::stod(field));
    ASSERT_GE(row.size(), 9u);  // t, mu0_0, mu1_0, mu0_1, mu1_1, mu0_2, mu1_2, var0, var1
    EXPECT_LT(std::abs(row[3]), 1e-6);
    EXPECT_LT(std::abs(row[4]), 1e-6);
}

TEST(Cli, CheckReportsBalancedModelAsMartingale) {
    const auto dir = fresh_dir("check");
    json body;
    body["model"] = load_json(fs::path(JTEL_SOURCE_DIR) / "configs" /
                              "balanced_weibull.json")["model"];
    body["horizon"] = 2.0;
    body["dt"] = 0.01;
    const auto config = write_config(dir, body);
    ASSERT_EQ(
        run_cli("check --config " + config.string() + " --out " + dir.string()).exit_code, 0);
    const json report = load_json(dir / "balance.json");
    expect_matches_schema(
        report, load_json(fs::path(JTEL_SOURCE_DIR) / "schemas" / "balance.schema.json"),
        "balance");
    EXPECT_TRUE(report["is_martingale"].get<bool>());
    EXPECT_LT(report["max_abs_residual"].get<double>(), 1e-8);
}

TEST(Cli, GirsanovDemoEmitsSideBySideMeans) {
    const auto dir = fresh_dir("girsanov");
    const fs::path config = fs::path(JTEL_SOURCE_DIR) / "configs" / "girsanov_demo.json";
    ASSERT_EQ(run_cli("girsanov --config " + config.string() + " --paths 50000 --out " +
                      dir.string())
                  .exit_code,
              0);
    const json report = load_json(dir / "girsanov.json");
    expect_matches_schema(
        report, load_json(fs::path(JTEL_SOURCE_DIR) / "schemas" / "girsanov.schema.json"),
        "girsanov");
    const double wmean = report["weight_mean"]["value"].get<double>();
    const double wse = report["weight_mean"]["std_error"].get<double>();
    EXPECT_NEAR(wmean, 1.0, 3.0 * wse);
}

TEST(Cli, GirsanovRunsAreReproducibleByteForByte) {
    const auto dir1 = fresh_dir("girsanov_rep1");
    const auto dir2 = fresh_dir("girsanov_rep2");
    const fs::path config = fs::path(JTEL_SOURCE_DIR) / "configs" / "girsanov_demo.json";
    const std::string args = "girsanov --config " + config.string() + " --paths 20000";
    ASSERT_EQ(run_cli(args + " --threads 1 --out " + dir1.string()).exit_code, 0);
    ASSERT_EQ(run_cli(args + " --threads 4 --out " + dir2.string()).exit_code, 0);
    EXPECT_EQ(read_bytes(dir1 / "girsanov.json"), read_bytes(dir2 / "girsanov.json"));
}

TEST(Cli, ExitCodesFollowTheContract) {
    const auto dir = fresh_dir("exit_codes");
    // usage: unknown flag
    EXPECT_EQ(run_cli("simulate --nonsense").exit_code, 1);
    // usage: no subcommand
    EXPECT_EQ(run_cli("").exit_code, 1);
    // config: missing file
    EXPECT_EQ(run_cli("simulate --config " + (dir / "absent.json").string()).exit_code, 2);
    // config: invalid family parameter
    json bad = symmetric_run_config();
    bad["model"]["sojourn"][0]["lambda"] = -1.0;
    const auto config = write_config(dir, bad);
    EXPECT_EQ(run_cli("simulate --config " + config.string() + " --out " + dir.string())
                  .exit_code,
              2);
    // config: t = 0 density request is refused at parse time
    json zero_t = symmetric_run_config();
    zero_t["t"] = 0.0;
    const auto config_zero = write_config(dir, zero_t);
    EXPECT_EQ(run_cli("density --config " + config_zero.string() + " --out " + dir.string())
                  .exit_code,
              2);
    // numerical: solver grid too coarse for an offset kernel support
    json coarse = symmetric_run_config();
    coarse["model"]["sojourn"][0] = json{{"family", "pareto"}, {"lambda", 1.5}, {"b", 0.01}};
    coarse["dt"] = 0.5;
    const auto config_coarse = write_config(dir, coarse);
    EXPECT_EQ(run_cli("moments --config " + config_coarse.string() + " --out " + dir.string())
                  .exit_code,
              3);
}

}  // namespace
