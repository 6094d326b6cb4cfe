#include <cmath>
#include <gtest/gtest.h>
#include <vector>

#include "jtel/distributions.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace {

std::vector<jtel::FamilySpec> catalog() {
    return {jtel::Exponential{1.3},     jtel::Erlang{1.0, 2},
            jtel::WeibullType{0.8, 1.0}, jtel::Pareto{1.5, 0.5},
            jtel::Logistic{1.1},        jtel::HalfCauchy{1.0},
            jtel::Uniform{2.0}};
}

// grid inside the support of the family
std::vector<double> interior_grid(const jtel::SojournDistribution& dist) {
    const double lo = dist.support_lower;
    const double hi = std::isfinite(dist.support_upper)
                          ? dist.support_upper * (1.0 - 1e-6)
                          : 5.0 * dist.scale_hint;
    std::vector<double> grid;
    for (int k = 1; k <= 160; ++k)
        grid.push_back(lo + (hi - lo) * k / 161.0);
    return grid;
}

// =============================================================================
// Pinned values
// =============================================================================

TEST(Families, ExponentialPinnedValues) {
    const auto dist = jtel::build(jtel::Exponential{1.0});
    EXPECT_DOUBLE_EQ(dist.density(0.0), 1.0);
    EXPECT_NEAR(dist.survival(1.0), std::exp(-1.0), 1e-15);
}

TEST(Families, UniformPinnedValues) {
    const auto dist = jtel::build(jtel::Uniform{2.0});
    EXPECT_DOUBLE_EQ(dist.density(1.0), 0.5);
    EXPECT_DOUBLE_EQ(dist.density(1.999), 0.5);
    EXPECT_DOUBLE_EQ(dist.density(2.5), 0.0);
    EXPECT_DOUBLE_EQ(dist.survival(1.0), 0.5);
}

TEST(Families, PrintedDensityForms) {
    const double lam = 1.1, a = 0.7;
    const auto logistic = jtel::build(jtel::Logistic{lam});
    const auto half_cauchy = jtel::build(jtel::HalfCauchy{a});
    for (double t : {0.0, 0.4, 1.3, 3.7}) {
        const double w = std::exp(-lam * t);
        EXPECT_NEAR(logistic.density(t), 2.0 * lam * w / ((1.0 + w) * (1.0 + w)), 1e-15);
        EXPECT_NEAR(half_cauchy.density(t), (2.0 * a / M_PI) / (a * a + t * t), 1e-15);
    }
    const auto weibull = jtel::build(jtel::WeibullType{0.9, 1.5});
    for (double t : {0.2, 1.0, 2.4})
        EXPECT_NEAR(weibull.density(t),
                    0.9 * std::pow(t, 1.5) * std::exp(-0.9 * std::pow(t, 2.5) / 2.5), 1e-15);
}

TEST(Families, ErlangSurvivalFromPartialSums) {
    // survival(t) = e^{-t}(1 + t) for shape 2, rate 1
    const auto dist = jtel::build(jtel::Erlang{1.0, 2});
    EXPECT_NEAR(dist.survival(1.0), 2.0 * std::exp(-1.0), 1e-14);
    EXPECT_NEAR(dist.survival(1.0), 0.7357588823428846, 1e-13);
    EXPECT_NEAR(dist.survival(3.0), 4.0 * std::exp(-3.0), 1e-14);
}

// =============================================================================
// Law invariants
// =============================================================================

TEST(Families, SurvivalPlusCdfIsOne) {
    for (const auto& family : catalog()) {
        const auto dist = jtel::build(family);
        for (double t : interior_grid(dist))
            EXPECT_NEAR(dist.survival(t) + dist.cdf(t), 1.0, 1e-12)
                << jtel::family_name(family) << " at t = " << t;
    }
}

TEST(Families, SurvivalStartsAtOneAndDecreases) {
    for (const auto& family : catalog()) {
        const auto dist = jtel::build(family);
        EXPECT_DOUBLE_EQ(dist.survival(0.0), 1.0) << jtel::family_name(family);
        double prev = 1.0;
        for (double t : interior_grid(dist)) {
            const double s = dist.survival(t);
            EXPECT_LE(s, prev + 1e-15) << jtel::family_name(family) << " at t = " << t;
            prev = s;
        }
    }
}

TEST(Families, DensityIntegratesToOne) {
    for (const auto& family : catalog()) {
        const auto dist = jtel::build(family);
        const double mass = jtel::integrate_gl_tail(dist.density, dist.support_lower,
                                                    dist.truncation_point(), dist.scale_hint);
        EXPECT_NEAR(mass, 1.0, 1e-8) << jtel::family_name(family);
    }
}

TEST(Families, SamplerMatchesLawByKolmogorovSmirnov) {
    for (const auto& family : catalog()) {
        const auto dist = jtel::build(family);
        jtel::RandomStream rng(20240817);
        std::vector<double> samples(100000);
        for (auto& s : samples) s = dist.sample(rng);
        for (double s : samples) ASSERT_GE(s, 0.0);
        const double stat = oracle::ks_statistic(samples, dist.cdf);
        EXPECT_LT(stat, 0.01) << jtel::family_name(family);
    }
}

TEST(Families, HeavyTailSamplerTerminates) {
    // tail exponent below one: no mean, sampling must still work
    const auto dist = jtel::build(jtel::Pareto{0.5, 1.0});
    jtel::RandomStream rng(7);
    for (int k = 0; k < 10000; ++k) {
        const double s = dist.sample(rng);
        ASSERT_TRUE(std::isfinite(s));
        ASSERT_GE(s, 1.0);
    }
}

// =============================================================================
// Hazard ratios
// =============================================================================

TEST(Ratios, ExponentialIsConstant) {
    const auto ratio = jtel::martingale_ratio(jtel::Exponential{1.3});
    EXPECT_DOUBLE_EQ(ratio.value(0.0), -1.3);
    EXPECT_DOUBLE_EQ(ratio.value(7.0), -1.3);
}

TEST(Ratios, UniformBlowUpForm) {
    const auto ratio = jtel::martingale_ratio(jtel::Uniform{2.0});
    EXPECT_NEAR(ratio.value(1.0), -1.0, 1e-15);
    EXPECT_NEAR(ratio.value(1.5), -2.0, 1e-15);
    EXPECT_THROW(ratio.value(2.0), std::domain_error);
    EXPECT_THROW(ratio.value(2.5), std::domain_error);
}

TEST(Ratios, ErlangProportionAtPinnedPoint) {
    // shape 2, rate 1: r(t) = -t / (1 + t); r(1) = -1/2
    const auto ratio = jtel::martingale_ratio(jtel::Erlang{1.0, 2});
    EXPECT_NEAR(ratio.value(1.0), -0.5, 1e-14);
}

TEST(Ratios, MatchHazardOfTheBuiltLaw) {
    for (const auto& family : catalog()) {
        const auto dist = jtel::build(family);
        const auto ratio = jtel::martingale_ratio(family);
        for (double t : interior_grid(dist)) {
            const double expected = -dist.density(t) / dist.survival(t);
            EXPECT_NEAR(ratio.value(t), expected,
                        1e-9 * std::max(1.0, std::abs(expected)))
                << jtel::family_name(family) << " at t = " << t;
        }
    }
}

// =============================================================================
// Parameter domains
// =============================================================================

TEST(Families, ParameterDomainErrorsNameTheConstraint) {
    auto expect_message = [](const jtel::FamilySpec& family, const char* needle) {
        try {
            jtel::build(family);
            FAIL() << "expected a construction error";
        } catch (const std::invalid_argument& err) {
            EXPECT_NE(std::string(err.what()).find(needle), std::string::npos) << err.what();
        }
    };
    expect_message(jtel::Exponential{0.0}, "lambda > 0");
    expect_message(jtel::Erlang{1.0, 0}, "n >= 1");
    expect_message(jtel::WeibullType{1.0, -1.0}, "alpha > -1");
    expect_message(jtel::Pareto{2.0, 1.0}, "0 < lambda < 2");
    expect_message(jtel::Pareto{1.0, 0.0}, "b > 0");
    expect_message(jtel::Logistic{-1.0}, "lambda > 0");
    expect_message(jtel::HalfCauchy{0.0}, "a > 0");
    expect_message(jtel::Uniform{0.0}, "upper > 0");
}

}  // namespace
