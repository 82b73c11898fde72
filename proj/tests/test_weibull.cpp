#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "maskaudit/errors.hpp"
#include "maskaudit/weibull.hpp"
#include "support/evt_gen.hpp"

using namespace maskaudit;

TEST_CASE("recovers the location of a well-specified sample") {
    // (a, b, c) = (2, 1, 5), n = 2000: the location estimate should land
    // close to 2 and reproduce exactly across runs
    struct Frozen {
        std::uint64_t seed;
        double location;
    };
    const Frozen cases[] = {
        {77, 2.0542547187385081},
        {78, 2.0242024664825689},
        {79, 1.9939346853514772},
    };
    for (const auto& fc : cases) {
        const auto xs = testgen::reverse_weibull_sample(2.0, 1.0, 5.0, 2000, fc.seed);
        const auto fit = evt::fit_reverse_weibull(xs);
        CHECK_FALSE(fit.degenerate);
        CHECK(fit.location == doctest::Approx(fc.location).epsilon(1e-9));
        CHECK(fit.location > 1.8);
        CHECK(fit.location < 2.2);
        CHECK(fit.location >= *std::max_element(xs.begin(), xs.end()));
        // the fitted optimum is at least as likely as the generating truth
        CHECK(fit.loglik >= testgen::reverse_weibull_loglik(xs, 2.0, 1.0, 5.0));
    }
}

TEST_CASE("frozen fit reproduces scale, shape, and likelihood") {
    const auto xs = testgen::reverse_weibull_sample(2.0, 1.0, 5.0, 2000, 77);
    const auto fit = evt::fit_reverse_weibull(xs);
    CHECK(fit.scale == doctest::Approx(1.0690967690004021).epsilon(1e-9));
    CHECK(fit.shape == doctest::Approx(5.3607382088307585).epsilon(1e-9));
    CHECK(fit.loglik == doctest::Approx(285.77157692283208).epsilon(1e-9));
}

TEST_CASE("location stays near truth across many seeds") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        const auto xs = testgen::reverse_weibull_sample(2.0, 1.0, 5.0, 500, seed);
        const auto fit = evt::fit_reverse_weibull(xs);
        CHECK_FALSE(fit.degenerate);
        CHECK(fit.location > 1.7);
        CHECK(fit.location < 2.3);
        CHECK(fit.location >= *std::max_element(xs.begin(), xs.end()));
        CHECK(std::isfinite(fit.loglik));
    }
}

TEST_CASE("all-equal samples collapse to that value") {
    const std::vector<double> same(50, 3.7);
    const auto fit = evt::fit_reverse_weibull(same);
    CHECK(fit.degenerate);
    CHECK(fit.location == 3.7);

    const std::vector<double> zeros(12, 0.0);
    const auto zfit = evt::fit_reverse_weibull(zeros);
    CHECK(zfit.degenerate);
    CHECK(zfit.location == 0.0);
}

TEST_CASE("samples dominated by an atom at the minimum collapse to it") {
    // 5 of 7 values tie the minimum: the atom is the location, and a
    // continuous fit over the two stray upper values would be meaningless
    const std::vector<double> atom = {1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0};
    const auto fit = evt::fit_reverse_weibull(atom);
    CHECK(fit.degenerate);
    CHECK(fit.location == 1.0);
}

TEST_CASE("an exact half at the minimum does not collapse") {
    const std::vector<double> half = {1.0, 1.0, 1.0, 2.0, 2.0, 2.0};
    const auto fit = evt::fit_reverse_weibull(half);
    CHECK_FALSE(fit.degenerate);
    CHECK(fit.location >= 2.0);
}

TEST_CASE("heavy-left-tail samples pin the shape at the constraint") {
    // true shape c = 0.5 < 1: the unconstrained MLE would run off to the
    // unbounded-likelihood region, so the fit clamps c at 1
    for (std::uint64_t seed : {55ULL, 56ULL}) {
        const auto xs = testgen::reverse_weibull_sample(1.0, 1.0, 0.5, 300, seed);
        const auto fit = evt::fit_reverse_weibull(xs);
        CHECK_FALSE(fit.degenerate);
        CHECK(fit.shape == 1.0);
        const double top = *std::max_element(xs.begin(), xs.end());
        CHECK(fit.location >= top);
        CHECK(fit.location < 1.001);
    }
    const auto xs = testgen::reverse_weibull_sample(1.0, 1.0, 0.5, 300, 55);
    const auto fit = evt::fit_reverse_weibull(xs);
    CHECK(fit.location == doctest::Approx(1.0000214332083004).epsilon(1e-6));
}

TEST_CASE("input validation") {
    const std::vector<double> four = {1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(evt::fit_reverse_weibull(four), ArgumentError);
    std::vector<double> bad = {1.0, 2.0, 3.0, 4.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(evt::fit_reverse_weibull(bad), ArgumentError);
    bad.back() = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(evt::fit_reverse_weibull(bad), ArgumentError);
}
