#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "depthvote/ddcv.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace depthvote;
using namespace depthvote::ddcv;

namespace {

ScalarMap ramp(int w, int h, double gx, double gy, double base) {
    ScalarMap m(w, h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m(x, y) = base + gx * x + gy * y;
    return m;
}

void check_against_oracle(const ScalarMap& d, const ScalarMap& t, const DdcvParams& params) {
    const double gamma = global_scale(d, t, params.spec);
    CHECK(gamma == doctest::Approx(oracle::global_scale(d, t, params.spec.window, params.spec.dilation)).epsilon(1e-12));
    const auto got = confidence_map(d, t, params);
    const auto want = oracle::confidence(d, t, params.spec.window, params.spec.dilation, params.sigma,
                                         params.stable_disparity_threshold, gamma);
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (std::isnan(want[i])) {
            CHECK_FALSE(got.valid(i));
            CHECK(got.values()[i] == 0.0);
        } else {
            REQUIRE(got.valid(i));
            CHECK(got.values()[i] == want[i]);
        }
    }
}

}  // namespace

TEST_SUITE("ddcv") {

TEST_CASE("global_scale examples") {
    std::mt19937 rng(3);
    const auto d = oracle::random_map(16, 16, 1, 40, rng);
    CHECK(global_scale(d, d.affine(3.0, 7.0), {11, 1}) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(global_scale(d, d, {11, 1}) == doctest::Approx(1.0).epsilon(1e-15));
    const ScalarMap flat(16, 16, 4.0);
    CHECK_THROWS_AS(global_scale(flat, d, {11, 1}), DegenerateInput);
    CHECK_THROWS_AS(global_scale(d, ScalarMap(15, 16, 1.0), {11, 1}), ShapeMismatch);
}

TEST_CASE("vote_rc examples") {
    CHECK(vote_rc(2, 0.5) == 1);
    CHECK(vote_rc(2, -0.5) == 0);
    CHECK(vote_rc(0, -0.5) == 1);
}

TEST_CASE("vote_vc prose examples") {
    const DdcvParams p;
    CHECK(vote_vc(0, 5, 1, p) == 0);
    CHECK(vote_vc(5, 0.1, 1, p) == 0);
    CHECK(vote_vc(10, 1.5, 1, p) == 1);
}

TEST_CASE("vote_vc literal example and mode disagreement") {
    DdcvParams lit;
    lit.mode = FormulaMode::literal;
    CHECK(vote_vc(0, 0, 1, lit) == 0);
    CHECK(oracle::vc_literal(0, 0, 1, 2) == 0);

    // The two prose counterexamples vote the other way when read literally.
    const DdcvParams prose;
    CHECK(vote_vc(0, 5, 1, prose) != vote_vc(0, 5, 1, lit));
    CHECK(vote_vc(5, 0.1, 1, prose) != vote_vc(5, 0.1, 1, lit));
}

TEST_CASE("property: vote_vc agrees with oracles on random inputs") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-12, 12);
    std::uniform_real_distribution<double> g(0.1, 4);
    DdcvParams lit;
    lit.mode = FormulaMode::literal;
    for (int i = 0; i < 20000; ++i) {
        const double dd = u(rng), dt = u(rng), gamma = g(rng);
        CHECK(vote_vc(dd, dt, gamma, DdcvParams{}) == oracle::vc_prose(dd, dt, gamma, 2.0, 1.0));
        CHECK(vote_vc(dd, dt, gamma, lit) == oracle::vc_literal(dd, dt, gamma, 2.0));
    }
}

TEST_CASE("vote combines rc and vc") {
    // p=(0,0), q=(1,0); table over rc/vc combinations.
    const DdcvParams p;
    ScalarMap d(2, 1, std::vector<double>{3, 1});
    ScalarMap t(2, 1, std::vector<double>{3, 1});
    CHECK(vote({0, 0}, {1, 0}, d, t, 1.0, p) == 1);  // rc=1, vc=1
    t(0, 0) = -1.0;                                   // dt=-2, dd=2
    CHECK(vote_vc(2, -2, 1.0, p) == 1);
    CHECK(vote({0, 0}, {1, 0}, d, t, 1.0, p) == 0);  // rc=0, vc=1
    d(0, 0) = 1.5;
    t(0, 0) = 6.0;                                    // dd=0.5, dt=5
    CHECK(vote_rc(0.5, 5) == 1);
    CHECK(vote({0, 0}, {1, 0}, d, t, 1.0, p) == 0);  // rc=1, vc=0
}

TEST_CASE("confidence equals brute-force oracle") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 6; ++trial) {
        auto d = oracle::random_map(21, 17, 0, 30, rng);
        auto t = d.transform([](double v) { return std::sqrt(v); });
        // Perturb some depth values so that votes are mixed.
        std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
        for (int i = 0; i < 40; ++i) t.values()[pick(rng)] += 3.0;
        for (int i = 0; i < 15; ++i) d.set_valid(pick(rng), false);
        for (int i = 0; i < 10; ++i) t.set_valid(pick(rng), false);
        DdcvParams params;
        params.spec = {trial % 2 ? 5 : 11, 1 + trial % 3};
        check_against_oracle(d, t, params);
    }
}

TEST_CASE("confidence equals brute-force oracle on wide maps") {
    // Wide enough that most columns run through the vector kernels.
    std::mt19937 rng(71);
    for (int trial = 0; trial < 4; ++trial) {
        auto d = oracle::random_map(67, 29, 0, 30, rng);
        auto t = d.transform([](double v) { return std::cbrt(v); });
        std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
        for (int i = 0; i < 150; ++i) t.values()[pick(rng)] += 2.0;
        if (trial >= 2) {
            for (int i = 0; i < 40; ++i) d.set_valid(pick(rng), false);
            t.values()[pick(rng)] = std::numeric_limits<double>::quiet_NaN();
        }
        DdcvParams params;
        params.spec = {trial % 2 ? 5 : 11, 1 + trial % 2};
        check_against_oracle(d, t, params);
    }
}

TEST_CASE("literal mode equals a brute-force sum of vote()") {
    std::mt19937 rng(73);
    auto d = oracle::random_map(45, 23, 0, 6, rng);
    auto t = oracle::random_map(45, 23, 0, 6, rng);
    d.set_valid(100, false);
    DdcvParams params;
    params.mode = FormulaMode::literal;
    params.spec = {7, 1};
    const double gamma = global_scale(d, t, params.spec);
    const auto c = confidence_map(d, t, params);
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!d.valid(x, y)) {
                CHECK_FALSE(c.valid(x, y));
                continue;
            }
            int votes = 0;
            int count = 0;
            for (const Pixel q : neighborhood({x, y}, params.spec, d.width(), d.height())) {
                if (!d.valid(q.x, q.y)) continue;
                votes += vote({x, y}, q, d, t, gamma, params);
                ++count;
            }
            REQUIRE(c.valid(x, y));
            CHECK(c(x, y) == static_cast<double>(votes) / count);
        }
    }
}

TEST_CASE("portable and wide kernels agree bit for bit") {
    std::mt19937 rng(79);
    auto d = oracle::random_map(83, 37, 0, 20, rng);
    auto t = d.transform([](double v) { return std::log1p(v); });
    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    for (int i = 0; i < 200; ++i) t.values()[pick(rng)] += 1.0;
    auto masked = d;
    for (int i = 0; i < 60; ++i) masked.set_valid(pick(rng), false);
    for (const auto mode : {FormulaMode::prose, FormulaMode::literal}) {
        for (const ScalarMap* disp : {&d, &masked}) {
            DdcvParams params;
            params.mode = mode;
            const auto wide = confidence_map(*disp, t, params);
            const double g_wide = global_scale(*disp, t, params.spec);
            detail::force_portable_kernels(true);
            const auto portable = confidence_map(*disp, t, params);
            const double g_portable = global_scale(*disp, t, params.spec);
            detail::force_portable_kernels(false);
            CHECK(g_portable == doctest::Approx(g_wide).epsilon(1e-13));
            CHECK(std::equal(wide.values().begin(), wide.values().end(), portable.values().begin()));
            CHECK(std::equal(wide.mask().begin(), wide.mask().end(), portable.mask().begin()));
        }
    }
}

TEST_CASE("affine invariance on 16x16 random map") {
    std::mt19937 rng(23);
    const auto d = oracle::random_map(16, 16, 1, 50, rng);
    const auto c = confidence_map(d, d.affine(0.7, -4.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c.valid(i));
        CHECK(c.values()[i] == 1.0);
    }
}

TEST_CASE("corrupted pixel falls below the median") {
    auto d = ramp(16, 16, 1.0, 0.5, 2.0);
    const auto t = d;
    d(8, 8) += 50.0;
    const auto c = confidence_map(d, t);
    std::vector<double> vals(c.values().begin(), c.values().end());
    std::nth_element(vals.begin(), vals.begin() + static_cast<long>(vals.size() / 2), vals.end());
    const double median = vals[vals.size() / 2];
    CHECK(c(8, 8) < median);
}

TEST_CASE("all-invalid depth gives all-invalid confidence") {
    std::mt19937 rng(29);
    const auto d = oracle::random_map(12, 12, 1, 10, rng);
    auto t = d;
    for (std::size_t i = 0; i < t.size(); ++i) t.set_valid(i, false);
    const auto c = confidence_map_with_scale(d, t, 1.0, DdcvParams{});
    CHECK(c.valid_count() == 0);
    for (double v : c.values()) CHECK(v == 0.0);
    // γ cannot be estimated without valid pairs.
    CHECK_THROWS_AS(confidence_map(d, t), DegenerateInput);
}

TEST_CASE("params validation") {
    DdcvParams p;
    p.sigma = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.stable_disparity_threshold = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK(parse_formula_mode("literal") == FormulaMode::literal);
    CHECK_THROWS_AS(parse_formula_mode("bogus"), std::invalid_argument);
}

TEST_CASE("property: range and rational values") {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto d = oracle::random_map(20, 20, 0, 20, rng);
        const auto t = oracle::random_map(20, 20, 0, 20, rng);
        const auto c = confidence_map(d, t, DdcvParams{{5, 1}});
        for (std::size_t i = 0; i < c.size(); ++i) {
            const double v = c.values()[i];
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            const int x = static_cast<int>(i % 20), y = static_cast<int>(i / 20);
            const double m = static_cast<double>(neighborhood({x, y}, {5, 1}, 20, 20).size());
            CHECK(std::abs(v * m - std::round(v * m)) < 1e-9);
        }
    }
}

TEST_CASE("property: monotone corruption response") {
    const auto t = ramp(24, 24, 0.5, 0.25, 10.0);
    double previous = 2.0;
    for (double mag : {3.0, 5.0, 10.0, 20.0, 40.0, 80.0}) {
        auto d = t;
        d(12, 12) += mag;
        const auto c = confidence_map_with_scale(d, t, 1.0, DdcvParams{});
        CHECK(c(12, 12) <= previous);
        previous = c(12, 12);
    }
}

TEST_CASE("property: determinism across thread counts") {
    std::mt19937 rng(37);
    const auto d = oracle::random_map(97, 61, 0, 40, rng);
    const auto t = oracle::random_map(97, 61, 0, 40, rng);
    set_max_threads(1);
    const double g1 = global_scale(d, t, {11, 1});
    const auto c1 = confidence_map(d, t);
    for (unsigned threads : {2u, 3u, 8u}) {
        set_max_threads(threads);
        CHECK(global_scale(d, t, {11, 1}) == g1);
        const auto c = confidence_map(d, t);
        CHECK(std::equal(c.values().begin(), c.values().end(), c1.values().begin()));
        CHECK(std::equal(c.mask().begin(), c.mask().end(), c1.mask().begin()));
    }
    set_max_threads(0);
}

}  // TEST_SUITE
