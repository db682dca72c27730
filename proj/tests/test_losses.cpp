#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "depthvote/ddcv.hpp"
#include "depthvote/losses.hpp"
#include "doctest.h"
#include "grad_harness.hpp"
#include "oracles.hpp"

using namespace depthvote;
using namespace depthvote::loss;

namespace {

constexpr int kSize = 32;
using harness::grad_check;
using harness::kStep;
using harness::smooth_differences;
using harness::warp_smooth;

ImageBuffer random_image(int w, int h, int channels, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    ImageBuffer img(w, h, channels, 0.0);
    for (auto& v : img.data()) v = u(rng);
    return img;
}

// Smooth textured image: sums of sinusoids give well-conditioned slopes.
ImageBuffer smooth_image(int w, int h, int channels, double phase) {
    ImageBuffer img(w, h, channels, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img(x, y, c) = 0.5 + 0.3 * std::sin(0.7 * x + 0.3 * y + phase + c) + 0.15 * std::cos(1.3 * x - 0.2 * y);
    return img;
}

ImageBuffer ramp_image(int w, int h) {
    ImageBuffer img(w, h, 1, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img(x, y) = static_cast<double>(x) / w;
    return img;
}

ScalarMap random_disparity(std::mt19937& rng, double lo = 1.3, double hi = 6.7) {
    return oracle::random_map(kSize, kSize, lo, hi, rng);
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("warp examples") {
    const auto src = ramp_image(10, 4);
    const auto id = warp_horizontal(src, ScalarMap(10, 4, 0.0));
    CHECK(std::equal(id.image.data().begin(), id.image.data().end(), src.data().begin()));
    CHECK(std::all_of(id.visible.begin(), id.visible.end(), [](auto v) { return v == 1; }));

    const auto shifted = warp_horizontal(src, ScalarMap(10, 4, 1.0));
    for (int y = 0; y < 4; ++y) {
        CHECK_FALSE(shifted.visible[static_cast<std::size_t>(y) * 10]);
        for (int x = 1; x < 10; ++x) CHECK(shifted.image(x, y) == doctest::Approx((x - 1) / 10.0).epsilon(1e-15));
    }

    ScalarMap d(10, 4, 0.0);
    d(3, 2) = 3.5;
    CHECK_FALSE(warp_horizontal(src, d).visible[d.index(3, 2)]);
    d(3, 2) = -0.1;
    CHECK_THROWS_AS(warp_horizontal(src, d), InvalidInput);
}

TEST_CASE("warp slope is the negated derivative") {
    std::mt19937 rng(2);
    const auto src = smooth_image(kSize, kSize, 1, 0.0);
    const auto d = random_disparity(rng);
    const auto w = warp_horizontal(src, d);
    for (std::size_t i = 0; i < d.size(); i += 7) {
        if (!warp_smooth(d, i)) continue;
        auto dp = d, dm = d;
        dp.values()[i] += kStep;
        dm.values()[i] -= kStep;
        const double num = (warp_horizontal(src, dp).image.data()[i] - warp_horizontal(src, dm).image.data()[i]) /
                           (2 * kStep);
        CHECK(-w.slope[i] == doctest::Approx(num).epsilon(1e-9));
    }
}

TEST_CASE("photometric examples") {
    const auto img = smooth_image(12, 9, 3, 0.4);
    CHECK(photometric_loss(img, img, ScalarMap(12, 9, 0.0)) == 0.0);

    const ImageBuffer black(6, 5, 1, 0.0), white(6, 5, 1, 1.0);
    const double c1 = 0.01 * 0.01;
    const double ssim = c1 / (1.0 + c1);  // constant windows: only the luminance term survives
    CHECK(photometric_loss(black, white, ScalarMap(6, 5, 0.0)) ==
          doctest::Approx(0.85 * (1 - ssim) / 2 + 0.15).epsilon(1e-14));

    ScalarMap far(6, 5, 10.0);
    CHECK_THROWS_AS(photometric_loss(black, white, far), InvalidInput);
}

TEST_CASE("photometric gradient") {
    std::mt19937 rng(41);
    for (int channels : {1, 3}) {
        const auto left = random_image(kSize, kSize, channels, rng);
        const auto right = smooth_image(kSize, kSize, channels, 1.1);
        const auto d = random_disparity(rng);
        const auto warped = warp_horizontal(right, d);
        const auto f = [&](const ScalarMap& m, std::span<double> g) { return photometric_loss(left, right, m, g); };
        const auto usable = [&](std::size_t i) {
            if (!warp_smooth(d, i)) return false;
            for (int c = 0; c < channels; ++c) {
                const std::size_t k = i * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c);
                if (std::abs(left.data()[k] - warped.image.data()[k]) < 1e-3) return false;
            }
            return true;
        };
        const auto r = grad_check(f, d, usable, rng);
        CHECK(r.checked >= 100);
        CHECK(r.max_rel < 1e-4);
    }
}

TEST_CASE("lrc examples") {
    const ScalarMap c(8, 3, 2.5);
    CHECK(lrc_loss(c, c) == 0.0);

    // Only pixel (2,0) counts; it samples the right map at x = 0.
    ScalarMap d(3, 1, std::vector<double>{1, 1, 2});
    d.set_valid(0, false);
    d.set_valid(1, false);
    const ScalarMap dr(3, 1, std::vector<double>{4, 9, 9});
    CHECK(lrc_loss(d, dr) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("lrc gradient") {
    std::mt19937 rng(43);
    const auto d = random_disparity(rng);
    const auto dr = oracle::random_map(kSize, kSize, 0.5, 9.0, rng);
    const auto wr = warp_horizontal(dr, d);
    const auto f = [&](const ScalarMap& m, std::span<double> g) { return lrc_loss(m, dr, g); };
    const auto usable = [&](std::size_t i) {
        return warp_smooth(d, i) && std::abs(d.values()[i] - wr.map.values()[i]) > 1e-3;
    };
    const auto r = grad_check(f, d, usable, rng);
    CHECK(r.checked >= 100);
    CHECK(r.max_rel < 1e-4);
}

TEST_CASE("select_references examples") {
    LdrParams p;
    p.k = 3;
    p.spec = {3, 1};
    const auto uniform = select_references(ScalarMap(5, 5, 0.5), p);
    const auto r = uniform.of(uniform.width * 2 + 2);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == 6);
    CHECK(r[1] == 7);
    CHECK(r[2] == 8);

    ScalarMap conf(5, 5, 0.0);
    conf(3, 3) = 1.0;
    p.k = 1;
    const auto one = select_references(conf, p);
    REQUIRE(one.of(12).size() == 1);
    CHECK(one.of(12)[0] == 18);

    p.k = 8;
    const auto border = select_references(ScalarMap(5, 5, 0.5), p);
    CHECK(border.of(0).size() == 3);

    ScalarMap holes(5, 5, 0.5);
    holes.set_valid(static_cast<std::size_t>(6), false);
    CHECK(select_references(holes, p).of(12).size() == 7);
}

TEST_CASE("select_references matches brute-force top-k") {
    std::mt19937 rng(47);
    std::uniform_int_distribution<int> level(0, 4);
    ScalarMap conf(23, 19, 0.0);
    for (auto& v : conf.values()) v = level(rng) / 4.0;  // many ties
    for (std::size_t i = 0; i < conf.size(); i += 9) conf.set_valid(i, false);
    for (int k : {1, 4, 8, 16}) {
        LdrParams p;
        p.k = k;
        const auto refs = select_references(conf, p);
        for (int y = 0; y < conf.height(); ++y) {
            for (int x = 0; x < conf.width(); ++x) {
                std::vector<std::pair<double, int>> cand;
                for (auto q : oracle::neighbors(x, y, p.spec.window, p.spec.dilation, conf.width(), conf.height())) {
                    if (!conf.valid(q.x, q.y)) continue;
                    cand.push_back({-conf(q.x, q.y), static_cast<int>(conf.index(q.x, q.y))});
                }
                std::sort(cand.begin(), cand.end());
                const auto got = refs.of(conf.index(x, y));
                REQUIRE(got.size() == std::min<std::size_t>(cand.size(), static_cast<std::size_t>(k)));
                for (std::size_t j = 0; j < got.size(); ++j) CHECK(got[j] == cand[j].second);
            }
        }
    }
}

TEST_CASE("ldr examples") {
    std::mt19937 rng(53);
    const auto d = random_disparity(rng);
    const auto refs = select_references(oracle::random_map(kSize, kSize, 0, 1, rng), LdrParams{});
    CHECK(ldr_loss(d, d, refs) == 0.0);

    LdrParams p;
    p.k = 1;
    p.spec = {3, 1};
    const ScalarMap d2(2, 1, std::vector<double>{0.0, std::numbers::e - 1.0});
    const ScalarMap t2(2, 1, std::vector<double>{1.0, 0.0});
    const auto r2 = select_references(ScalarMap(2, 1, 1.0), p);
    CHECK(ldr_loss(d2, t2, r2) == doctest::Approx(1.0).epsilon(1e-15));

    // A zero disparity gap passes the ranking check, so nothing is charged.
    const ScalarMap d3(2, 1, std::vector<double>{1.0, 1.0});
    CHECK(ldr_loss(d3, t2, r2) == 0.0);
}

TEST_CASE("ldr gradient") {
    std::mt19937 rng(59);
    const auto d = oracle::random_map(kSize, kSize, 0.5, 12, rng);
    auto t = d.transform([](double v) { return std::log1p(v); });
    std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
    for (int i = 0; i < 300; ++i) t.values()[pick(rng)] += 1.5;  // ranking flips
    const auto conf = ddcv::confidence_map(d, t);
    const auto refs = select_references(conf, LdrParams{});

    // Kink exclusion: every pair touching pixel j keeps |ΔD̃·ΔD| > 1e-3.
    std::vector<std::uint8_t> kink(d.size(), 0);
    for (std::size_t p = 0; p < d.size(); ++p) {
        for (auto r : refs.of(p)) {
            const auto rr = static_cast<std::size_t>(r);
            const double prod = (t.values()[p] - t.values()[rr]) * (d.values()[p] - d.values()[rr]);
            if (std::abs(prod) <= 1e-3) kink[p] = kink[rr] = 1;
        }
    }
    const auto f = [&](const ScalarMap& m, std::span<double> g) { return ldr_loss(m, t, refs, g); };
    const auto r = grad_check(f, d, [&](std::size_t i) { return kink[i] == 0; }, rng);
    CHECK(r.checked >= 100);
    CHECK(r.max_rel < 1e-4);
    CHECK(f(d, {}) > 0.0);
}

TEST_CASE("property: ldr monotone in inconsistent disparity gap") {
    LdrParams p;
    p.k = 1;
    p.spec = {3, 1};
    const ScalarMap t(2, 1, std::vector<double>{1.0, 0.0});
    const auto refs = select_references(ScalarMap(2, 1, 1.0), p);
    double previous = -1.0;
    for (double gap = 0.1; gap < 50; gap *= 1.7) {
        const ScalarMap d(2, 1, std::vector<double>{0.0, gap});
        const double v = ldr_loss(d, t, refs);
        CHECK(v >= previous);
        previous = v;
    }
}

TEST_CASE("smoothness examples") {
    ScalarMap ramp(9, 6, 0.0);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 9; ++x) ramp(x, y) = x;
    const ImageBuffer flat_img(9, 6, 1, 0.3);
    const ScalarMap flat(9, 6, 2.0);
    CHECK(smoothness_image(flat, flat_img) == 0.0);
    CHECK(smoothness_image(ramp, flat_img) == 1.0);
    CHECK(smoothness_depth(flat, ramp) == 0.0);
    CHECK(smoothness_depth(ramp, flat) == 1.0);
    CHECK(dds_loss(flat, flat) == 0.0);
    CHECK(dds_loss(flat, ramp) == 1.0);
}

TEST_CASE("smoothness and dds gradients") {
    std::mt19937 rng(61);
    const auto d = random_disparity(rng, 0.0, 4.0);
    const auto t = oracle::random_map(kSize, kSize, 0.0, 4.0, rng);
    const auto img = random_image(kSize, kSize, 3, rng);
    const auto usable = [&](std::size_t i) { return smooth_differences(d, i); };

    SUBCASE("image guided") {
        const auto r = grad_check([&](const ScalarMap& m, std::span<double> g) { return smoothness_image(m, img, g); },
                                  d, usable, rng);
        CHECK(r.checked >= 100);
        CHECK(r.max_rel < 1e-4);
    }
    SUBCASE("depth guided") {
        const auto r = grad_check([&](const ScalarMap& m, std::span<double> g) { return smoothness_depth(m, t, g); },
                                  d, usable, rng);
        CHECK(r.checked >= 100);
        CHECK(r.max_rel < 1e-4);
    }
    SUBCASE("dual") {
        const auto r =
            grad_check([&](const ScalarMap& m, std::span<double> g) { return dds_loss(m, t, g); }, d, usable, rng);
        CHECK(r.checked >= 100);
        CHECK(r.max_rel < 1e-4);
    }
}

TEST_CASE("hybrid loss") {
    std::mt19937 rng(67);
    const auto left = random_image(kSize, kSize, 1, rng);
    const auto right = smooth_image(kSize, kSize, 1, 0.2);
    const auto d = random_disparity(rng);
    const auto dr = oracle::random_map(kSize, kSize, 0.5, 9.0, rng);
    const auto t = oracle::random_map(kSize, kSize, 0.0, 5.0, rng);
    const auto conf = oracle::random_map(kSize, kSize, 0.0, 1.0, rng);
    const LossInputs in{&left, &right, &d, &dr, &t, &conf};

    const auto zero = hybrid_loss(in, {0, 0, 0}, LdrParams{});
    CHECK(zero.total == zero.photometric);

    const auto rep = hybrid_loss(in, {}, LdrParams{}, true);
    const double a = photometric_loss(left, right, d);
    const double b = lrc_loss(d, dr);
    const double c = ldr_loss(d, t, select_references(conf, LdrParams{}));
    const double e = dds_loss(d, t);
    CHECK(rep.photometric == a);
    CHECK(rep.lrc == b);
    CHECK(rep.ldr == c);
    CHECK(rep.dds == e);
    CHECK(rep.total == a + 0.1 * b + 0.1 * c + 0.1 * e);

    // Gradient linearity.
    std::vector<double> ga(d.size()), gb(d.size()), gc(d.size()), ge(d.size());
    photometric_loss(left, right, d, ga);
    lrc_loss(d, dr, gb);
    ldr_loss(d, t, select_references(conf, LdrParams{}), gc);
    dds_loss(d, t, ge);
    REQUIRE(rep.grad.has_value());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(rep.grad->values()[i] == ga[i] + 0.1 * gb[i] + 0.1 * gc[i] + 0.1 * ge[i]);
    }

    // Mean normalisation: doubling every weight doubles (total - photometric).
    const auto twice = hybrid_loss(in, {0.2, 0.2, 0.2}, LdrParams{});
    CHECK(twice.total - twice.photometric == doctest::Approx(2 * (rep.total - rep.photometric)).epsilon(1e-14));

    const LossInputs missing{&left, &right, &d, nullptr, nullptr, nullptr};
    CHECK_THROWS_AS(hybrid_loss(missing, {}, LdrParams{}), std::invalid_argument);
    CHECK_NOTHROW(hybrid_loss(missing, {0, 0, 0}, LdrParams{}));
}

TEST_CASE("property: every term is non-negative") {
    std::mt19937 rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        const auto left = random_image(16, 12, 1, rng);
        const auto right = random_image(16, 12, 1, rng);
        const auto d = oracle::random_map(16, 12, 0.0, 5.0, rng);
        const auto dr = oracle::random_map(16, 12, 0.2, 5.0, rng);
        const auto t = oracle::random_map(16, 12, -3.0, 3.0, rng);
        const auto refs = select_references(oracle::random_map(16, 12, 0, 1, rng), LdrParams{});
        CHECK(photometric_loss(left, right, d) >= 0.0);
        CHECK(lrc_loss(d, dr) >= 0.0);
        CHECK(ldr_loss(d, t, refs) >= 0.0);
        CHECK(smoothness_image(d, left) >= 0.0);
        CHECK(smoothness_depth(d, t) >= 0.0);
        CHECK(dds_loss(d, t) >= 0.0);
    }
}

}  // TEST_SUITE
