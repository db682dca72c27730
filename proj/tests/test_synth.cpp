#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "depthvote/ddcv.hpp"
#include "depthvote/losses.hpp"
#include "depthvote/synth.hpp"
#include "doctest.h"

using namespace depthvote;
using namespace depthvote::synth;

namespace {

bool identical(const ScalarMap& a, const ScalarMap& b) {
    return a.same_shape(b) && std::equal(a.values().begin(), a.values().end(), b.values().begin()) &&
           std::equal(a.mask().begin(), a.mask().end(), b.mask().begin());
}

bool identical(const ImageBuffer& a, const ImageBuffer& b) {
    return a.same_shape(b) && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("uniform source follows the minimal standard recurrence") {
    UniformSource src(1);
    std::uint64_t state = 1;
    for (int i = 0; i < 1000; ++i) {
        state = (state * 48271u) % 2147483647u;
        CHECK(src.next() == static_cast<double>(state - 1) / 2147483645.0);
    }
}

TEST_CASE("corruption none leaves the estimate untouched") {
    SceneSpec spec;
    spec.width = 48;
    spec.height = 32;
    const auto s = generate(spec);
    CHECK(identical(s.disparity_est, s.disparity_gt));
    CHECK(s.corrupted_count == 0);
    for (double v : s.corruption.values()) CHECK(v == 0.0);
}

TEST_CASE("salt corruption marks exactly round(f*W*H) pixels") {
    SceneSpec spec;
    spec.corruption.kind = CorruptionKind::salt;
    spec.corruption.magnitude = 20.0;
    for (std::uint32_t seed = 1; seed <= 5; ++seed) {
        spec.seed = seed;
        const auto s = generate(spec);
        CHECK(s.corrupted_count == static_cast<std::size_t>(std::llround(0.05 * 128 * 128)));
        for (std::size_t i = 0; i < s.corruption.size(); ++i) {
            const bool marked = s.corruption.values()[i] == 1.0;
            const bool changed = s.disparity_est.values()[i] != s.disparity_gt.values()[i];
            CHECK(marked == changed);
            CHECK(s.disparity_est.values()[i] >= kDisparityFloor);
        }
    }
}

TEST_CASE("region corruption offsets a rectangle") {
    SceneSpec spec;
    spec.width = spec.height = 40;
    spec.corruption.kind = CorruptionKind::region;
    spec.corruption.magnitude = 7.0;
    spec.corruption.region = {5, 6, 10, 4};
    const auto s = generate(spec);
    CHECK(s.corrupted_count == 40);
    CHECK(s.disparity_est(5, 6) == s.disparity_gt(5, 6) + 7.0);
    CHECK(s.disparity_est(15, 6) == s.disparity_gt(15, 6));
}

TEST_CASE("invariants over layouts and textures") {
    for (auto layout : {Layout::planar_ramp, Layout::piecewise_planar, Layout::step_edge}) {
        for (auto texture : {Texture::flat, Texture::sinusoidal, Texture::noise, Texture::textureless_band}) {
            SceneSpec spec;
            spec.width = 64;
            spec.height = 40;
            spec.layout = layout;
            spec.texture = texture;
            spec.channels = texture == Texture::noise ? 3 : 1;
            spec.depth_transform.kind = TransformKind::power;
            const auto s = generate(spec);
            for (std::size_t i = 0; i < s.disparity_gt.size(); ++i) {
                CHECK(s.disparity_gt.values()[i] > 0.0);
                CHECK(s.right_disparity.values()[i] > 0.0);
                CHECK(s.depth.values()[i] == std::pow(s.disparity_gt.values()[i], 1.5));
            }
            // Ordering agreement between disparity and relative depth.
            const auto d = s.disparity_gt.values();
            const auto t = s.depth.values();
            for (std::size_t i = 1; i < d.size(); ++i) CHECK((d[i] - d[i - 1]) * (t[i] - t[i - 1]) >= 0.0);
        }
    }
}

TEST_CASE("reproducibility") {
    SceneSpec spec;
    spec.texture = Texture::noise;
    spec.corruption.kind = CorruptionKind::salt;
    spec.seed = 99;
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(identical(a.left, b.left));
    CHECK(identical(a.right, b.right));
    CHECK(identical(a.disparity_gt, b.disparity_gt));
    CHECK(identical(a.disparity_est, b.disparity_est));
    CHECK(identical(a.depth, b.depth));
    CHECK(identical(a.corruption, b.corruption));
    spec.seed = 100;
    CHECK_FALSE(identical(generate(spec).disparity_gt, a.disparity_gt));
}

TEST_CASE("affine depth gives unit confidence") {
    SceneSpec spec;
    spec.depth_transform = {TransformKind::affine, 0.3, 2.0};
    const auto s = generate(spec);
    const auto c = ddcv::confidence_map(s.disparity_est, s.depth);
    for (double v : c.values()) CHECK(v == 1.0);
}

TEST_CASE("photometric sanity and fixed points") {
    for (auto layout : {Layout::planar_ramp, Layout::piecewise_planar, Layout::step_edge}) {
        SceneSpec spec;
        spec.layout = layout;
        spec.width = 96;
        spec.height = 64;
        const auto s = generate(spec);
        const double at_gt = loss::photometric_loss(s.left, s.right, s.disparity_gt);
        CHECK(at_gt < 1e-6);
        CHECK(at_gt < loss::photometric_loss(s.left, s.right, s.disparity_gt.affine(1.0, 2.0)));
        // Boxes hide part of the background from the right view; only the
        // occlusion-free layouts are exact fixed points everywhere.
        if (layout != Layout::piecewise_planar) CHECK(loss::lrc_loss(s.disparity_gt, s.right_disparity) == 0.0);
    }
}

TEST_CASE("spec validation and names") {
    SceneSpec spec;
    spec.width = 4;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    CHECK(parse_layout("step-edge") == Layout::step_edge);
    CHECK(to_string(Texture::textureless_band) == "texture-less-band");
    try {
        parse_layout("spiral");
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("planar-ramp") != std::string::npos);
        CHECK(msg.find("piecewise-planar") != std::string::npos);
        CHECK(msg.find("step-edge") != std::string::npos);
    }
}

}  // TEST_SUITE
