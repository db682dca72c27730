#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "depthvote/core.hpp"

namespace depthvote::synth {

enum class Layout { planar_ramp, piecewise_planar, step_edge };
enum class Texture { flat, sinusoidal, noise, textureless_band };
enum class TransformKind { affine, power };
enum class CorruptionKind { none, salt, region };

Layout parse_layout(std::string_view name);
Texture parse_texture(std::string_view name);
TransformKind parse_transform(std::string_view name);
CorruptionKind parse_corruption(std::string_view name);
std::string_view to_string(Layout v);
std::string_view to_string(Texture v);
std::string_view to_string(TransformKind v);
std::string_view to_string(CorruptionKind v);

/// Monotone map from disparity to relative depth.
struct DepthTransform {
    TransformKind kind = TransformKind::affine;
    double scale = 1.0;     ///< affine slope (> 0)
    double offset = 0.0;    ///< affine intercept
    double exponent = 1.5;  ///< power law exponent (> 0)

    double operator()(double disparity) const;
};

struct Rect {
    int x = 0;
    int y = 0;
    int width = 0;   ///< 0 picks a random rectangle
    int height = 0;
};

struct Corruption {
    CorruptionKind kind = CorruptionKind::none;
    double fraction = 0.05;  ///< salt: share of pixels perturbed
    double magnitude = 20.0;
    Rect region;
};

struct SceneSpec {
    int width = 128;
    int height = 128;
    int channels = 1;
    Layout layout = Layout::piecewise_planar;
    int boxes = 4;  ///< foreground boxes for piecewise_planar
    Texture texture = Texture::sinusoidal;
    DepthTransform depth_transform{};
    Corruption corruption{};
    std::uint32_t seed = 1;

    void validate() const;
};

/// A generated stereo tuple. The right view is the textured reference; the
/// left image is the right image resampled at x - D_gt(x), so warping the
/// right image with D_gt reproduces it exactly wherever the sample is in view.
/// `right_disparity` is the matching right-view disparity; wherever the left
/// pixel is not occluded, D_gt is a fixed point of warping it.
struct Scene {
    ImageBuffer left;
    ImageBuffer right;
    ScalarMap disparity_gt;
    ScalarMap disparity_est;  ///< D_gt plus corruption
    ScalarMap right_disparity;
    ScalarMap depth;          ///< depth_transform(D_gt)
    ScalarMap corruption;     ///< 1 at perturbed pixels, 0 elsewhere
    std::size_t corrupted_count = 0;
};

/// Smallest disparity a corruption may leave behind.
inline constexpr double kDisparityFloor = 0.5;

/// Deterministic for a fixed spec: identical specs give bit-identical scenes.
Scene generate(const SceneSpec& spec);

/// Seeded uniform source shared by every randomised stage of `generate`.
/// Park-Miller "minimal standard" LCG (x <- 48271·x mod 2^31-1, as
/// std::minstd_rand) mapped to [0,1] by (x - 1) / (2^31 - 3).
class UniformSource {
public:
    explicit UniformSource(std::uint32_t seed);
    double next();
    double range(double lo, double hi) { return lo + (hi - lo) * next(); }
    /// Integer in [0, n).
    std::size_t below(std::size_t n);

private:
    std::minstd_rand engine_;
};

}  // namespace depthvote::synth
