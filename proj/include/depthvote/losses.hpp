#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "depthvote/core.hpp"

namespace depthvote::loss {

// Every loss below returns its value and, when `grad` is non-empty, overwrites
// grad (one entry per disparity pixel, row-major) with the derivative of the
// value with respect to the left disparity map. Pixels that do not contribute
// receive 0. Values are means over the pixels each term counts.

/// Right view resampled into the left view along scanlines.
///
/// `visible[i]` is 1 where the disparity is valid and the sample coordinate
/// x - D lies inside [0, width-1]. `slope` holds, per pixel and channel, the
/// horizontal derivative of the source at the sample coordinate, so the
/// derivative of the warped value with respect to D(p) is -slope.
struct WarpedImage {
    ImageBuffer image;
    std::vector<std::uint8_t> visible;
    std::vector<double> slope;
};

/// Same for a scalar map. The warped map is invalid wherever the pixel is not
/// visible or an interpolation tap is invalid in the source.
struct WarpedMap {
    ScalarMap map;
    std::vector<std::uint8_t> visible;
    std::vector<double> slope;
};

/// Linear interpolation along x at (x - D(p), y). Throws InvalidInput on a
/// negative or non-finite valid disparity.
WarpedImage warp_horizontal(const ImageBuffer& src, const ScalarMap& disparity);
WarpedMap warp_horizontal(const ScalarMap& src, const ScalarMap& disparity);

/// SSIM/L1 blend between the left image and the warped right image, averaged
/// over channels and over visible pixels. SSIM uses 3x3 windows restricted to
/// visible taps with C1 = 0.01^2, C2 = 0.03^2. Throws InvalidInput when no
/// pixel is visible.
double photometric_loss(const ImageBuffer& left, const ImageBuffer& right, const ScalarMap& disparity,
                        std::span<double> grad = {});

/// Mean of |D - D̂r| / (D + D̂r) where D̂r is the right disparity warped into
/// the left view by D. Throws InvalidInput on a nonpositive denominator.
double lrc_loss(const ScalarMap& disparity, const ScalarMap& right_disparity, std::span<double> grad = {});

struct LdrParams {
    int k = 8;
    NeighborhoodSpec spec{11, 2};

    void validate() const;
};

/// Per-pixel reference lists, at most k entries each, stored as flat indices.
struct References {
    int width = 0;
    int height = 0;
    int k = 0;
    std::vector<std::int32_t> index;  // width*height*k, unused slots hold -1
    std::vector<std::uint16_t> count;

    std::span<const std::int32_t> of(std::size_t pixel) const {
        return {index.data() + pixel * static_cast<std::size_t>(k), count[pixel]};
    }
};

/// The k most confident valid taps of each pixel's dilated window; ties go to
/// the earlier tap in row-major order. Pixels with fewer than k valid taps keep
/// all of them.
References select_references(const ScalarMap& confidence, const LdrParams& params);

/// Local depth ranking loss. For each pixel, averages log(1 + |ΔD|) over the
/// references whose disparity ordering contradicts the relative depth ordering,
/// weighted by |ΔD̃| / (1 + |ΔD̃|); zero when no reference contradicts. The
/// gradient holds the contradiction set and references fixed.
double ldr_loss(const ScalarMap& disparity, const ScalarMap& depth, const References& refs,
                std::span<double> grad = {});

// Smoothness terms use forward differences. The x and y penalties are each
// averaged over the pairs that exist (both pixels valid in both inputs) and
// then summed.

/// Edge-aware smoothness guided by image gradients (channel-mean |∂I|).
double smoothness_image(const ScalarMap& disparity, const ImageBuffer& left, std::span<double> grad = {});

/// Edge-aware smoothness guided by relative depth gradients.
double smoothness_depth(const ScalarMap& disparity, const ScalarMap& depth, std::span<double> grad = {});

/// Dual smoothness: the depth-guided term plus |∂D̃|·exp(-|∂D|), which also
/// penalises flat disparity across relative depth edges.
double dds_loss(const ScalarMap& disparity, const ScalarMap& depth, std::span<double> grad = {});

struct LossWeights {
    double lrc = 0.1;
    double ldr = 0.1;
    double dds = 0.1;

    void validate() const;
};

/// Non-owning view of the hybrid loss inputs. Optional members may be null
/// when the matching weight is zero.
struct LossInputs {
    const ImageBuffer* left = nullptr;
    const ImageBuffer* right = nullptr;
    const ScalarMap* disparity = nullptr;
    const ScalarMap* right_disparity = nullptr;
    const ScalarMap* depth = nullptr;
    const ScalarMap* confidence = nullptr;
};

struct LossReport {
    double photometric = 0.0;
    double lrc = 0.0;
    double ldr = 0.0;
    double dds = 0.0;
    double total = 0.0;
    std::optional<ScalarMap> grad;
};

/// total = photometric + w.lrc·lrc + w.ldr·ldr + w.dds·dds, and the gradient is
/// the same weighted sum of the term gradients. Terms whose inputs are absent
/// report 0; a missing input for a term with positive weight throws
/// std::invalid_argument.
LossReport hybrid_loss(const LossInputs& inputs, const LossWeights& weights, const LdrParams& ldr_params,
                       bool with_gradient = false);

}  // namespace depthvote::loss
