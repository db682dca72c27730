#include <cmath>
#include <string>

#include "depthvote/losses.hpp"
#include "interp.hpp"

namespace depthvote::loss {

namespace {

void check_disparity(double d, int x, int y) {
    if (!std::isfinite(d) || d < 0.0) {
        throw InvalidInput("warp: negative or non-finite disparity " + std::to_string(d) + " at (" +
                           std::to_string(x) + "," + std::to_string(y) + ")");
    }
}

}  // namespace

WarpedImage warp_horizontal(const ImageBuffer& src, const ScalarMap& disparity) {
    require_same_shape(src.width(), src.height(), disparity.width(), disparity.height(), "warp");
    const int w = src.width();
    const int h = src.height();
    const int ch = src.channels();
    WarpedImage out{ImageBuffer(w, h, ch, 0.0), std::vector<std::uint8_t>(disparity.size(), 0),
                    std::vector<double>(disparity.size() * static_cast<std::size_t>(ch), 0.0)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!disparity.valid(x, y)) continue;
            const double d = disparity(x, y);
            check_disparity(d, x, y);
            const double s = x - d;
            if (s < 0.0 || s > w - 1) continue;
            const detail::Stencil st = detail::stencil_at(s, w);
            const std::size_t i = disparity.index(x, y);
            out.visible[i] = 1;
            for (int c = 0; c < ch; ++c) {
                const double v0 = src(st.x0, y, c);
                const double v1 = src(st.x1, y, c);
                out.image(x, y, c) = detail::lerp_taps(v0, v1, st.t);
                out.slope[i * ch + c] = src(st.s1, y, c) - src(st.s0, y, c);
            }
        }
    }
    return out;
}

WarpedMap warp_horizontal(const ScalarMap& src, const ScalarMap& disparity) {
    require_same_shape(src.width(), src.height(), disparity.width(), disparity.height(), "warp");
    const int w = src.width();
    const int h = src.height();
    ScalarMap warped(w, h, 0.0);
    std::vector<std::uint8_t> visible(disparity.size(), 0);
    std::vector<double> slope(disparity.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = disparity.index(x, y);
            warped.set_valid(i, false);
            if (!disparity.valid(i)) continue;
            const double d = disparity(x, y);
            check_disparity(d, x, y);
            const double s = x - d;
            if (s < 0.0 || s > w - 1) continue;
            visible[i] = 1;
            const detail::Stencil st = detail::stencil_at(s, w);
            const bool taps_ok = src.valid(st.x0, y) && src.valid(st.x1, y) && src.valid(st.s0, y) &&
                                 src.valid(st.s1, y);
            if (!taps_ok) continue;
            const double v0 = src(st.x0, y);
            const double v1 = src(st.x1, y);
            warped(x, y) = detail::lerp_taps(v0, v1, st.t);
            warped.set_valid(i, true);
            slope[i] = src(st.s1, y) - src(st.s0, y);
        }
    }
    return {std::move(warped), std::move(visible), std::move(slope)};
}

}  // namespace depthvote::loss
