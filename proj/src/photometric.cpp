#include <array>
#include <cmath>
#include <vector>

#include "depthvote/losses.hpp"
#include "loss_detail.hpp"

namespace depthvote::loss {

namespace {

constexpr double kSsimWeight = 0.85;
constexpr double kL1Weight = 0.15;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

}  // namespace

double photometric_loss(const ImageBuffer& left, const ImageBuffer& right, const ScalarMap& disparity,
                        std::span<double> grad) {
    if (!left.same_shape(right)) throw ShapeMismatch("photometric: left and right images differ in shape");
    require_same_shape(left.width(), left.height(), disparity.width(), disparity.height(), "photometric");
    detail::prepare_grad(grad, disparity);

    const WarpedImage warped = warp_horizontal(right, disparity);
    const int w = left.width();
    const int h = left.height();
    const int ch = left.channels();
    const auto& vis = warped.visible;

    std::size_t counted = 0;
    for (auto v : vis) counted += v;
    if (counted == 0) throw InvalidInput("photometric: no visible pixels");

    const bool want_grad = !grad.empty();
    // d(sum of per-pixel losses) / d(warped intensity)
    std::vector<double> d_warp;
    if (want_grad) d_warp.assign(disparity.size() * static_cast<std::size_t>(ch), 0.0);

    double total = 0.0;
    std::array<std::size_t, 9> taps{};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t ip = disparity.index(x, y);
            if (!vis[ip]) continue;
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int qx = x + dx;
                    const int qy = y + dy;
                    if (!disparity.contains(qx, qy)) continue;
                    const std::size_t iq = disparity.index(qx, qy);
                    if (vis[iq]) taps[static_cast<std::size_t>(n++)] = iq;
                }
            }
            const double inv_n = 1.0 / n;
            double pixel_loss = 0.0;
            for (int c = 0; c < ch; ++c) {
                const auto lx = [&](std::size_t i) { return left.data()[i * ch + c]; };
                const auto ly = [&](std::size_t i) { return warped.image.data()[i * ch + c]; };
                double mx = 0.0, my = 0.0;
                for (int k = 0; k < n; ++k) {
                    mx += lx(taps[k]);
                    my += ly(taps[k]);
                }
                mx *= inv_n;
                my *= inv_n;
                double vx = 0.0, vy = 0.0, cxy = 0.0;
                for (int k = 0; k < n; ++k) {
                    const double ex = lx(taps[k]) - mx;
                    const double ey = ly(taps[k]) - my;
                    vx += ex * ex;
                    vy += ey * ey;
                    cxy += ex * ey;
                }
                vx *= inv_n;
                vy *= inv_n;
                cxy *= inv_n;

                const double a1 = 2.0 * mx * my + kC1;
                const double a2 = 2.0 * cxy + kC2;
                const double b1 = mx * mx + my * my + kC1;
                const double b2 = vx + vy + kC2;
                const double ssim = (a1 * a2) / (b1 * b2);
                const double diff = lx(ip) - ly(ip);
                pixel_loss += kSsimWeight * (1.0 - ssim) * 0.5 + kL1Weight * std::abs(diff);

                if (want_grad) {
                    const double ds_dmy = 2.0 * mx * a2 / (b1 * b2) - ssim * 2.0 * my / b1;
                    const double ds_dcxy = 2.0 * a1 / (b1 * b2);
                    const double ds_dvy = -ssim / b2;
                    const double scale = -kSsimWeight * 0.5 / ch;
                    for (int k = 0; k < n; ++k) {
                        const std::size_t iq = taps[k];
                        const double ds = (ds_dmy + ds_dcxy * (lx(iq) - mx) + ds_dvy * 2.0 * (ly(iq) - my)) * inv_n;
                        d_warp[iq * ch + c] += scale * ds;
                    }
                    d_warp[ip * ch + c] += kL1Weight * -detail::sign(diff) / ch;
                }
            }
            total += pixel_loss / ch;
        }
    }

    const double inv_count = 1.0 / static_cast<double>(counted);
    if (want_grad) {
        for (std::size_t i = 0; i < disparity.size(); ++i) {
            if (!vis[i]) continue;
            double g = 0.0;
            for (int c = 0; c < ch; ++c) g += d_warp[i * ch + c] * -warped.slope[i * ch + c];
            grad[i] = g * inv_count;
        }
    }
    return total * inv_count;
}

}  // namespace depthvote::loss
