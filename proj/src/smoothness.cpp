#include <cmath>
#include <vector>

#include "depthvote/losses.hpp"
#include "loss_detail.hpp"

namespace depthvote::loss {

namespace {

// Visits every forward-difference pair (p, q) along x (q = p + 1 column) and
// along y (q = p + 1 row) whose pixels are usable in both inputs. The pair
// penalty f(gD, gGuide) and its derivative with respect to gD = D(q) - D(p)
// come from `term`. Each direction is averaged over its own pair count.
template <typename GuideDiff, typename Usable, typename Term>
double forward_difference_loss(const ScalarMap& disparity, GuideDiff guide_diff, Usable usable, Term term,
                               std::span<double> grad) {
    detail::prepare_grad(grad, disparity);
    const int w = disparity.width();
    const int h = disparity.height();
    const auto d = disparity.values();
    const bool want_grad = !grad.empty();
    std::vector<double> gx, gy;
    if (want_grad) {
        gx.assign(disparity.size(), 0.0);
        gy.assign(disparity.size(), 0.0);
    }

    double sum_x = 0.0, sum_y = 0.0;
    std::size_t n_x = 0, n_y = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t ip = disparity.index(x, y);
            if (!usable(ip)) continue;
            if (x + 1 < w) {
                const std::size_t iq = ip + 1;
                if (usable(iq)) {
                    double slope = 0.0;
                    sum_x += term(d[iq] - d[ip], guide_diff(ip, iq), slope);
                    ++n_x;
                    if (want_grad) {
                        gx[iq] += slope;
                        gx[ip] -= slope;
                    }
                }
            }
            if (y + 1 < h) {
                const std::size_t iq = ip + static_cast<std::size_t>(w);
                if (usable(iq)) {
                    double slope = 0.0;
                    sum_y += term(d[iq] - d[ip], guide_diff(ip, iq), slope);
                    ++n_y;
                    if (want_grad) {
                        gy[iq] += slope;
                        gy[ip] -= slope;
                    }
                }
            }
        }
    }
    const double inv_x = n_x ? 1.0 / static_cast<double>(n_x) : 0.0;
    const double inv_y = n_y ? 1.0 / static_cast<double>(n_y) : 0.0;
    if (want_grad) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = gx[i] * inv_x + gy[i] * inv_y;
    }
    return sum_x * inv_x + sum_y * inv_y;
}

// |gD|·exp(-|gG|)
double edge_aware(double g_disp, double g_guide, double& slope) {
    const double weight = std::exp(-std::abs(g_guide));
    slope = detail::sign(g_disp) * weight;
    return std::abs(g_disp) * weight;
}

}  // namespace

double smoothness_image(const ScalarMap& disparity, const ImageBuffer& left, std::span<double> grad) {
    require_same_shape(disparity.width(), disparity.height(), left.width(), left.height(), "smoothness_image");
    const int ch = left.channels();
    const auto img = left.data();
    const auto guide = [&](std::size_t ip, std::size_t iq) {
        double g = 0.0;
        for (int c = 0; c < ch; ++c) g += std::abs(img[iq * ch + c] - img[ip * ch + c]);
        return g / ch;
    };
    const auto usable = [&](std::size_t i) { return disparity.valid(i); };
    return forward_difference_loss(disparity, guide, usable, edge_aware, grad);
}

double smoothness_depth(const ScalarMap& disparity, const ScalarMap& depth, std::span<double> grad) {
    require_same_shape(disparity.width(), disparity.height(), depth.width(), depth.height(), "smoothness_depth");
    const auto t = depth.values();
    const auto guide = [&](std::size_t ip, std::size_t iq) { return t[iq] - t[ip]; };
    const auto usable = [&](std::size_t i) { return disparity.valid(i) && depth.valid(i); };
    return forward_difference_loss(disparity, guide, usable, edge_aware, grad);
}

double dds_loss(const ScalarMap& disparity, const ScalarMap& depth, std::span<double> grad) {
    require_same_shape(disparity.width(), disparity.height(), depth.width(), depth.height(), "dds");
    const auto t = depth.values();
    const auto guide = [&](std::size_t ip, std::size_t iq) { return t[iq] - t[ip]; };
    const auto usable = [&](std::size_t i) { return disparity.valid(i) && depth.valid(i); };
    const auto dual = [](double g_disp, double g_depth, double& slope) {
        const double ad = std::abs(g_disp);
        const double at = std::abs(g_depth);
        const double wt = std::exp(-at);
        const double wd = std::exp(-ad);
        slope = detail::sign(g_disp) * (wt - at * wd);
        return ad * wt + at * wd;
    };
    return forward_difference_loss(disparity, guide, usable, dual, grad);
}

}  // namespace depthvote::loss
