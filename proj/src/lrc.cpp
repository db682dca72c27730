#include <cmath>
#include <string>

#include "depthvote/losses.hpp"
#include "loss_detail.hpp"

namespace depthvote::loss {

double lrc_loss(const ScalarMap& disparity, const ScalarMap& right_disparity, std::span<double> grad) {
    require_same_shape(disparity.width(), disparity.height(), right_disparity.width(), right_disparity.height(),
                       "lrc");
    detail::prepare_grad(grad, disparity);
    const WarpedMap warped = warp_horizontal(right_disparity, disparity);

    const auto d = disparity.values();
    const auto r = warped.map.values();
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < disparity.size(); ++i) {
        if (!warped.map.valid(i)) continue;
        const double sum = d[i] + r[i];
        if (!(sum > 0.0)) {
            throw InvalidInput("lrc: nonpositive denominator " + std::to_string(sum) + " at pixel " +
                               std::to_string(i));
        }
        const double diff = d[i] - r[i];
        total += std::abs(diff) / sum;
        ++counted;
        if (!grad.empty()) {
            // D̂r depends on D(p) through the sample coordinate x - D(p).
            const double dr_dd = -warped.slope[i];
            grad[i] = detail::sign(diff) * (1.0 - dr_dd) / sum - std::abs(diff) * (1.0 + dr_dd) / (sum * sum);
        }
    }
    if (counted == 0) throw InvalidInput("lrc: no visible pixels");
    const double inv = 1.0 / static_cast<double>(counted);
    if (!grad.empty()) {
        for (auto& g : grad) g *= inv;
    }
    return total * inv;
}

}  // namespace depthvote::loss
