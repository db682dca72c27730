#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthvote/losses.hpp"
#include "loss_detail.hpp"

namespace depthvote::loss {

void LdrParams::validate() const {
    spec.validate();
    if (k < 1 || k > spec.max_taps()) {
        throw std::invalid_argument("k must lie in [1, " + std::to_string(spec.max_taps()) + "], got " +
                                    std::to_string(k));
    }
}

References select_references(const ScalarMap& confidence, const LdrParams& params) {
    params.validate();
    const int w = confidence.width();
    const int h = confidence.height();
    const auto offsets = window_offsets(params.spec);
    const std::size_t k = static_cast<std::size_t>(params.k);

    References refs;
    refs.width = w;
    refs.height = h;
    refs.k = params.k;
    refs.index.assign(confidence.size() * k, -1);
    refs.count.assign(confidence.size(), 0);

    const auto conf = confidence.values();
    parallel_for(h, [&](int y0, int y1) {
        struct Candidate {
            double confidence;
            std::int32_t index;
        };
        std::vector<Candidate> cand;
        cand.reserve(offsets.size());
        // Offsets are row-major, so flat index order equals tap order.
        const auto better = [](const Candidate& a, const Candidate& b) {
            if (a.confidence != b.confidence) return a.confidence > b.confidence;
            return a.index < b.index;
        };
        for (int y = y0; y < y1; ++y) {
            for (int x = 0; x < w; ++x) {
                cand.clear();
                for (const Offset& o : offsets) {
                    const int qx = x + o.dx;
                    const int qy = y + o.dy;
                    if (!confidence.contains(qx, qy)) continue;
                    const std::size_t iq = confidence.index(qx, qy);
                    if (!confidence.valid(iq) || !std::isfinite(conf[iq])) continue;
                    cand.push_back({conf[iq], static_cast<std::int32_t>(iq)});
                }
                const std::size_t take = std::min(k, cand.size());
                std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), better);
                const std::size_t ip = confidence.index(x, y);
                for (std::size_t j = 0; j < take; ++j) refs.index[ip * k + j] = cand[j].index;
                refs.count[ip] = static_cast<std::uint16_t>(take);
            }
        }
    });
    return refs;
}

double ldr_loss(const ScalarMap& disparity, const ScalarMap& depth, const References& refs, std::span<double> grad) {
    require_same_shape(disparity.width(), disparity.height(), depth.width(), depth.height(), "ldr");
    require_same_shape(disparity.width(), disparity.height(), refs.width, refs.height, "ldr references");
    detail::prepare_grad(grad, disparity);

    const auto d = disparity.values();
    const auto t = depth.values();
    const auto usable = [&](std::size_t i) { return disparity.valid(i) && depth.valid(i); };

    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t p = 0; p < disparity.size(); ++p) {
        if (!usable(p)) continue;
        ++counted;
        double num = 0.0;
        double den = 0.0;
        for (const std::int32_t r : refs.of(p)) {
            const auto ir = static_cast<std::size_t>(r);
            if (!usable(ir)) continue;
            const double dt = t[p] - t[ir];
            const double dd = d[p] - d[ir];
            if (step(dt * dd) == 1) continue;
            const double weight = std::abs(dt) / (1.0 + std::abs(dt));
            num += weight * std::log1p(std::abs(dd));
            den += weight;
        }
        if (den <= 0.0) continue;
        total += num / den;
        if (!grad.empty()) {
            for (const std::int32_t r : refs.of(p)) {
                const auto ir = static_cast<std::size_t>(r);
                if (!usable(ir)) continue;
                const double dt = t[p] - t[ir];
                const double dd = d[p] - d[ir];
                if (step(dt * dd) == 1) continue;
                const double weight = std::abs(dt) / (1.0 + std::abs(dt));
                const double g = weight * detail::sign(dd) / (1.0 + std::abs(dd)) / den;
                grad[p] += g;
                grad[ir] -= g;
            }
        }
    }
    if (counted == 0) return 0.0;
    const double inv = 1.0 / static_cast<double>(counted);
    if (!grad.empty()) {
        for (auto& g : grad) g *= inv;
    }
    return total * inv;
}

}  // namespace depthvote::loss
