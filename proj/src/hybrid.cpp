#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthvote/losses.hpp"

namespace depthvote::loss {

void LossWeights::validate() const {
    for (double v : {lrc, ldr, dds}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
    }
}

namespace {

void require(const void* ptr, double weight, const char* input, const char* term) {
    if (ptr == nullptr && weight > 0.0) {
        throw std::invalid_argument(std::string(term) + " has positive weight but no " + input + " was given");
    }
}

}  // namespace

LossReport hybrid_loss(const LossInputs& in, const LossWeights& weights, const LdrParams& ldr_params,
                       bool with_gradient) {
    weights.validate();
    if (in.left == nullptr || in.right == nullptr || in.disparity == nullptr) {
        throw std::invalid_argument("hybrid loss needs left image, right image and disparity");
    }
    require(in.right_disparity, weights.lrc, "right disparity", "lrc");
    require(in.depth, weights.ldr, "relative depth", "ldr");
    require(in.confidence, weights.ldr, "confidence map", "ldr");
    require(in.depth, weights.dds, "relative depth", "dds");

    const ScalarMap& disp = *in.disparity;
    const std::size_t n = disp.size();
    const auto buffer = [&](std::vector<double>& g) -> std::span<double> {
        if (!with_gradient) return {};
        g.assign(n, 0.0);
        return g;
    };

    std::vector<double> g_photo, g_lrc, g_ldr, g_dds;
    LossReport report;
    report.photometric = photometric_loss(*in.left, *in.right, disp, buffer(g_photo));
    if (in.right_disparity != nullptr) report.lrc = lrc_loss(disp, *in.right_disparity, buffer(g_lrc));
    if (in.depth != nullptr && in.confidence != nullptr) {
        const References refs = select_references(*in.confidence, ldr_params);
        report.ldr = ldr_loss(disp, *in.depth, refs, buffer(g_ldr));
    }
    if (in.depth != nullptr) report.dds = dds_loss(disp, *in.depth, buffer(g_dds));

    report.total = report.photometric + weights.lrc * report.lrc + weights.ldr * report.ldr + weights.dds * report.dds;

    if (with_gradient) {
        ScalarMap grad(disp.width(), disp.height(), 0.0);
        auto out = grad.values();
        const auto at = [](const std::vector<double>& g, std::size_t i) { return g.empty() ? 0.0 : g[i]; };
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = g_photo[i] + weights.lrc * at(g_lrc, i) + weights.ldr * at(g_ldr, i) + weights.dds * at(g_dds, i);
        }
        for (std::size_t i = 0; i < n; ++i) grad.set_valid(i, disp.valid(i));
        report.grad = std::move(grad);
    }
    return report;
}

}  // namespace depthvote::loss
