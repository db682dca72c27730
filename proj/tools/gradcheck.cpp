#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>

#include "depthvote/ddcv.hpp"
#include "depthvote/losses.hpp"

namespace depthvote::tools {

namespace {

using LossFn = std::function<double(const ScalarMap&, std::span<double>)>;
using Usable = std::function<bool(std::size_t)>;

struct Instance {
    ImageBuffer left;
    ImageBuffer right;
    ScalarMap disparity;
    ScalarMap right_disparity;
    ScalarMap depth;
    loss::References refs;
};

Instance make_instance(const GradcheckOptions& o) {
    std::mt19937 rng(o.seed);
    const int w = o.width;
    const int h = o.height;
    const auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const double max_disp = std::max(0.8, 0.2 * w);

    Instance in;
    in.left = ImageBuffer(w, h, 1, 0.0);
    in.right = ImageBuffer(w, h, 1, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            in.left(x, y) = uniform(0.05, 0.95);
            in.right(x, y) = 0.5 + 0.3 * std::sin(0.7 * x + 0.3 * y) + 0.15 * std::cos(1.3 * x - 0.2 * y);
        }
    }
    in.disparity = ScalarMap(w, h, 0.0);
    in.right_disparity = ScalarMap(w, h, 0.0);
    for (auto& v : in.disparity.values()) v = uniform(0.3, max_disp);
    for (auto& v : in.right_disparity.values()) v = uniform(0.5, max_disp + 2.0);
    // Monotone depth with a sprinkling of ranking flips.
    in.depth = in.disparity.transform([](double v) { return std::log1p(v); });
    for (auto& v : in.depth.values()) {
        if (uniform(0.0, 1.0) < 0.3) v += uniform(-1.5, 1.5);
    }
    const auto conf = ddcv::confidence_map(in.disparity, in.depth);
    in.refs = loss::select_references(conf, loss::LdrParams{});
    return in;
}

bool near_integer(double s, double eps) { return std::abs(s - std::round(s)) <= eps; }

// Pixel i samples the source strictly inside the view and away from a tap.
bool warp_smooth(const ScalarMap& d, std::size_t i, double step) {
    const double x = static_cast<double>(i % static_cast<std::size_t>(d.width()));
    const double s = x - d.values()[i];
    return s > 2 * step && s < d.width() - 1 - 2 * step && !near_integer(s, 1e-3);
}

bool smooth_differences(const ScalarMap& d, std::size_t i) {
    const int w = d.width();
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    const int around[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
    for (const auto& q : around) {
        if (d.contains(q[0], q[1]) && std::abs(d(x, y) - d(q[0], q[1])) < 1e-3) return false;
    }
    return true;
}

TermResult check_term(const std::string& name, const LossFn& f, const ScalarMap& d, const Usable& usable,
                      const GradcheckOptions& o) {
    std::vector<double> grad(d.size());
    f(d, grad);
    if (o.inject_fault && *o.inject_fault == name) {
        for (double& g : grad) g = -g;
    }
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937 rng(o.seed ^ 0x9e3779b9u);
    std::shuffle(order.begin(), order.end(), rng);

    TermResult r{name, 0, 0.0, false};
    ScalarMap probe = d;
    auto values = probe.values();
    for (std::size_t i : order) {
        if (r.checked >= o.samples) break;
        if (!usable(i)) continue;
        const double orig = values[i];
        values[i] = orig + o.step;
        const double plus = f(probe, {});
        values[i] = orig - o.step;
        const double minus = f(probe, {});
        values[i] = orig;
        const double numeric = (plus - minus) / (2.0 * o.step);
        const double rel =
            std::abs(grad[i] - numeric) / std::max({std::abs(grad[i]), std::abs(numeric), 1e-6});
        r.max_rel_error = std::max(r.max_rel_error, rel);
        ++r.checked;
    }
    r.passed = r.checked > 0 && r.max_rel_error < o.tolerance;
    return r;
}

}  // namespace

const std::vector<std::string>& gradcheck_terms() {
    static const std::vector<std::string> terms{"photometric", "lrc", "ldr", "smoothness-image", "smoothness-depth",
                                                "dds"};
    return terms;
}

std::vector<TermResult> run_gradcheck(const GradcheckOptions& o) {
    if (o.width < 4 || o.height < 4) throw std::invalid_argument("gradcheck needs at least a 4x4 instance");
    if (o.samples < 1) throw std::invalid_argument("gradcheck needs at least one sample per term");
    if (o.inject_fault) {
        const auto& t = gradcheck_terms();
        if (std::find(t.begin(), t.end(), *o.inject_fault) == t.end()) {
            throw std::invalid_argument("unknown term '" + *o.inject_fault + "' for fault injection");
        }
    }
    const Instance in = make_instance(o);
    const ScalarMap& d = in.disparity;
    const double step = o.step;

    const auto warped_img = loss::warp_horizontal(in.right, d);
    const auto warped_dr = loss::warp_horizontal(in.right_disparity, d);
    std::vector<std::uint8_t> ldr_kink(d.size(), 0);
    const auto dv = d.values();
    const auto tv = in.depth.values();
    for (std::size_t p = 0; p < d.size(); ++p) {
        for (auto r : in.refs.of(p)) {
            const auto q = static_cast<std::size_t>(r);
            if (std::abs((tv[p] - tv[q]) * (dv[p] - dv[q])) <= 1e-3) ldr_kink[p] = ldr_kink[q] = 1;
        }
    }

    std::vector<TermResult> out;
    out.push_back(check_term(
        "photometric", [&](const ScalarMap& m, std::span<double> g) { return loss::photometric_loss(in.left, in.right, m, g); },
        d,
        [&](std::size_t i) {
            return warp_smooth(d, i, step) && std::abs(in.left.data()[i] - warped_img.image.data()[i]) > 1e-3;
        },
        o));
    out.push_back(check_term(
        "lrc", [&](const ScalarMap& m, std::span<double> g) { return loss::lrc_loss(m, in.right_disparity, g); }, d,
        [&](std::size_t i) { return warp_smooth(d, i, step) && std::abs(dv[i] - warped_dr.map.values()[i]) > 1e-3; },
        o));
    out.push_back(check_term(
        "ldr", [&](const ScalarMap& m, std::span<double> g) { return loss::ldr_loss(m, in.depth, in.refs, g); }, d,
        [&](std::size_t i) { return ldr_kink[i] == 0; }, o));
    const Usable smooth = [&](std::size_t i) { return smooth_differences(d, i); };
    out.push_back(check_term(
        "smoothness-image", [&](const ScalarMap& m, std::span<double> g) { return loss::smoothness_image(m, in.left, g); },
        d, smooth, o));
    out.push_back(check_term(
        "smoothness-depth", [&](const ScalarMap& m, std::span<double> g) { return loss::smoothness_depth(m, in.depth, g); },
        d, smooth, o));
    out.push_back(check_term(
        "dds", [&](const ScalarMap& m, std::span<double> g) { return loss::dds_loss(m, in.depth, g); }, d, smooth, o));
    return out;
}

}  // namespace depthvote::tools
