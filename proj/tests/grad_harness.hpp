#pragma once
// Finite-difference gradient harness shared by the loss unit tests and the
// acceptance suite.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "depthvote/core.hpp"
#include "oracles.hpp"

namespace harness {

using depthvote::Pixel;
using depthvote::ScalarMap;

inline constexpr double kStep = 1e-4;

inline double frac_distance(double s) { return std::abs(s - std::round(s)); }

struct GradResult {
    int checked = 0;
    double max_rel = 0.0;
};

// Checks the analytic gradient of `f` at up to `samples` random pixels that
// pass `usable`.
inline GradResult grad_check(const std::function<double(const ScalarMap&, std::span<double>)>& f, const ScalarMap& d,
                      const std::function<bool(std::size_t)>& usable, std::mt19937& rng, int samples = 160) {
    std::vector<double> grad(d.size());
    f(d, grad);
    std::vector<std::size_t> order(d.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    GradResult r;
    const auto value = [&](const ScalarMap& m) { return f(m, {}); };
    for (std::size_t i : order) {
        if (r.checked >= samples) break;
        if (!usable(i)) continue;
        const double numeric = oracle::central_difference(value, d, i, kStep);
        r.max_rel = std::max(r.max_rel, oracle::relative_error(grad[i], numeric));
        ++r.checked;
    }
    return r;
}

// Pixel i is away from warp kinks (integer sample coordinates) and the view
// border.
inline bool warp_smooth(const ScalarMap& d, std::size_t i) {
    const int x = static_cast<int>(i % static_cast<std::size_t>(d.width()));
    const double s = x - d.values()[i];
    return s > 2 * kStep && s < d.width() - 1 - 2 * kStep && frac_distance(s) > 1e-3;
}

// No forward/backward difference through pixel i is near zero.
inline bool smooth_differences(const ScalarMap& d, std::size_t i) {
    const int w = d.width();
    const int x = static_cast<int>(i % static_cast<std::size_t>(w)), y = static_cast<int>(i / static_cast<std::size_t>(w));
    const Pixel around[] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
    for (const auto& q : around) {
        if (!d.contains(q.x, q.y)) continue;
        if (std::abs(d(x, y) - d(q.x, q.y)) < 1e-3) return false;
    }
    return true;
}

}  // namespace harness
