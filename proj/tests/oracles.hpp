#pragma once
// Independent reference implementations used only by tests. They follow the
// textbook definitions directly (nested loops, no symmetry tricks, no shared
// helpers from the library) so that they can catch mistakes in the optimised
// kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "depthvote/core.hpp"

namespace oracle {

using depthvote::ScalarMap;

inline std::vector<depthvote::Pixel> neighbors(int px, int py, int window, int dilation, int w, int h) {
    std::vector<depthvote::Pixel> out;
    const int r = window / 2;
    for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i) {
            if (i == 0 && j == 0) continue;
            const int qx = px + i * dilation;
            const int qy = py + j * dilation;
            if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
            out.push_back({qx, qy});
        }
    }
    return out;
}

inline bool both_valid(const ScalarMap& a, const ScalarMap& b, int x, int y) {
    return a.valid(x, y) && b.valid(x, y) && std::isfinite(a(x, y)) && std::isfinite(b(x, y));
}

/// Global scale over the full (ordered) neighbour pair set.
inline double global_scale(const ScalarMap& d, const ScalarMap& t, int window, int dilation) {
    double num = 0.0, den = 0.0;
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!both_valid(d, t, x, y)) continue;
            for (auto q : neighbors(x, y, window, dilation, d.width(), d.height())) {
                if (!both_valid(d, t, q.x, q.y)) continue;
                num += std::abs(t(x, y) - t(q.x, q.y));
                den += std::abs(d(x, y) - d(q.x, q.y));
            }
        }
    }
    return num / den;
}

/// Variation-consistency vote written from the prose description: reject a
/// flat disparity pair across a strong depth edge, and a wild disparity pair in
/// a depth-stable region.
inline int vc_prose(double dd, double dt, double gamma, double sigma, double stable) {
    const double u = std::abs(dt) / gamma;
    if (u >= sigma && std::abs(dd) < stable) return 0;
    if (u <= 1.0 && std::abs(dd) > sigma) return 0;
    return 1;
}

inline int heaviside(double x) { return x >= 0.0 ? 1 : 0; }

inline int vc_literal(double dd, double dt, double gamma, double sigma) {
    const double first = heaviside(std::abs(dt) - gamma * sigma) * (1.0 - std::abs(dd));
    const double second = heaviside(gamma - std::abs(dt)) * (std::abs(dd) - sigma);
    return heaviside(first) * heaviside(second);
}

/// Per-pixel brute-force confidence (prose mode). Invalid pixels get NaN.
inline std::vector<double> confidence(const ScalarMap& d, const ScalarMap& t, int window, int dilation, double sigma,
                                      double stable, double gamma) {
    std::vector<double> out(d.size(), std::nan(""));
    for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) {
            if (!both_valid(d, t, x, y)) continue;
            int votes = 0, m = 0;
            for (auto q : neighbors(x, y, window, dilation, d.width(), d.height())) {
                if (!both_valid(d, t, q.x, q.y)) continue;
                ++m;
                const double dd = d(x, y) - d(q.x, q.y);
                const double dt = t(x, y) - t(q.x, q.y);
                const int rc = heaviside(dt * dd);
                votes += rc * vc_prose(dd, dt, gamma, sigma, stable);
            }
            if (m > 0) out[d.index(x, y)] = static_cast<double>(votes) / m;
        }
    }
    return out;
}

/// Central finite difference of f with respect to component j of `values`.
inline double central_difference(const std::function<double(const ScalarMap&)>& f, ScalarMap d, std::size_t j,
                                 double h) {
    auto v = d.values();
    const double orig = v[j];
    v[j] = orig + h;
    const double plus = f(d);
    v[j] = orig - h;
    const double minus = f(d);
    return (plus - minus) / (2.0 * h);
}

/// Relative error with an absolute floor so near-zero derivatives compare
/// sensibly.
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Retained-subset mean errors at densities i/steps for a given ordering key
/// (larger key first, ties by row-major index), computed by re-summing each
/// prefix from scratch.
inline std::vector<double> prefix_means(const std::vector<double>& errors, const std::vector<double>& key, int steps) {
    std::vector<std::size_t> order(errors.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key[a] != key[b]) return key[a] > key[b];
        return a < b;
    });
    std::vector<double> out;
    const std::size_t n = errors.size();
    for (int i = 1; i <= steps; ++i) {
        const std::size_t kept = (static_cast<std::size_t>(i) * n) / static_cast<std::size_t>(steps);
        double s = 0.0;
        for (std::size_t j = 0; j < kept; ++j) s += errors[order[j]];
        out.push_back(s / static_cast<double>(kept));
    }
    return out;
}

inline ScalarMap random_map(int w, int h, double lo, double hi, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    ScalarMap m(w, h, 0.0);
    for (auto& v : m.values()) v = u(rng);
    return m;
}

}  // namespace oracle
