#include "depthvote/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace depthvote::eval {

namespace {

struct Counted {
    std::vector<std::size_t> index;  // row-major order
    std::vector<double> error;       // |est - gt|
};

Counted counted_errors(const ScalarMap& est, const ScalarMap& gt) {
    require_same_shape(est.width(), est.height(), gt.width(), gt.height(), "evaluation");
    Counted c;
    const auto e = est.values();
    const auto g = gt.values();
    for (std::size_t i = 0; i < est.size(); ++i) {
        if (!est.valid(i) || !gt.valid(i)) continue;
        c.index.push_back(i);
        c.error.push_back(std::abs(e[i] - g[i]));
    }
    if (c.index.empty()) throw InvalidInput("no pixel is valid in both estimate and ground truth");
    return c;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

SparsificationCurve curve_from_order(const Counted& c, const std::vector<std::size_t>& order, int steps) {
    if (steps < 2) throw std::invalid_argument("sparsification needs at least 2 steps");
    const std::size_t n = order.size();
    if (n < static_cast<std::size_t>(steps)) {
        throw std::invalid_argument("sparsification needs at least " + std::to_string(steps) +
                                    " counted pixels, got " + std::to_string(n));
    }
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + c.error[order[j]];

    SparsificationCurve curve;
    curve.samples.reserve(static_cast<std::size_t>(steps));
    for (int i = 1; i <= steps; ++i) {
        const std::size_t kept = (static_cast<std::size_t>(i) * n) / static_cast<std::size_t>(steps);
        const double value = i == steps ? mean_of(c.error) : prefix[kept] / static_cast<double>(kept);
        curve.samples.push_back({static_cast<double>(i) / steps, value});
    }
    curve.auc = curve_auc(curve.samples);
    return curve;
}

}  // namespace

double epe(const ScalarMap& est, const ScalarMap& gt) { return mean_of(counted_errors(est, gt).error); }

double pep(const ScalarMap& est, const ScalarMap& gt, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("pep tolerance must be > 0");
    const Counted c = counted_errors(est, gt);
    const auto bad = std::count_if(c.error.begin(), c.error.end(), [delta](double e) { return e > delta; });
    return 100.0 * static_cast<double>(bad) / static_cast<double>(c.error.size());
}

double d1(const ScalarMap& est, const ScalarMap& gt) {
    const Counted c = counted_errors(est, gt);
    const auto g = gt.values();
    std::size_t bad = 0;
    for (std::size_t j = 0; j < c.index.size(); ++j) {
        const double err = c.error[j];
        if (err > 3.0 && err > 0.05 * std::abs(g[c.index[j]])) ++bad;
    }
    return 100.0 * static_cast<double>(bad) / static_cast<double>(c.index.size());
}

DisparityMetrics disparity_metrics(const ScalarMap& est, const ScalarMap& gt, const std::vector<double>& deltas) {
    DisparityMetrics m;
    m.epe = epe(est, gt);
    for (double delta : deltas) m.pep[delta] = pep(est, gt, delta);
    m.d1 = d1(est, gt);
    return m;
}

SparsificationCurve sparsification(const ScalarMap& est, const ScalarMap& gt, const ScalarMap& confidence,
                                   int steps) {
    require_same_shape(est.width(), est.height(), confidence.width(), confidence.height(), "sparsification");
    const Counted c = counted_errors(est, gt);
    const auto conf = confidence.values();
    std::vector<double> key(c.index.size());
    for (std::size_t j = 0; j < key.size(); ++j) {
        const std::size_t i = c.index[j];
        key[j] = (confidence.valid(i) && !std::isnan(conf[i])) ? conf[i] : -std::numeric_limits<double>::infinity();
    }
    std::vector<std::size_t> order(c.index.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Counted pixels are already in row-major order, so a stable sort breaks
    // ties by position.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    return curve_from_order(c, order, steps);
}

SparsificationCurve optimal_curve(const ScalarMap& est, const ScalarMap& gt, int steps) {
    const Counted c = counted_errors(est, gt);
    std::vector<std::size_t> order(c.index.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c.error[a] < c.error[b]; });
    return curve_from_order(c, order, steps);
}

double optimal_auc(const ScalarMap& est, const ScalarMap& gt, int steps) { return optimal_curve(est, gt, steps).auc; }

double curve_auc(const std::vector<CurveSample>& samples) {
    if (samples.empty()) return 0.0;
    double area = samples.front().density * samples.front().epe;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const double width = samples[i].density - samples[i - 1].density;
        area += width * 0.5 * (samples[i].epe + samples[i - 1].epe);
    }
    return 100.0 * area;
}

double ms_per_megapixel(double elapsed_ms, double pixels) {
    if (!(pixels > 0.0)) throw std::invalid_argument("pixel count must be > 0");
    return elapsed_ms * 1.0e6 / pixels;
}

double time_per_megapixel(const std::function<void()>& kernel, double pixels, int repetitions) {
    if (repetitions < 3) throw std::invalid_argument("time_per_megapixel needs at least 3 repetitions");
    std::vector<double> ms;
    ms.reserve(static_cast<std::size_t>(repetitions));
    for (int r = 0; r < repetitions; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        kernel();
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    const std::size_t mid = ms.size() / 2;
    const double median = ms.size() % 2 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
    return ms_per_megapixel(median, pixels);
}

}  // namespace depthvote::eval
