#include "depthvote/core.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

namespace depthvote {

namespace {

void check_extent(int width, int height) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("map extent must be positive, got " + std::to_string(width) + "x" +
                                    std::to_string(height));
    }
}

std::size_t area(int width, int height) {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

}  // namespace

ScalarMap::ScalarMap(int width, int height, double fill)
    : width_(width), height_(height) {
    check_extent(width, height);
    values_.assign(area(width, height), fill);
    valid_.assign(area(width, height), 1);
}

ScalarMap::ScalarMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    check_extent(width, height);
    if (values_.size() != area(width, height)) {
        throw std::invalid_argument("value count does not match map extent");
    }
    valid_.assign(values_.size(), 1);
}

ScalarMap::ScalarMap(int width, int height, std::vector<double> values, std::vector<std::uint8_t> valid)
    : width_(width), height_(height), values_(std::move(values)), valid_(std::move(valid)) {
    check_extent(width, height);
    if (values_.size() != area(width, height) || valid_.size() != values_.size()) {
        throw std::invalid_argument("value/mask count does not match map extent");
    }
    for (auto& v : valid_) v = v ? 1 : 0;
}

std::size_t ScalarMap::valid_count() const {
    return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

ScalarMap ScalarMap::affine(double a, double b) const {
    ScalarMap out = *this;
    for (std::size_t i = 0; i < out.values_.size(); ++i) {
        if (out.valid_[i]) out.values_[i] = a * values_[i] + b;
    }
    return out;
}

ScalarMap ScalarMap::transform(const std::function<double(double)>& f) const {
    ScalarMap out = *this;
    for (std::size_t i = 0; i < out.values_.size(); ++i) {
        if (out.valid_[i]) out.values_[i] = f(values_[i]);
    }
    return out;
}

namespace {

template <typename Op>
ScalarMap combine(const ScalarMap& a, const ScalarMap& b, Op op) {
    require_same_shape(a.width(), a.height(), b.width(), b.height(), "map arithmetic");
    std::vector<double> values(a.size(), 0.0);
    std::vector<std::uint8_t> valid(a.size(), 0);
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool ok = a.valid(i) && b.valid(i);
        valid[i] = ok ? 1 : 0;
        if (ok) values[i] = op(va[i], vb[i]);
    }
    return ScalarMap(a.width(), a.height(), std::move(values), std::move(valid));
}

}  // namespace

ScalarMap operator+(const ScalarMap& a, const ScalarMap& b) {
    return combine(a, b, [](double x, double y) { return x + y; });
}

ScalarMap operator-(const ScalarMap& a, const ScalarMap& b) {
    return combine(a, b, [](double x, double y) { return x - y; });
}

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    check_extent(width, height);
    if (channels != 1 && channels != 3) throw std::invalid_argument("image must have 1 or 3 channels");
    if (!(fill >= 0.0 && fill <= 1.0)) throw InvalidInput("image fill outside [0,1]");
    data_.assign(area(width, height) * static_cast<std::size_t>(channels), fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check_extent(width, height);
    if (channels != 1 && channels != 3) throw std::invalid_argument("image must have 1 or 3 channels");
    if (data_.size() != area(width, height) * static_cast<std::size_t>(channels)) {
        throw std::invalid_argument("intensity count does not match image extent");
    }
    for (double v : data_) {
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("image intensity outside [0,1]");
    }
}

void ImageBuffer::clamp_unit() {
    for (auto& v : data_) v = std::clamp(v, 0.0, 1.0);
}

void NeighborhoodSpec::validate() const {
    if (window < 3 || window % 2 == 0) {
        throw std::invalid_argument("window must be odd and >= 3, got " + std::to_string(window));
    }
    if (dilation < 1) throw std::invalid_argument("dilation must be >= 1, got " + std::to_string(dilation));
}

std::vector<Offset> window_offsets(const NeighborhoodSpec& spec) {
    spec.validate();
    const int half = spec.window / 2;
    std::vector<Offset> out;
    out.reserve(static_cast<std::size_t>(spec.max_taps()));
    for (int j = -half; j <= half; ++j) {
        for (int i = -half; i <= half; ++i) {
            if (i == 0 && j == 0) continue;
            out.push_back({i * spec.dilation, j * spec.dilation});
        }
    }
    return out;
}

std::vector<Offset> half_window_offsets(const NeighborhoodSpec& spec) {
    std::vector<Offset> out;
    for (const Offset& o : window_offsets(spec)) {
        if (o.dy > 0 || (o.dy == 0 && o.dx > 0)) out.push_back(o);
    }
    return out;
}

std::vector<Pixel> neighborhood(Pixel p, const NeighborhoodSpec& spec, int width, int height) {
    if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
        throw std::invalid_argument("pixel outside map bounds");
    }
    std::vector<Pixel> out;
    for (const Offset& o : window_offsets(spec)) {
        const int qx = p.x + o.dx;
        const int qy = p.y + o.dy;
        if (qx >= 0 && qy >= 0 && qx < width && qy < height) out.push_back({qx, qy});
    }
    return out;
}

int step(double x) {
    if (!std::isfinite(x)) throw InvalidInput("step() received a non-finite value");
    return x >= 0.0 ? 1 : 0;
}

MapStats map_stats(const ScalarMap& map) {
    MapStats s{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), 0.0};
    double sum = 0.0;
    std::size_t n = 0;
    const auto v = map.values();
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (!map.valid(i)) continue;
        s.min = std::min(s.min, v[i]);
        s.max = std::max(s.max, v[i]);
        sum += v[i];
        ++n;
    }
    if (n == 0) throw InvalidInput("map has no valid pixels");
    s.mean = sum / static_cast<double>(n);
    return s;
}

void require_same_shape(int w0, int h0, int w1, int h1, const char* what) {
    if (w0 != w1 || h0 != h1) {
        throw ShapeMismatch(std::string(what) + ": dimension mismatch " + std::to_string(w0) + "x" +
                            std::to_string(h0) + " vs " + std::to_string(w1) + "x" + std::to_string(h1));
    }
}

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned n) { g_max_threads.store(n); }

unsigned max_threads() {
    const unsigned cap = g_max_threads.load();
    if (cap != 0) return cap;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void parallel_for(int count, const std::function<void(int, int)>& body) {
    if (count <= 0) return;
    const int workers = static_cast<int>(std::min<unsigned>(max_threads(), static_cast<unsigned>(count)));
    if (workers <= 1) {
        body(0, count);
        return;
    }
    const int chunk = (count + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers - 1));
        for (int w = 1; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(count, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back([&body, &errors, w, begin, end] {
                try {
                    body(begin, end);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        try {
            body(0, std::min(count, chunk));
        } catch (...) {
            errors[0] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace depthvote
