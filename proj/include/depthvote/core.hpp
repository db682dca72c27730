#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "depthvote/errors.hpp"

namespace depthvote {

struct Pixel {
    int x = 0;
    int y = 0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Dense 2-D grid of doubles with a per-pixel validity mask.
///
/// Used for disparity, relative depth, confidence and error maps alike. Pixels
/// flagged invalid carry no information; binary operations propagate
/// invalidity (output valid iff both inputs valid).
class ScalarMap {
public:
    ScalarMap() = default;
    /// All pixels valid and set to `fill`.
    ScalarMap(int width, int height, double fill = 0.0);
    ScalarMap(int width, int height, std::vector<double> values);
    ScalarMap(int width, int height, std::vector<double> values, std::vector<std::uint8_t> valid);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    double operator()(int x, int y) const { return values_[index(x, y)]; }
    double& operator()(int x, int y) { return values_[index(x, y)]; }
    bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }
    bool valid(std::size_t i) const { return valid_[i] != 0; }
    void set_valid(int x, int y, bool v) { valid_[index(x, y)] = v ? 1 : 0; }
    void set_valid(std::size_t i, bool v) { valid_[i] = v ? 1 : 0; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::span<const std::uint8_t> mask() const { return valid_; }
    std::span<std::uint8_t> mask() { return valid_; }

    std::size_t valid_count() const;
    bool same_shape(const ScalarMap& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    /// a·v + b on valid pixels; invalid pixels stay invalid.
    ScalarMap affine(double a, double b) const;
    /// Elementwise transform of valid values.
    ScalarMap transform(const std::function<double(double)>& f) const;

    friend ScalarMap operator+(const ScalarMap& a, const ScalarMap& b);
    friend ScalarMap operator-(const ScalarMap& a, const ScalarMap& b);

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> valid_;
};

/// Intensity image with 1 or 3 interleaved channels in [0,1].
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, double fill = 0.0);
    /// Throws InvalidInput if any intensity lies outside [0,1].
    ImageBuffer(int width, int height, int channels, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }

    double operator()(int x, int y, int c = 0) const { return data_[offset(x, y, c)]; }
    double& operator()(int x, int y, int c = 0) { return data_[offset(x, y, c)]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    bool same_shape(const ScalarMap& m) const { return width_ == m.width() && height_ == m.height(); }
    bool same_shape(const ImageBuffer& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    /// Clamps every intensity into [0,1].
    void clamp_unit();

private:
    std::size_t offset(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels_) +
               static_cast<std::size_t>(c);
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 1;
    std::vector<double> data_;
};

enum class BorderPolicy { shrink };

/// Window geometry shared by confidence voting and reference sampling.
/// Taps falling outside the map are skipped (shrink policy).
struct NeighborhoodSpec {
    int window = 11;
    int dilation = 1;
    BorderPolicy border = BorderPolicy::shrink;

    /// Throws std::invalid_argument unless window is odd, >= 3 and dilation >= 1.
    void validate() const;
    int radius() const { return (window / 2) * dilation; }
    int max_taps() const { return window * window - 1; }
};

struct Offset {
    int dx = 0;
    int dy = 0;

    friend bool operator==(const Offset&, const Offset&) = default;
};

/// Tap offsets in row-major order, centre excluded.
std::vector<Offset> window_offsets(const NeighborhoodSpec& spec);

/// The "forward" half of window_offsets: dy > 0, or dy == 0 and dx > 0.
/// Every unordered pair {p, q} of window neighbours appears exactly once.
std::vector<Offset> half_window_offsets(const NeighborhoodSpec& spec);

/// In-bounds neighbours of p, row-major, excluding p.
std::vector<Pixel> neighborhood(Pixel p, const NeighborhoodSpec& spec, int width, int height);

/// 1 if x >= 0 else 0. Throws InvalidInput on NaN/inf.
int step(double x);

struct MapStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

/// Statistics over valid pixels. Throws InvalidInput when none are valid.
MapStats map_stats(const ScalarMap& map);

/// Throws ShapeMismatch naming `what` when the two grids differ in size.
void require_same_shape(int w0, int h0, int w1, int h1, const char* what);

// Parallel execution ---------------------------------------------------------

/// Caps the worker count used by the kernels. 0 restores the default
/// (hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(begin, end) over contiguous chunks of [0, count). Chunks are
/// disjoint; body must only write state owned by its chunk.
void parallel_for(int count, const std::function<void(int, int)>& body);

}  // namespace depthvote
