#include "depthvote/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "interp.hpp"

namespace depthvote::synth {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view name, const std::pair<std::string_view, E> (&table)[N], const char* what) {
    std::string options;
    for (const auto& [key, value] : table) {
        if (key == name) return value;
        options += options.empty() ? "" : "|";
        options += key;
    }
    throw std::invalid_argument("unknown " + std::string(what) + " '" + std::string(name) + "' (expected " +
                                options + ")");
}

template <typename E, std::size_t N>
std::string_view name_of(E value, const std::pair<std::string_view, E> (&table)[N]) {
    for (const auto& [key, v] : table) {
        if (v == value) return key;
    }
    return "?";
}

constexpr std::pair<std::string_view, Layout> kLayouts[] = {
    {"planar-ramp", Layout::planar_ramp},
    {"piecewise-planar", Layout::piecewise_planar},
    {"step-edge", Layout::step_edge},
};
constexpr std::pair<std::string_view, Texture> kTextures[] = {
    {"flat", Texture::flat},
    {"sinusoidal", Texture::sinusoidal},
    {"noise", Texture::noise},
    {"texture-less-band", Texture::textureless_band},
};
constexpr std::pair<std::string_view, TransformKind> kTransforms[] = {
    {"affine", TransformKind::affine},
    {"power", TransformKind::power},
};
constexpr std::pair<std::string_view, CorruptionKind> kCorruptions[] = {
    {"none", CorruptionKind::none},
    {"salt", CorruptionKind::salt},
    {"region", CorruptionKind::region},
};

}  // namespace

Layout parse_layout(std::string_view name) { return parse_enum(name, kLayouts, "layout"); }
Texture parse_texture(std::string_view name) { return parse_enum(name, kTextures, "texture"); }
TransformKind parse_transform(std::string_view name) { return parse_enum(name, kTransforms, "depth transform"); }
CorruptionKind parse_corruption(std::string_view name) { return parse_enum(name, kCorruptions, "corruption"); }
std::string_view to_string(Layout v) { return name_of(v, kLayouts); }
std::string_view to_string(Texture v) { return name_of(v, kTextures); }
std::string_view to_string(TransformKind v) { return name_of(v, kTransforms); }
std::string_view to_string(CorruptionKind v) { return name_of(v, kCorruptions); }

double DepthTransform::operator()(double disparity) const {
    return kind == TransformKind::affine ? scale * disparity + offset : std::pow(disparity, exponent);
}

void SceneSpec::validate() const {
    if (width < 8 || height < 8) throw std::invalid_argument("scene must be at least 8x8");
    if (channels != 1 && channels != 3) throw std::invalid_argument("scene channels must be 1 or 3");
    if (boxes < 0) throw std::invalid_argument("box count must be >= 0");
    if (depth_transform.kind == TransformKind::affine && !(depth_transform.scale > 0.0)) {
        throw std::invalid_argument("affine depth transform needs a positive slope");
    }
    if (depth_transform.kind == TransformKind::power && !(depth_transform.exponent > 0.0)) {
        throw std::invalid_argument("power depth transform needs a positive exponent");
    }
    if (corruption.kind == CorruptionKind::salt && !(corruption.fraction >= 0.0 && corruption.fraction <= 1.0)) {
        throw std::invalid_argument("salt fraction must lie in [0,1]");
    }
    if (!std::isfinite(corruption.magnitude)) throw std::invalid_argument("corruption magnitude must be finite");
}

UniformSource::UniformSource(std::uint32_t seed) : engine_(seed) {}

double UniformSource::next() {
    constexpr double span = static_cast<double>(std::minstd_rand::max() - std::minstd_rand::min());
    return static_cast<double>(engine_() - std::minstd_rand::min()) / span;
}

std::size_t UniformSource::below(std::size_t n) {
    const auto v = static_cast<std::size_t>(next() * static_cast<double>(n));
    return std::min(v, n - 1);
}

namespace {

// Surfaces slant vertically only. A constant disparity along each scanline
// makes the right-view disparity an exact copy of the left one, so warping it
// back reproduces D_gt bit for bit.
struct Plane {
    double base;  // value at row cy
    double gy;
    double cy;

    double at(int y) const { return base + gy * (y - cy); }
};

// Left-view disparity before consistency refinement.
std::vector<double> layout_disparity(const SceneSpec& spec, UniformSource& rng) {
    const int w = spec.width;
    const int h = spec.height;
    std::vector<double> d(static_cast<std::size_t>(w) * h);
    const Plane background{rng.range(10.0, 18.0), rng.range(-0.06, 0.06), h / 2.0};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) d[static_cast<std::size_t>(y) * w + x] = background.at(y);
    }

    switch (spec.layout) {
        case Layout::planar_ramp:
            break;
        case Layout::piecewise_planar:
            for (int b = 0; b < spec.boxes; ++b) {
                const int bw = std::max(3, static_cast<int>(w * rng.range(0.15, 0.35)));
                const int bh = std::max(3, static_cast<int>(h * rng.range(0.15, 0.35)));
                const int x0 = static_cast<int>(rng.below(static_cast<std::size_t>(w - bw + 1)));
                const int y0 = static_cast<int>(rng.below(static_cast<std::size_t>(h - bh + 1)));
                const double cy = y0 + bh / 2.0;
                const Plane box{background.at(static_cast<int>(cy)) + rng.range(6.0, 20.0), rng.range(-0.1, 0.1), cy};
                for (int y = y0; y < y0 + bh; ++y) {
                    for (int x = x0; x < x0 + bw; ++x) d[static_cast<std::size_t>(y) * w + x] = box.at(y);
                }
            }
            break;
        case Layout::step_edge: {
            // Nearer surface on the left half: no left-view pixel is occluded.
            const int edge = w / 2;
            const Plane near{background.base + rng.range(8.0, 16.0), rng.range(-0.05, 0.05), h / 2.0};
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < edge; ++x) d[static_cast<std::size_t>(y) * w + x] = near.at(y);
            }
            break;
        }
    }
    // Float-representable values survive a PFM round trip unchanged.
    for (double& v : d) v = static_cast<float>(std::max(v, 1.0));
    return d;
}

// Right-view disparity seen through each right pixel: the nearest left-view
// surface whose scanline segment covers it. A disoccluded pixel copies its
// nearest covered neighbour (the farther surface on a tie), so interpolation
// taps next to a surface edge still read that surface.
std::vector<double> right_view_disparity(const std::vector<double>& left, int w, int h) {
    constexpr double kSameSurface = 1.0;
    const double none = -std::numeric_limits<double>::infinity();
    std::vector<double> right(left.size(), none);
    std::vector<int> from_left(static_cast<std::size_t>(w)), from_right(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        const double* row = left.data() + static_cast<std::size_t>(y) * w;
        double* out = right.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const double s = x - row[x];
            if (s >= 0.0 && s <= w - 1 && s == std::floor(s)) {
                auto& slot = out[static_cast<int>(s)];
                slot = std::max(slot, row[x]);
            }
            if (x + 1 >= w || std::abs(row[x + 1] - row[x]) > kSameSurface) continue;
            const double s0 = x - row[x];
            const double s1 = x + 1 - row[x + 1];
            const double lo = std::min(s0, s1);
            const double hi = std::max(s0, s1);
            for (int xr = std::max(0, static_cast<int>(std::ceil(lo))); xr <= std::min(w - 1, static_cast<int>(hi));
                 ++xr) {
                const double t = s1 == s0 ? 0.0 : (xr - s0) / (s1 - s0);
                out[xr] = std::max(out[xr], detail::lerp_taps(row[x], row[x + 1], t));
            }
        }
        int last = -1;
        for (int x = 0; x < w; ++x) {
            if (out[x] != none) last = x;
            from_left[static_cast<std::size_t>(x)] = last;
        }
        last = -1;
        for (int x = w - 1; x >= 0; --x) {
            if (out[x] != none) last = x;
            from_right[static_cast<std::size_t>(x)] = last;
        }
        const double row_min = *std::min_element(row, row + w);
        for (int x = 0; x < w; ++x) {
            if (out[x] != none) continue;
            const int a = from_left[static_cast<std::size_t>(x)];
            const int b = from_right[static_cast<std::size_t>(x)];
            if (a < 0 && b < 0) {
                out[x] = row_min;
            } else if (a < 0) {
                out[x] = out[b];
            } else if (b < 0) {
                out[x] = out[a];
            } else if (x - a != b - x) {
                out[x] = x - a < b - x ? out[a] : out[b];
            } else {
                out[x] = std::min(out[a], out[b]);
            }
        }
    }
    return right;
}

double texture_value(const SceneSpec& spec, int x, int y, int c, const std::vector<double>& params,
                     const std::vector<double>& noise) {
    const auto sinusoid = [&](int xx, int yy) {
        const double px = params[0];
        const double py = params[1];
        const double phase = params[2] + c * 2.0943951023931953;  // 2π/3 per channel
        const double a = std::sin(2.0 * std::numbers::pi * xx / px + phase);
        const double b = std::cos(2.0 * std::numbers::pi * yy / py + 0.5 * phase);
        const double fine = std::sin(2.0 * std::numbers::pi * (xx + 0.5 * yy) / params[3] + phase);
        return std::clamp(0.5 + 0.25 * a * b + 0.15 * fine, 0.0, 1.0);
    };
    switch (spec.texture) {
        case Texture::flat:
            return 0.5;
        case Texture::sinusoidal:
            return sinusoid(x, y);
        case Texture::noise:
            return noise[(static_cast<std::size_t>(y) * spec.width + x) * spec.channels + c];
        case Texture::textureless_band: {
            const int b0 = spec.width / 3;
            const int b1 = b0 + std::max(1, spec.width / 5);
            if (x >= b0 && x < b1) return 0.5;
            return sinusoid(x, y);
        }
    }
    return 0.5;
}

}  // namespace

Scene generate(const SceneSpec& spec) {
    spec.validate();
    const int w = spec.width;
    const int h = spec.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    UniformSource rng(spec.seed);

    std::vector<double> disparity = layout_disparity(spec, rng);
    const std::vector<double> right_disp = right_view_disparity(disparity, w, h);

    // Texture parameters are always drawn so the stream position after this
    // stage does not depend on the texture kind.
    const std::vector<double> tex_params{rng.range(7.0, 15.0), rng.range(9.0, 19.0), rng.range(0.0, 6.283185307179586),
                                         rng.range(3.0, 5.0)};
    std::vector<double> noise;
    if (spec.texture == Texture::noise) {
        noise.resize(n * static_cast<std::size_t>(spec.channels));
        for (double& v : noise) v = rng.range(0.1, 0.9);
    }

    Scene scene;
    scene.right = ImageBuffer(w, h, spec.channels, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < spec.channels; ++c) {
                scene.right(x, y, c) = static_cast<float>(texture_value(spec, x, y, c, tex_params, noise));
            }
        }
    }
    scene.left = ImageBuffer(w, h, spec.channels, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double s = std::clamp(x - disparity[static_cast<std::size_t>(y) * w + x], 0.0, w - 1.0);
            const detail::Stencil st = detail::stencil_at(s, w);
            for (int c = 0; c < spec.channels; ++c) {
                scene.left(x, y, c) = detail::lerp_taps(scene.right(st.x0, y, c), scene.right(st.x1, y, c), st.t);
            }
        }
    }

    scene.disparity_gt = ScalarMap(w, h, disparity);
    scene.right_disparity = ScalarMap(w, h, right_disp);
    scene.depth = scene.disparity_gt.transform(spec.depth_transform);
    scene.corruption = ScalarMap(w, h, 0.0);

    std::vector<double> est = disparity;
    auto mark = [&](std::size_t i, double delta) {
        est[i] = std::max(est[i] + delta, kDisparityFloor);
        scene.corruption.values()[i] = 1.0;
    };
    switch (spec.corruption.kind) {
        case CorruptionKind::none:
            break;
        case CorruptionKind::salt: {
            const auto count = static_cast<std::size_t>(std::llround(spec.corruption.fraction * static_cast<double>(n)));
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t j = 0; j < count; ++j) {
                std::swap(order[j], order[j + rng.below(n - j)]);
                const double sign = rng.next() < 0.5 ? -1.0 : 1.0;
                mark(order[j], sign * spec.corruption.magnitude);
            }
            break;
        }
        case CorruptionKind::region: {
            Rect r = spec.corruption.region;
            if (r.width <= 0 || r.height <= 0) {
                r.width = std::max(1, w / 5);
                r.height = std::max(1, h / 5);
                r.x = static_cast<int>(rng.below(static_cast<std::size_t>(w - r.width + 1)));
                r.y = static_cast<int>(rng.below(static_cast<std::size_t>(h - r.height + 1)));
            }
            for (int y = std::max(0, r.y); y < std::min(h, r.y + r.height); ++y) {
                for (int x = std::max(0, r.x); x < std::min(w, r.x + r.width); ++x) {
                    mark(static_cast<std::size_t>(y) * w + x, spec.corruption.magnitude);
                }
            }
            break;
        }
    }
    scene.disparity_est = ScalarMap(w, h, std::move(est));
    const auto cm = scene.corruption.values();
    scene.corrupted_count = static_cast<std::size_t>(std::count(cm.begin(), cm.end(), 1.0));
    return scene;
}

}  // namespace depthvote::synth
