#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "depthvote/core.hpp"
#include "depthvote/ddcv.hpp"
#include "depthvote/errors.hpp"
#include "depthvote/eval.hpp"
#include "depthvote/imgio.hpp"
#include "depthvote/losses.hpp"
#include "depthvote/synth.hpp"

namespace py = pybind11;
using namespace depthvote;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Maps cross the boundary as 2-D float64 arrays; NaN marks an invalid pixel.
ScalarMap to_map(const Array& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    std::vector<double> values(a.data(), a.data() + a.size());
    std::vector<std::uint8_t> valid(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        valid[i] = std::isnan(values[i]) ? 0 : 1;
        if (!valid[i]) values[i] = 0.0;
    }
    return ScalarMap(w, h, std::move(values), std::move(valid));
}

Array from_map(const ScalarMap& m) {
    Array out({m.height(), m.width()});
    double* p = out.mutable_data();
    for (std::size_t i = 0; i < m.size(); ++i)
        p[i] = m.valid(i) ? m.values()[i] : std::numeric_limits<double>::quiet_NaN();
    return out;
}

// Images are (H, W) or (H, W, C) with intensities in [0, 1].
ImageBuffer to_image(const Array& a) {
    if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an (H, W) or (H, W, C) array");
    const int h = static_cast<int>(a.shape(0));
    const int w = static_cast<int>(a.shape(1));
    const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
    return ImageBuffer(w, h, c, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_image(const ImageBuffer& img) {
    std::vector<py::ssize_t> shape{img.height(), img.width()};
    if (img.channels() != 1) shape.push_back(img.channels());
    Array out(shape);
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

ddcv::DdcvParams ddcv_params(int window, int dilation, double sigma, double stable, const std::string& mode) {
    ddcv::DdcvParams p;
    p.spec = {window, dilation};
    p.sigma = sigma;
    p.stable_disparity_threshold = stable;
    p.mode = ddcv::parse_formula_mode(mode);
    p.validate();
    return p;
}

// Runs a loss with an optional gradient and returns value or (value, grad map).
template <typename F>
py::object with_grad(const ScalarMap& disparity, bool gradient, F&& f) {
    if (!gradient) return py::float_(f(std::span<double>{}));
    std::vector<double> g(disparity.size(), 0.0);
    const double v = f(std::span<double>(g));
    ScalarMap gm(disparity.width(), disparity.height(), std::move(g));
    return py::make_tuple(v, from_map(gm));
}

py::dict curve_dict(const eval::SparsificationCurve& c) {
    std::vector<double> density, epe;
    for (const auto& s : c.samples) {
        density.push_back(s.density);
        epe.push_back(s.epe);
    }
    py::dict d;
    d["density"] = density;
    d["epe"] = epe;
    d["auc"] = c.auc;
    return d;
}

}  // namespace

PYBIND11_MODULE(_depthvote, m) {
    m.doc() = "Confidence voting and self-supervised losses for stereo disparity.";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base.ptr());
    py::register_exception<DegenerateInput>(m, "DegenerateInput", base.ptr());
    py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());

    m.def(
        "confidence_map",
        [](const Array& disparity, const Array& depth, int window, int dilation, double sigma, double stable,
           const std::string& mode) {
            const auto p = ddcv_params(window, dilation, sigma, stable, mode);
            const ScalarMap d = to_map(disparity), t = to_map(depth);
            ScalarMap c;
            {
                py::gil_scoped_release release;
                c = ddcv::confidence_map(d, t, p);
            }
            return from_map(c);
        },
        py::arg("disparity"), py::arg("depth"), py::arg("window") = 11, py::arg("dilation") = 1,
        py::arg("sigma") = 2.0, py::arg("stable_disparity_threshold") = 1.0, py::arg("mode") = "prose",
        "Per-pixel confidence in [0, 1]; NaN where undefined.");

    m.def(
        "global_scale",
        [](const Array& disparity, const Array& depth, int window, int dilation) {
            NeighborhoodSpec spec{window, dilation};
            spec.validate();
            return ddcv::global_scale(to_map(disparity), to_map(depth), spec);
        },
        py::arg("disparity"), py::arg("depth"), py::arg("window") = 11, py::arg("dilation") = 1);

    m.def(
        "photometric_loss",
        [](const Array& left, const Array& right, const Array& disparity, bool gradient) {
            const ImageBuffer l = to_image(left), r = to_image(right);
            const ScalarMap d = to_map(disparity);
            return with_grad(d, gradient, [&](std::span<double> g) { return loss::photometric_loss(l, r, d, g); });
        },
        py::arg("left"), py::arg("right"), py::arg("disparity"), py::arg("gradient") = false);

    m.def(
        "lrc_loss",
        [](const Array& disparity, const Array& right_disparity, bool gradient) {
            const ScalarMap d = to_map(disparity), rd = to_map(right_disparity);
            return with_grad(d, gradient, [&](std::span<double> g) { return loss::lrc_loss(d, rd, g); });
        },
        py::arg("disparity"), py::arg("right_disparity"), py::arg("gradient") = false);

    m.def(
        "ldr_loss",
        [](const Array& disparity, const Array& depth, const Array& confidence, int k, int window, int dilation,
           bool gradient) {
            loss::LdrParams p;
            p.k = k;
            p.spec = {window, dilation};
            p.validate();
            const ScalarMap d = to_map(disparity), t = to_map(depth);
            const auto refs = loss::select_references(to_map(confidence), p);
            return with_grad(d, gradient, [&](std::span<double> g) { return loss::ldr_loss(d, t, refs, g); });
        },
        py::arg("disparity"), py::arg("depth"), py::arg("confidence"), py::arg("k") = 8, py::arg("window") = 11,
        py::arg("dilation") = 2, py::arg("gradient") = false);

    m.def(
        "smoothness_image",
        [](const Array& disparity, const Array& left, bool gradient) {
            const ScalarMap d = to_map(disparity);
            const ImageBuffer l = to_image(left);
            return with_grad(d, gradient, [&](std::span<double> g) { return loss::smoothness_image(d, l, g); });
        },
        py::arg("disparity"), py::arg("left"), py::arg("gradient") = false);

    m.def(
        "smoothness_depth",
        [](const Array& disparity, const Array& depth, bool gradient) {
            const ScalarMap d = to_map(disparity), t = to_map(depth);
            return with_grad(d, gradient, [&](std::span<double> g) { return loss::smoothness_depth(d, t, g); });
        },
        py::arg("disparity"), py::arg("depth"), py::arg("gradient") = false);

    m.def(
        "dds_loss",
        [](const Array& disparity, const Array& depth, bool gradient) {
            const ScalarMap d = to_map(disparity), t = to_map(depth);
            return with_grad(d, gradient, [&](std::span<double> g) { return loss::dds_loss(d, t, g); });
        },
        py::arg("disparity"), py::arg("depth"), py::arg("gradient") = false);

    m.def("epe", [](const Array& est, const Array& gt) { return eval::epe(to_map(est), to_map(gt)); },
          py::arg("est"), py::arg("gt"));
    m.def(
        "pep",
        [](const Array& est, const Array& gt, double delta) { return eval::pep(to_map(est), to_map(gt), delta); },
        py::arg("est"), py::arg("gt"), py::arg("delta"));
    m.def("d1", [](const Array& est, const Array& gt) { return eval::d1(to_map(est), to_map(gt)); },
          py::arg("est"), py::arg("gt"));
    m.def(
        "sparsification",
        [](const Array& est, const Array& gt, const Array& confidence, int steps) {
            return curve_dict(eval::sparsification(to_map(est), to_map(gt), to_map(confidence), steps));
        },
        py::arg("est"), py::arg("gt"), py::arg("confidence"), py::arg("steps") = 100);
    m.def(
        "optimal_curve",
        [](const Array& est, const Array& gt, int steps) {
            return curve_dict(eval::optimal_curve(to_map(est), to_map(gt), steps));
        },
        py::arg("est"), py::arg("gt"), py::arg("steps") = 100);

    m.def(
        "generate",
        [](int width, int height, int channels, const std::string& layout, int boxes, const std::string& texture,
           const std::string& transform, double scale, double offset, double exponent, const std::string& corruption,
           double fraction, double magnitude, std::uint32_t seed) {
            synth::SceneSpec s;
            s.width = width;
            s.height = height;
            s.channels = channels;
            s.layout = synth::parse_layout(layout);
            s.boxes = boxes;
            s.texture = synth::parse_texture(texture);
            s.depth_transform = {synth::parse_transform(transform), scale, offset, exponent};
            s.corruption.kind = synth::parse_corruption(corruption);
            s.corruption.fraction = fraction;
            s.corruption.magnitude = magnitude;
            s.seed = seed;
            s.validate();
            const auto scene = synth::generate(s);
            py::dict d;
            d["left"] = from_image(scene.left);
            d["right"] = from_image(scene.right);
            d["disparity_gt"] = from_map(scene.disparity_gt);
            d["disparity_est"] = from_map(scene.disparity_est);
            d["right_disparity"] = from_map(scene.right_disparity);
            d["depth"] = from_map(scene.depth);
            d["corruption"] = from_map(scene.corruption);
            d["corrupted_count"] = scene.corrupted_count;
            return d;
        },
        py::arg("width") = 128, py::arg("height") = 128, py::arg("channels") = 1,
        py::arg("layout") = "piecewise-planar", py::arg("boxes") = 4, py::arg("texture") = "sinusoidal",
        py::arg("transform") = "affine", py::arg("scale") = 1.0, py::arg("offset") = 0.0, py::arg("exponent") = 1.5,
        py::arg("corruption") = "none", py::arg("fraction") = 0.05, py::arg("magnitude") = 20.0,
        py::arg("seed") = 1, "Synthetic stereo scene as a dict of arrays.");

    m.def("read_map", [](const std::filesystem::path& path) { return from_map(io::read_map(path)); },
          py::arg("path"));
    m.def("write_map", [](const Array& map, const std::filesystem::path& path) { io::write_map(to_map(map), path); },
          py::arg("map"), py::arg("path"));
    m.def("read_image", [](const std::filesystem::path& path) { return from_image(io::read_image(path)); },
          py::arg("path"));
    m.def(
        "write_image",
        [](const Array& image, const std::filesystem::path& path) { io::write_image(to_image(image), path); },
        py::arg("image"), py::arg("path"));
}
