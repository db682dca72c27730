// depthvote command-line front end.
//
// Exit codes: 0 success, 1 runtime failure (I/O, invalid data, failed
// gradient check), 2 usage or shape error, 3 degenerate input.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "depthvote/ddcv.hpp"
#include "depthvote/eval.hpp"
#include "depthvote/imgio.hpp"
#include "depthvote/losses.hpp"
#include "depthvote/synth.hpp"
#include "gradcheck.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace depthvote;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDegenerate = 3;

// Writes CSV to `out` when given, else to stdout.
void emit_csv(const std::string& out, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
    if (out.empty()) {
        std::cout << io::to_csv(header, rows);
    } else {
        io::write_csv(out, header, rows);
    }
}

struct DdcvFlags {
    int window = 11;
    int dilation = 1;
    double sigma = 2.0;
    double stable = 1.0;
    std::string mode = "prose";

    void add(CLI::App* cmd, const std::string& prefix) {
        cmd->add_option("--" + prefix + "window", window, "voting window size (odd)")->capture_default_str();
        cmd->add_option("--" + prefix + "dilation", dilation, "voting window dilation")->capture_default_str();
        cmd->add_option("--sigma", sigma, "variation tolerance (> 1)")->capture_default_str();
        cmd->add_option("--stable-threshold", stable, "disparity step treated as flat, in pixels")
            ->capture_default_str();
        cmd->add_option("--formula-mode", mode, "prose or literal")->capture_default_str();
    }

    ddcv::DdcvParams params() const {
        ddcv::DdcvParams p;
        p.spec = {window, dilation};
        p.sigma = sigma;
        p.stable_disparity_threshold = stable;
        p.mode = ddcv::parse_formula_mode(mode);
        p.validate();
        return p;
    }
};

void apply_threads(unsigned threads) { set_max_threads(threads); }

// confidence -------------------------------------------------------------------

struct ConfidenceCmd {
    std::string disparity, depth, out, png;
    DdcvFlags ddcv;
    unsigned threads = 0;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("confidence", "DDCV confidence from disparity and relative depth");
        cmd->add_option("--disparity", disparity, "disparity map (.pfm or .png)")->required();
        cmd->add_option("--depth", depth, "relative depth map (.pfm)")->required();
        cmd->add_option("--out", out, "confidence output (.pfm)")->required();
        cmd->add_option("--png", png, "optional colourised preview (.png)");
        ddcv.add(cmd, "");
        cmd->add_option("--threads", threads, "worker cap, 0 = all cores");
        cmd->callback([this] { run(); });
    }

    void run() {
        apply_threads(threads);
        const auto params = ddcv.params();
        const ScalarMap d = io::read_map(disparity);
        const ScalarMap t = io::read_map(depth);
        require_same_shape(d.width(), d.height(), t.width(), t.height(), "disparity and depth");
        const auto start = std::chrono::steady_clock::now();
        const ScalarMap c = ddcv::confidence_map(d, t, params);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        io::write_map(c, out, io::MapFormat::pfm);
        if (!png.empty()) io::write_colorized_png(c, png);
        const double mean = c.valid_count() ? map_stats(c).mean : 0.0;
        std::printf("mean confidence: %.6f\n", mean);
        std::fprintf(stderr, "time/MP: %.3f ms\n", eval::ms_per_megapixel(ms, static_cast<double>(c.size())));
    }
};

// loss -------------------------------------------------------------------------

struct LossCmd {
    std::string left, right, disparity, right_disparity, depth, confidence, out, grad;
    loss::LossWeights weights;
    int k = 8, window = 11, dilation = 2;
    DdcvFlags ddcv;
    unsigned threads = 0;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("loss", "evaluate the hybrid loss and optionally its gradient");
        cmd->add_option("--left", left, "left image")->required();
        cmd->add_option("--right", right, "right image")->required();
        cmd->add_option("--disparity", disparity, "left disparity map")->required();
        cmd->add_option("--right-disparity", right_disparity, "right disparity map (needed when lambda1 > 0)");
        cmd->add_option("--depth", depth, "relative depth map (needed when lambda2 or lambda3 > 0)");
        cmd->add_option("--confidence", confidence, "reference confidence; DDCV is used when omitted");
        cmd->add_option("--lambda1", weights.lrc, "left-right consistency weight")->capture_default_str();
        cmd->add_option("--lambda2", weights.ldr, "local depth ranking weight")->capture_default_str();
        cmd->add_option("--lambda3", weights.dds, "dual smoothness weight")->capture_default_str();
        cmd->add_option("--k", k, "reference points per pixel")->capture_default_str();
        cmd->add_option("--window", window, "reference sampling window")->capture_default_str();
        cmd->add_option("--dilation", dilation, "reference sampling dilation")->capture_default_str();
        ddcv.add(cmd, "ddcv-");
        cmd->add_option("--out", out, "CSV report (stdout when omitted)");
        cmd->add_option("--grad", grad, "gradient of the total w.r.t. disparity (.pfm)");
        cmd->add_option("--threads", threads, "worker cap, 0 = all cores");
        cmd->callback([this] { run(); });
    }

    void run() {
        apply_threads(threads);
        weights.validate();
        if (weights.lrc > 0.0 && right_disparity.empty()) throw UsageError("--right-disparity is required when lambda1 > 0");
        if ((weights.ldr > 0.0 || weights.dds > 0.0) && depth.empty()) {
            throw UsageError("--depth is required when lambda2 or lambda3 > 0");
        }
        loss::LdrParams ldr;
        ldr.k = k;
        ldr.spec = {window, dilation};
        ldr.validate();

        const ImageBuffer il = io::read_image(left);
        const ImageBuffer ir = io::read_image(right);
        const ScalarMap d = io::read_map(disparity);
        require_same_shape(il.width(), il.height(), d.width(), d.height(), "left image and disparity");
        std::optional<ScalarMap> dr, t, c;
        if (!right_disparity.empty()) {
            dr = io::read_map(right_disparity);
            require_same_shape(dr->width(), dr->height(), d.width(), d.height(), "right disparity and disparity");
        }
        if (!depth.empty()) {
            t = io::read_map(depth);
            require_same_shape(t->width(), t->height(), d.width(), d.height(), "depth and disparity");
        }
        if (t && weights.ldr > 0.0) {
            c = confidence.empty() ? ddcv::confidence_map(d, *t, ddcv.params()) : io::read_map(confidence);
            require_same_shape(c->width(), c->height(), d.width(), d.height(), "confidence and disparity");
        }
        const loss::LossInputs in{&il, &ir, &d, dr ? &*dr : nullptr, t ? &*t : nullptr, c ? &*c : nullptr};
        const auto report = loss::hybrid_loss(in, weights, ldr, !grad.empty());
        emit_csv(out, {"term", "value"},
                 {{"photometric", io::format_number(report.photometric)},
                  {"lrc", io::format_number(report.lrc)},
                  {"ldr", io::format_number(report.ldr)},
                  {"dds", io::format_number(report.dds)},
                  {"total", io::format_number(report.total)}});
        if (!grad.empty()) io::write_map(*report.grad, grad, io::MapFormat::pfm);
    }
};

// eval-disp --------------------------------------------------------------------

struct EvalCmd {
    std::string est, gt, out;
    std::vector<double> deltas{1.0, 2.0, 3.0};

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("eval-disp", "EPE, PEP and D1 of a disparity estimate");
        cmd->add_option("--est", est, "estimated disparity")->required();
        cmd->add_option("--gt", gt, "ground-truth disparity")->required();
        cmd->add_option("--deltas", deltas, "PEP tolerances in pixels")->delimiter(',')->capture_default_str();
        cmd->add_option("--out", out, "CSV report (stdout when omitted)");
        cmd->callback([this] { run(); });
    }

    void run() {
        for (double dlt : deltas) {
            if (!(dlt > 0.0)) throw UsageError("PEP tolerances must be positive");
        }
        const ScalarMap e = io::read_map(est);
        const ScalarMap g = io::read_map(gt);
        const auto m = eval::disparity_metrics(e, g, deltas);
        std::vector<std::vector<std::string>> rows{{"epe", io::format_number(m.epe)}};
        for (double dlt : deltas) rows.push_back({"pep-" + io::format_number(dlt), io::format_number(m.pep.at(dlt))});
        rows.push_back({"d1", io::format_number(m.d1)});
        emit_csv(out, {"metric", "value"}, rows);
    }
};

// sparsify ---------------------------------------------------------------------

struct SparsifyCmd {
    std::string est, gt, conf, out;
    int steps = 100;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("sparsify", "density-EPE curve, AUC and optimal AUC");
        cmd->add_option("--est", est, "estimated disparity")->required();
        cmd->add_option("--gt", gt, "ground-truth disparity")->required();
        cmd->add_option("--confidence", conf, "confidence map")->required();
        cmd->add_option("--steps", steps, "density levels (>= 2)")->capture_default_str();
        cmd->add_option("--out", out, "CSV curve (stdout when omitted)");
        cmd->callback([this] { run(); });
    }

    void run() {
        if (steps < 2) throw UsageError("--steps must be at least 2");
        const ScalarMap e = io::read_map(est);
        const ScalarMap g = io::read_map(gt);
        const ScalarMap c = io::read_map(conf);
        const auto curve = eval::sparsification(e, g, c, steps);
        std::vector<std::vector<std::string>> rows;
        for (const auto& s : curve.samples) rows.push_back({io::format_number(s.density), io::format_number(s.epe)});
        rows.push_back({"auc", io::format_number(curve.auc)});
        rows.push_back({"optimal_auc", io::format_number(eval::optimal_auc(e, g, steps))});
        emit_csv(out, {"density", "epe"}, rows);
    }
};

// synth ------------------------------------------------------------------------

struct SynthCmd {
    std::string out_dir;
    synth::SceneSpec spec;
    std::string layout = "piecewise-planar", texture = "sinusoidal", transform = "affine", corruption = "none";
    std::vector<int> region;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("synth", "generate a synthetic stereo scene");
        cmd->add_option("--out-dir", out_dir, "output directory")->required();
        cmd->add_option("--width", spec.width)->capture_default_str();
        cmd->add_option("--height", spec.height)->capture_default_str();
        cmd->add_option("--channels", spec.channels, "1 or 3")->capture_default_str();
        cmd->add_option("--layout", layout, "planar-ramp, piecewise-planar or step-edge")->capture_default_str();
        cmd->add_option("--boxes", spec.boxes, "foreground boxes (piecewise-planar)")->capture_default_str();
        cmd->add_option("--texture", texture, "flat, sinusoidal, noise or texture-less-band")->capture_default_str();
        cmd->add_option("--depth-transform", transform, "affine or power")->capture_default_str();
        cmd->add_option("--scale", spec.depth_transform.scale, "affine slope")->capture_default_str();
        cmd->add_option("--offset", spec.depth_transform.offset, "affine intercept")->capture_default_str();
        cmd->add_option("--exponent", spec.depth_transform.exponent, "power exponent")->capture_default_str();
        cmd->add_option("--corruption", corruption, "none, salt or region")->capture_default_str();
        cmd->add_option("--fraction", spec.corruption.fraction, "salt fraction")->capture_default_str();
        cmd->add_option("--magnitude", spec.corruption.magnitude, "corruption magnitude")->capture_default_str();
        cmd->add_option("--region", region, "x,y,width,height of the region corruption")->delimiter(',')->expected(4);
        cmd->add_option("--seed", spec.seed)->capture_default_str();
        cmd->callback([this] { run(); });
    }

    void run() {
        try {
            spec.layout = synth::parse_layout(layout);
            spec.texture = synth::parse_texture(texture);
            spec.depth_transform.kind = synth::parse_transform(transform);
            spec.corruption.kind = synth::parse_corruption(corruption);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (!region.empty()) spec.corruption.region = {region[0], region[1], region[2], region[3]};
        spec.validate();
        const synth::Scene s = synth::generate(spec);

        const fs::path dir(out_dir);
        fs::create_directories(dir);
        io::write_image(s.left, dir / "left.pfm");
        io::write_image(s.right, dir / "right.pfm");
        io::write_image(s.left, dir / "left.png");
        io::write_image(s.right, dir / "right.png");
        io::write_map(s.disparity_gt, dir / "disparity_gt.pfm");
        io::write_map(s.disparity_est, dir / "disparity_est.pfm");
        io::write_map(s.right_disparity, dir / "right_disparity.pfm");
        io::write_map(s.depth, dir / "depth.pfm");
        io::write_map(s.corruption, dir / "corruption_mask.pfm");

        nlohmann::ordered_json m;
        m["width"] = spec.width;
        m["height"] = spec.height;
        m["channels"] = spec.channels;
        m["layout"] = std::string(synth::to_string(spec.layout));
        m["boxes"] = spec.boxes;
        m["texture"] = std::string(synth::to_string(spec.texture));
        m["depth_transform"] = {{"kind", std::string(synth::to_string(spec.depth_transform.kind))},
                                {"scale", spec.depth_transform.scale},
                                {"offset", spec.depth_transform.offset},
                                {"exponent", spec.depth_transform.exponent}};
        m["corruption"] = {{"kind", std::string(synth::to_string(spec.corruption.kind))},
                           {"fraction", spec.corruption.fraction},
                           {"magnitude", spec.corruption.magnitude},
                           {"count", s.corrupted_count},
                           {"mask_empty", s.corrupted_count == 0}};
        m["seed"] = spec.seed;
        m["files"] = {{"left", "left.pfm"},
                      {"right", "right.pfm"},
                      {"left_preview", "left.png"},
                      {"right_preview", "right.png"},
                      {"disparity_gt", "disparity_gt.pfm"},
                      {"disparity_est", "disparity_est.pfm"},
                      {"right_disparity", "right_disparity.pfm"},
                      {"depth", "depth.pfm"},
                      {"corruption_mask", "corruption_mask.pfm"}};
        io::atomic_write(dir / "manifest.json", m.dump(2) + "\n");
    }
};

// gradcheck --------------------------------------------------------------------

struct GradcheckCmd {
    tools::GradcheckOptions options;
    std::string fault;
    int size = 0;
    bool failed = false;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("gradcheck", "compare analytic and numeric loss gradients");
        cmd->add_option("--seed", options.seed)->capture_default_str();
        cmd->add_option("--size", size, "square instance size (overrides width/height)");
        cmd->add_option("--width", options.width)->capture_default_str();
        cmd->add_option("--height", options.height)->capture_default_str();
        cmd->add_option("--samples", options.samples, "pixels checked per term")->capture_default_str();
        cmd->add_option("--inject-fault", fault)->group("");  // hidden, negates one term's gradient
        cmd->callback([this] { run(); });
    }

    void run() {
        if (size > 0) options.width = options.height = size;
        if (!fault.empty()) options.inject_fault = fault;
        const auto results = tools::run_gradcheck(options);
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : results) {
            rows.push_back({r.term, std::to_string(r.checked), io::format_number(r.max_rel_error),
                            r.passed ? "pass" : "FAIL"});
            failed = failed || !r.passed;
        }
        std::cout << io::to_csv({"term", "checked", "max_rel_error", "status"}, rows);
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depthvote: disparity-depth consistency confidence, losses and evaluation"};
    app.require_subcommand(1);
    ConfidenceCmd confidence;
    LossCmd loss_cmd;
    EvalCmd eval_cmd;
    SparsifyCmd sparsify;
    SynthCmd synth_cmd;
    GradcheckCmd gradcheck;
    confidence.add(app);
    loss_cmd.add(app);
    eval_cmd.add(app);
    sparsify.add(app);
    synth_cmd.add(app);
    gradcheck.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e, std::cerr, std::cerr);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "depthvote: usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "depthvote: usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ShapeMismatch& e) {
        std::cerr << "depthvote: error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DegenerateInput& e) {
        std::cerr << "depthvote: error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const std::exception& e) {
        std::cerr << "depthvote: error: " << e.what() << "\n";
        return kExitFailure;
    }
    return gradcheck.failed ? kExitFailure : 0;
}
