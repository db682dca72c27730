#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <vector>

#include "depthvote/core.hpp"

namespace depthvote::eval {

// Pixels count when valid in both the estimate and the ground truth. Every
// function throws InvalidInput when no pixel counts.

/// Mean absolute disparity error.
double epe(const ScalarMap& est, const ScalarMap& gt);

/// Percentage of counted pixels with error above `delta` pixels.
double pep(const ScalarMap& est, const ScalarMap& gt, double delta);

/// Percentage of counted pixels whose error exceeds both 3 px and 5% of gt.
double d1(const ScalarMap& est, const ScalarMap& gt);

struct DisparityMetrics {
    double epe = 0.0;
    std::map<double, double> pep;  // delta -> percentage
    double d1 = 0.0;
};

DisparityMetrics disparity_metrics(const ScalarMap& est, const ScalarMap& gt, const std::vector<double>& deltas);

struct CurveSample {
    double density = 0.0;
    double epe = 0.0;
};

struct SparsificationCurve {
    std::vector<CurveSample> samples;
    double auc = 0.0;
};

/// Density-EPE curve: counted pixels are added in descending confidence
/// (ties by row-major index; pixels without a valid confidence go last) and
/// the retained-subset EPE is sampled at densities i/steps. The last sample
/// equals epe(est, gt) exactly.
///
/// auc = 100 · ∫ EPE d(density) by the trapezoid rule, with the curve held at
/// its first sample over [0, 1/steps].
///
/// Throws std::invalid_argument when steps < 2 or fewer than `steps` pixels
/// count.
SparsificationCurve sparsification(const ScalarMap& est, const ScalarMap& gt, const ScalarMap& confidence,
                                   int steps = 100);

/// The curve obtained by ordering on the true error (ascending).
SparsificationCurve optimal_curve(const ScalarMap& est, const ScalarMap& gt, int steps = 100);

/// AUC of optimal_curve; a lower bound on the AUC of any confidence map.
double optimal_auc(const ScalarMap& est, const ScalarMap& gt, int steps = 100);

/// Area under sampled (density, epe) points using the convention above.
double curve_auc(const std::vector<CurveSample>& samples);

/// Milliseconds per megapixel for a run of `elapsed_ms` over `pixels` pixels.
double ms_per_megapixel(double elapsed_ms, double pixels);

/// Median wall-clock time of `kernel` over `repetitions` runs (>= 3),
/// normalised to one megapixel.
double time_per_megapixel(const std::function<void()>& kernel, double pixels, int repetitions = 10);

}  // namespace depthvote::eval
