#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace depthvote::tools {

struct GradcheckOptions {
    int width = 32;
    int height = 32;
    std::uint32_t seed = 1;
    int samples = 200;  ///< pixels checked per term
    double step = 1e-4;
    double tolerance = 1e-4;
    std::optional<std::string> inject_fault;  ///< term whose analytic gradient is negated
};

struct TermResult {
    std::string term;
    int checked = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

/// Term names accepted by --inject-fault, in report order.
const std::vector<std::string>& gradcheck_terms();

/// Compares analytic and central-difference gradients of every loss term on
/// a seeded random instance, skipping pixels near a kink of the term.
std::vector<TermResult> run_gradcheck(const GradcheckOptions& options);

}  // namespace depthvote::tools
