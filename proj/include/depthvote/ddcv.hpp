#pragma once

#include <string_view>

#include "depthvote/core.hpp"

namespace depthvote::ddcv {

/// How the variation-consistency vote is evaluated.
///
/// `prose` rejects flat disparity across a strong depth discontinuity and wild
/// disparity inside a depth-stable region. `literal` evaluates the nested step
/// expression exactly as it is usually printed, which votes the other way in
/// both of those cases; it is kept for auditing.
enum class FormulaMode { prose, literal };

FormulaMode parse_formula_mode(std::string_view name);
std::string_view to_string(FormulaMode mode);

struct DdcvParams {
    NeighborhoodSpec spec{11, 1};
    double sigma = 2.0;                       ///< > 1, loosens the variation check
    double stable_disparity_threshold = 1.0;  ///< pixels; below this a disparity pair counts as flat
    FormulaMode mode = FormulaMode::prose;

    void validate() const;
};

/// Ratio of summed |Δ relative depth| to summed |Δ disparity| over every
/// neighbour pair valid in both maps.
///
/// Throws DegenerateInput if the disparity sum is zero (constant disparity or
/// no valid pairs) and ShapeMismatch if the maps differ in size.
double global_scale(const ScalarMap& disparity, const ScalarMap& depth, const NeighborhoodSpec& spec);

/// Ranking-consistency vote: 1 iff the two variations do not disagree in sign.
inline int vote_rc(double d_disp, double d_depth) { return step(d_depth * d_disp); }

/// Variation-consistency vote. Requires gamma > 0.
int vote_vc(double d_disp, double d_depth, double gamma, const DdcvParams& params);

/// Combined vote from q to p.
int vote(Pixel p, Pixel q, const ScalarMap& disparity, const ScalarMap& depth, double gamma, const DdcvParams& params);

/// Per-pixel confidence: the fraction of positive votes among valid in-window
/// neighbours. Non-finite values count as invalid. Pixels invalid in either
/// input, or with no valid neighbour, come out invalid with value 0. The
/// result does not depend on the thread count.
ScalarMap confidence_map(const ScalarMap& disparity, const ScalarMap& depth, const DdcvParams& params = {});

/// Same as confidence_map but with a caller-supplied global scale.
ScalarMap confidence_map_with_scale(const ScalarMap& disparity, const ScalarMap& depth, double gamma,
                                    const DdcvParams& params);

namespace detail {
/// Restricts the confidence kernels to the portable code path, which is what
/// CPUs without AVX-512 run. Results are identical either way.
void force_portable_kernels(bool on);
}  // namespace detail

}  // namespace depthvote::ddcv
