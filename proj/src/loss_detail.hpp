#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>

#include "depthvote/core.hpp"

namespace depthvote::loss::detail {

inline void prepare_grad(std::span<double> grad, const ScalarMap& disparity) {
    if (grad.empty()) return;
    if (grad.size() != disparity.size()) {
        throw std::invalid_argument("gradient buffer size does not match the disparity map");
    }
    std::fill(grad.begin(), grad.end(), 0.0);
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace depthvote::loss::detail
