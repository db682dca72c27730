#pragma once

#include <cmath>

namespace depthvote::detail {

// Taps used to sample a scanline at a fractional coordinate s in [0, width-1].
struct Stencil {
    int x0;    // left tap
    int x1;    // right tap (== x0 on the last column)
    double t;  // weight of x1
    int s0;    // slope = row[s1] - row[s0]
    int s1;
};

inline Stencil stencil_at(double s, int width) {
    Stencil st{};
    st.x0 = static_cast<int>(std::floor(s));
    if (st.x0 >= width - 1) {
        st.x0 = width - 1;
        st.x1 = width - 1;
        st.t = 0.0;
        st.s0 = width > 1 ? width - 2 : 0;
        st.s1 = width - 1;
    } else {
        st.x1 = st.x0 + 1;
        st.t = s - st.x0;
        st.s0 = st.x0;
        st.s1 = st.x1;
    }
    return st;
}

// v0 + t·(v1 - v0) reproduces a locally constant row exactly.
inline double lerp_taps(double v0, double v1, double t) { return v0 + t * (v1 - v0); }

}  // namespace depthvote::detail
