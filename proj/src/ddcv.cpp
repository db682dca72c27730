#include "depthvote/ddcv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace depthvote::ddcv {

FormulaMode parse_formula_mode(std::string_view name) {
    if (name == "prose") return FormulaMode::prose;
    if (name == "literal") return FormulaMode::literal;
    throw std::invalid_argument("unknown formula mode '" + std::string(name) + "' (expected prose|literal)");
}

std::string_view to_string(FormulaMode mode) { return mode == FormulaMode::prose ? "prose" : "literal"; }

void DdcvParams::validate() const {
    spec.validate();
    if (!(sigma > 1.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be > 1");
    if (!(stable_disparity_threshold > 0.0) || !std::isfinite(stable_disparity_threshold)) {
        throw std::invalid_argument("stable disparity threshold must be > 0");
    }
}

namespace {

// Θ applied to an already-finite argument.
inline int theta(double x) { return x >= 0.0 ? 1 : 0; }

struct VoteRule {
    double gamma;
    double sigma;
    double stable;
    bool literal;

    int vc(double d_disp, double d_depth) const {
        const double a = std::abs(d_depth);
        const double b = std::abs(d_disp);
        if (literal) {
            return theta(theta(a - gamma * sigma) * (1.0 - b)) * theta(theta(gamma - a) * (b - sigma));
        }
        const double u = a / gamma;
        const bool flat_at_edge = u >= sigma && b < stable;
        const bool wild_in_flat = u <= 1.0 && b > sigma;
        return (flat_at_edge || wild_in_flat) ? 0 : 1;
    }
};

VoteRule make_rule(double gamma, const DdcvParams& params) {
    return {gamma, params.sigma, params.stable_disparity_threshold, params.mode == FormulaMode::literal};
}

// Smallest a >= 0 with pred(a), for pred monotone in a and true near `guess`.
template <class Pred>
double first_true(double guess, Pred pred) {
    double a = guess;
    if (pred(a)) {
        while (a > 0.0 && pred(std::nextafter(a, 0.0))) a = std::nextafter(a, 0.0);
    } else {
        while (!pred(a)) a = std::nextafter(a, INFINITY);
    }
    return a;
}

// VoteRule with every comparison against |ΔD̃| precomputed, so the kernels
// need no division. Prose: fl(a / γ) >= σ iff a >= edge, and fl(a / γ) <= 1
// iff a <= flat. Literal: edge = γσ and flat = γ, since the sign of an IEEE
// difference is exact.
struct Kernel {
    double edge;
    double flat;
    double sigma;
    double stable;
    bool literal;
};

Kernel make_kernel(const VoteRule& rule) {
    const double g = rule.gamma;
    const double s = rule.sigma;
    if (rule.literal) return {g * s, g, s, rule.stable, true};
    const double edge = first_true(g * s, [&](double a) { return a / g >= s; });
    const double flat = std::nextafter(first_true(g, [&](double a) { return a / g > 1.0; }), 0.0);
    return {edge, flat, s, rule.stable, false};
}

#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
#define DEPTHVOTE_X86 1
#define DEPTHVOTE_KERNEL __attribute__((target_clones("avx2", "default")))
#include <immintrin.h>
#else
#define DEPTHVOTE_X86 0
#define DEPTHVOTE_KERNEL
#endif

#define DEPTHVOTE_INLINE inline __attribute__((always_inline))

// Shared inputs for one sweep. Invalid pixels hold 0 in d and t, so products
// with a zero pair weight stay exact.
struct Sweep {
    const double* d;
    const double* t;
    const double* ok;  // null when every pixel is valid
    int w;
    int h;
    const Offset* offsets;
    int count;
    int reach;
};

// Columns [reach, end) split into whole blocks of `lanes` whose partners all
// lie inside the row.
int block_end(const Sweep& s, int lanes) {
    const int span = s.w - 2 * s.reach;
    return span < lanes ? s.reach : s.reach + span / lanes * lanes;
}

template <bool Literal>
DEPTHVOTE_INLINE bool keeps(const Kernel& k, double dd, double dt) {
    const double a = std::abs(dt);
    const double b = std::abs(dd);
    bool reject;
    if constexpr (Literal) {
        reject = (a >= k.edge && b > 1.0) || (a <= k.flat && b < k.sigma);
    } else {
        reject = (a >= k.edge && b < k.stable) || (a <= k.flat && b > k.sigma);
    }
    return !reject && dt * dd >= 0.0;
}

// Scalar path for columns [x0, x1); offsets may be any subset of the window.
template <bool Literal, bool Masked>
DEPTHVOTE_INLINE void vote_pixels(const Sweep& s, const Kernel& k, int y, int x0, int x1, double* votes,
                                  double* counts) {
    for (int x = x0; x < x1; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * s.w + x;
        double v = 0.0;
        double c = 0.0;
        for (int i = 0; i < s.count; ++i) {
            const Offset o = s.offsets[i];
            const int qy = y + o.dy;
            const int qx = x + o.dx;
            if (qy < 0 || qy >= s.h || qx < 0 || qx >= s.w) continue;
            const std::size_t q = static_cast<std::size_t>(qy) * s.w + qx;
            const double pair = Masked ? s.ok[p] * s.ok[q] : 1.0;
            v += keeps<Literal>(k, s.d[p] - s.d[q], s.t[p] - s.t[q]) ? pair : 0.0;
            c += pair;
        }
        votes[x] = v;
        counts[x] = c;
    }
}

template <bool Masked>
DEPTHVOTE_INLINE void scale_pixels(const Sweep& s, int y, int x0, int x1, double& num, double& den) {
    for (int x = x0; x < x1; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * s.w + x;
        for (int i = 0; i < s.count; ++i) {
            const Offset o = s.offsets[i];
            const int qy = y + o.dy;
            const int qx = x + o.dx;
            if (qy < 0 || qy >= s.h || qx < 0 || qx >= s.w) continue;
            const std::size_t q = static_cast<std::size_t>(qy) * s.w + qx;
            const double pair = Masked ? s.ok[p] * s.ok[q] : 1.0;
            num += pair * std::abs(s.t[p] - s.t[q]);
            den += pair * std::abs(s.d[p] - s.d[q]);
        }
    }
}

// Portable blocks of four lanes. GCC lowers these to AVX2 in the avx2 clone.
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wpsabi"

constexpr int kLanes = 4;
using Vec = double __attribute__((vector_size(kLanes * sizeof(double))));
using Mask = std::int64_t __attribute__((vector_size(kLanes * sizeof(double))));

DEPTHVOTE_INLINE Vec load(const double* p) {
    Vec v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

DEPTHVOTE_INLINE Vec splat(double x) { return Vec{} + x; }

DEPTHVOTE_INLINE Vec vabs(Vec v) {
    return reinterpret_cast<Vec>(reinterpret_cast<Mask>(v) & (Mask{} + std::numeric_limits<std::int64_t>::max()));
}

// v where the mask is set, +0.0 elsewhere.
DEPTHVOTE_INLINE Vec select(Mask m, Vec v) { return reinterpret_cast<Vec>(m & reinterpret_cast<Mask>(v)); }

template <bool Literal>
DEPTHVOTE_INLINE Mask keeps(const Kernel& k, Vec dd, Vec dt) {
    const Vec a = vabs(dt);
    const Vec b = vabs(dd);
    Mask reject;
    if constexpr (Literal) {
        reject = ((a >= splat(k.edge)) & (b > splat(1.0))) | ((a <= splat(k.flat)) & (b < splat(k.sigma)));
    } else {
        reject = ((a >= splat(k.edge)) & (b < splat(k.stable))) | ((a <= splat(k.flat)) & (b > splat(k.sigma)));
    }
    return ~reject & (dt * dd >= splat(0.0));
}

template <bool Literal, bool Masked>
DEPTHVOTE_INLINE void vote_blocks(const Sweep& s, const Kernel& k, int y, int x0, int x1, const std::ptrdiff_t* rel,
                                  int taps, double* votes, double* counts) {
    const Vec half = splat(0.5);
    for (int x = x0; x < x1; x += kLanes) {
        const std::size_t p = static_cast<std::size_t>(y) * s.w + x;
        const Vec dp = load(s.d + p);
        const Vec tp = load(s.t + p);
        // Integer tallies: comparison masks are -1 where true.
        Mask acc_v{};
        Mask acc_c{};
        Mask ok_p{};
        if constexpr (Masked) ok_p = load(s.ok + p) > half;
        for (int j = 0; j < taps; ++j) {
            const std::size_t q = p + rel[j];
            Mask keep = keeps<Literal>(k, dp - load(s.d + q), tp - load(s.t + q));
            if constexpr (Masked) {
                const Mask pair = ok_p & (load(s.ok + q) > half);
                keep &= pair;
                acc_c -= pair;
            }
            acc_v -= keep;
        }
        for (int l = 0; l < kLanes; ++l) {
            votes[x + l] = static_cast<double>(acc_v[l]);
            counts[x + l] = Masked ? static_cast<double>(acc_c[l]) : static_cast<double>(taps);
        }
    }
}

template <bool Masked>
DEPTHVOTE_INLINE void scale_blocks(const Sweep& s, int y, int x0, int x1, const std::ptrdiff_t* rel, int taps,
                                   double& num, double& den) {
    // Four accumulator pairs hide the add latency.
    Vec vn[4] = {};
    Vec vd[4] = {};
    for (int x = x0; x < x1; x += kLanes) {
        const std::size_t p = static_cast<std::size_t>(y) * s.w + x;
        const Vec dp = load(s.d + p);
        const Vec tp = load(s.t + p);
        const Vec ok_p = Masked ? load(s.ok + p) : splat(1.0);
        int j = 0;
        for (; j + 4 <= taps; j += 4) {
            for (int u = 0; u < 4; ++u) {
                const std::size_t q = p + rel[j + u];
                const Vec pair = Masked ? ok_p * load(s.ok + q) : splat(1.0);
                vn[u] += pair * vabs(tp - load(s.t + q));
                vd[u] += pair * vabs(dp - load(s.d + q));
            }
        }
        for (; j < taps; ++j) {
            const std::size_t q = p + rel[j];
            const Vec pair = Masked ? ok_p * load(s.ok + q) : splat(1.0);
            vn[0] += pair * vabs(tp - load(s.t + q));
            vd[0] += pair * vabs(dp - load(s.d + q));
        }
    }
    for (int u = 0; u < 4; ++u) {
        for (int l = 0; l < kLanes; ++l) {
            num += vn[u][l];
            den += vd[u][l];
        }
    }
}

#pragma GCC diagnostic pop

DEPTHVOTE_KERNEL void vote_blocks_portable(const Sweep& s, const Kernel& k, int y, int x0, int x1,
                                           const std::ptrdiff_t* rel, int taps, double* votes, double* counts) {
    if (k.literal) {
        if (s.ok) {
            vote_blocks<true, true>(s, k, y, x0, x1, rel, taps, votes, counts);
        } else {
            vote_blocks<true, false>(s, k, y, x0, x1, rel, taps, votes, counts);
        }
    } else if (s.ok) {
        vote_blocks<false, true>(s, k, y, x0, x1, rel, taps, votes, counts);
    } else {
        vote_blocks<false, false>(s, k, y, x0, x1, rel, taps, votes, counts);
    }
}

DEPTHVOTE_KERNEL void scale_blocks_portable(const Sweep& s, int y, int x0, int x1, const std::ptrdiff_t* rel,
                                            int taps, double& num, double& den) {
    if (s.ok) {
        scale_blocks<true>(s, y, x0, x1, rel, taps, num, den);
    } else {
        scale_blocks<false>(s, y, x0, x1, rel, taps, num, den);
    }
}

#if DEPTHVOTE_X86
// Eight lanes with mask registers. GCC 11 scalarizes 512-bit generic vector
// comparisons, hence the intrinsics.
constexpr int kWideLanes = 8;

template <bool Literal, bool Masked>
__attribute__((target("avx512f"))) void vote_blocks_avx512(const Sweep& s, const Kernel& k, int y, int x0, int x1,
                                                           const std::ptrdiff_t* rel, int taps, double* votes,
                                                           double* counts) {
    const __m512d edge = _mm512_set1_pd(k.edge);
    const __m512d flat = _mm512_set1_pd(k.flat);
    const __m512d sigma = _mm512_set1_pd(k.sigma);
    const __m512d stable = _mm512_set1_pd(k.stable);
    const __m512d one = _mm512_set1_pd(1.0);
    const __m512d half = _mm512_set1_pd(0.5);
    const __m512d zero = _mm512_setzero_pd();
    const __m512i step = _mm512_set1_epi64(1);
    for (int x = x0; x < x1; x += kWideLanes) {
        const std::size_t p = static_cast<std::size_t>(y) * s.w + x;
        const __m512d dp = _mm512_loadu_pd(s.d + p);
        const __m512d tp = _mm512_loadu_pd(s.t + p);
        __m512i acc_v = _mm512_setzero_si512();
        __m512i acc_c = _mm512_setzero_si512();
        __mmask8 ok_p = 0xFF;
        if constexpr (Masked) ok_p = _mm512_cmp_pd_mask(_mm512_loadu_pd(s.ok + p), half, _CMP_GT_OQ);
        for (int j = 0; j < taps; ++j) {
            const std::size_t q = p + rel[j];
            const __m512d dd = _mm512_sub_pd(dp, _mm512_loadu_pd(s.d + q));
            const __m512d dt = _mm512_sub_pd(tp, _mm512_loadu_pd(s.t + q));
            const __m512d a = _mm512_abs_pd(dt);
            const __m512d b = _mm512_abs_pd(dd);
            __mmask8 reject;
            if constexpr (Literal) {
                reject = (_mm512_cmp_pd_mask(a, edge, _CMP_GE_OQ) & _mm512_cmp_pd_mask(b, one, _CMP_GT_OQ)) |
                         (_mm512_cmp_pd_mask(a, flat, _CMP_LE_OQ) & _mm512_cmp_pd_mask(b, sigma, _CMP_LT_OQ));
            } else {
                reject = (_mm512_cmp_pd_mask(a, edge, _CMP_GE_OQ) & _mm512_cmp_pd_mask(b, stable, _CMP_LT_OQ)) |
                         (_mm512_cmp_pd_mask(a, flat, _CMP_LE_OQ) & _mm512_cmp_pd_mask(b, sigma, _CMP_GT_OQ));
            }
            __mmask8 keep =
                static_cast<__mmask8>(~reject & _mm512_cmp_pd_mask(_mm512_mul_pd(dt, dd), zero, _CMP_GE_OQ));
            if constexpr (Masked) {
                const __mmask8 pair =
                    static_cast<__mmask8>(ok_p & _mm512_cmp_pd_mask(_mm512_loadu_pd(s.ok + q), half, _CMP_GT_OQ));
                keep &= pair;
                acc_c = _mm512_mask_add_epi64(acc_c, pair, acc_c, step);
            }
            acc_v = _mm512_mask_add_epi64(acc_v, keep, acc_v, step);
        }
        alignas(64) std::int64_t tv[kWideLanes];
        alignas(64) std::int64_t tc[kWideLanes];
        _mm512_store_si512(tv, acc_v);
        _mm512_store_si512(tc, acc_c);
        for (int l = 0; l < kWideLanes; ++l) {
            votes[x + l] = static_cast<double>(tv[l]);
            counts[x + l] = Masked ? static_cast<double>(tc[l]) : static_cast<double>(taps);
        }
    }
}

template <bool Masked>
__attribute__((target("avx512f"))) void scale_blocks_avx512(const Sweep& s, int y, int x0, int x1,
                                                            const std::ptrdiff_t* rel, int taps, double& num,
                                                            double& den) {
    // Two accumulator pairs hide the add latency.
    __m512d n0 = _mm512_setzero_pd();
    __m512d n1 = _mm512_setzero_pd();
    __m512d d0 = _mm512_setzero_pd();
    __m512d d1 = _mm512_setzero_pd();
    for (int x = x0; x < x1; x += kWideLanes) {
        const std::size_t p = static_cast<std::size_t>(y) * s.w + x;
        const __m512d dp = _mm512_loadu_pd(s.d + p);
        const __m512d tp = _mm512_loadu_pd(s.t + p);
        const __m512d ok_p = Masked ? _mm512_loadu_pd(s.ok + p) : _mm512_set1_pd(1.0);
        for (int j = 0; j < taps; ++j) {
            const std::size_t q = p + rel[j];
            __m512d en = _mm512_abs_pd(_mm512_sub_pd(tp, _mm512_loadu_pd(s.t + q)));
            __m512d ed = _mm512_abs_pd(_mm512_sub_pd(dp, _mm512_loadu_pd(s.d + q)));
            if constexpr (Masked) {
                const __m512d pair = _mm512_mul_pd(ok_p, _mm512_loadu_pd(s.ok + q));
                en = _mm512_mul_pd(pair, en);
                ed = _mm512_mul_pd(pair, ed);
            }
            if (j & 1) {
                n1 = _mm512_add_pd(n1, en);
                d1 = _mm512_add_pd(d1, ed);
            } else {
                n0 = _mm512_add_pd(n0, en);
                d0 = _mm512_add_pd(d0, ed);
            }
        }
    }
    alignas(64) double ln[kWideLanes];
    alignas(64) double ld[kWideLanes];
    for (const auto& [vn, vd] : {std::pair{n0, d0}, std::pair{n1, d1}}) {
        _mm512_store_pd(ln, vn);
        _mm512_store_pd(ld, vd);
        for (int l = 0; l < kWideLanes; ++l) {
            num += ln[l];
            den += ld[l];
        }
    }
}

bool has_avx512() {
    static const bool yes = __builtin_cpu_supports("avx512f");
    return yes;
}

// Half-window sweep for fully valid inputs: each unordered pair is evaluated
// once and credited to both pixels. Offsets arrive dx-major, so consecutive
// partner updates land in different rows and do not wait on an overlapping
// store. `tally` holds rows [y0, min(h, y1 + reach)).
template <bool Literal>
__attribute__((target("avx512f"))) void symmetric_band_avx512(const Sweep& s, const Kernel& k, int y0, int y1,
                                                              std::int64_t* tally) {
    const __m512d edge = _mm512_set1_pd(k.edge);
    const __m512d flat = _mm512_set1_pd(k.flat);
    const __m512d sigma = _mm512_set1_pd(k.sigma);
    const __m512d stable = _mm512_set1_pd(k.stable);
    const __m512d one = _mm512_set1_pd(1.0);
    const __m512d zero = _mm512_setzero_pd();
    const __m512i step = _mm512_set1_epi64(1);
    const int w = s.w;
    const int lo = std::min(s.reach, w);
    const int end = std::max(lo, block_end(s, kWideLanes));
    for (int y = y0; y < y1; ++y) {
        std::int64_t* own = tally + static_cast<std::size_t>(y - y0) * w;
        for (int x = 0; x < w; ++x) {
            if (x == lo) x = end;
            if (x >= w) break;
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            for (int i = 0; i < s.count; ++i) {
                const Offset o = s.offsets[i];
                const int qy = y + o.dy;
                const int qx = x + o.dx;
                if (qy >= s.h || qx < 0 || qx >= w) continue;
                const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
                const int keep = keeps<Literal>(k, s.d[p] - s.d[q], s.t[p] - s.t[q]) ? 1 : 0;
                own[x] += keep;
                tally[static_cast<std::size_t>(qy - y0) * w + qx] += keep;
            }
        }
        for (int x = lo; x < end; x += kWideLanes) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            const __m512d dp = _mm512_loadu_pd(s.d + p);
            const __m512d tp = _mm512_loadu_pd(s.t + p);
            __m512i acc = _mm512_setzero_si512();
            for (int i = 0; i < s.count; ++i) {
                const Offset o = s.offsets[i];
                const int qy = y + o.dy;
                if (qy >= s.h) continue;
                const std::size_t q = p + static_cast<std::size_t>(o.dy) * w + o.dx;
                const __m512d dd = _mm512_sub_pd(dp, _mm512_loadu_pd(s.d + q));
                const __m512d dt = _mm512_sub_pd(tp, _mm512_loadu_pd(s.t + q));
                const __m512d a = _mm512_abs_pd(dt);
                const __m512d b = _mm512_abs_pd(dd);
                __mmask8 reject;
                if constexpr (Literal) {
                    reject = (_mm512_cmp_pd_mask(a, edge, _CMP_GE_OQ) & _mm512_cmp_pd_mask(b, one, _CMP_GT_OQ)) |
                             (_mm512_cmp_pd_mask(a, flat, _CMP_LE_OQ) & _mm512_cmp_pd_mask(b, sigma, _CMP_LT_OQ));
                } else {
                    reject =
                        (_mm512_cmp_pd_mask(a, edge, _CMP_GE_OQ) & _mm512_cmp_pd_mask(b, stable, _CMP_LT_OQ)) |
                        (_mm512_cmp_pd_mask(a, flat, _CMP_LE_OQ) & _mm512_cmp_pd_mask(b, sigma, _CMP_GT_OQ));
                }
                const __mmask8 keep =
                    static_cast<__mmask8>(~reject & _mm512_cmp_pd_mask(_mm512_mul_pd(dt, dd), zero, _CMP_GE_OQ));
                acc = _mm512_mask_add_epi64(acc, keep, acc, step);
                std::int64_t* partner = tally + static_cast<std::size_t>(qy - y0) * w + x + o.dx;
                const __m512i v = _mm512_loadu_si512(partner);
                _mm512_storeu_si512(partner, _mm512_mask_add_epi64(v, keep, v, step));
            }
            _mm512_storeu_si512(own + x, _mm512_add_epi64(_mm512_loadu_si512(own + x), acc));
        }
    }
}
#endif

// Column segments of a row: scalar strips at both borders and vector tiles
// in between, narrow enough that the rows under a window stay in L1.
struct Segment {
    int x0;
    int x1;
    bool vector;
};

constexpr int kTileColumns = 128;

std::atomic<bool> g_portable_only{false};

bool use_wide() {
#if DEPTHVOTE_X86
    return has_avx512() && !g_portable_only.load();
#else
    return false;
#endif
}

std::vector<Segment> segments(const Sweep& s) {
    const int lo = std::min(s.reach, s.w);
    const int hi = std::max(lo, block_end(s, use_wide() ? kWideLanes : kLanes));
    std::vector<Segment> out;
    if (lo > 0) out.push_back({0, lo, false});
    for (int x = lo; x < hi; x += kTileColumns) out.push_back({x, std::min(hi, x + kTileColumns), true});
    if (hi < s.w) out.push_back({hi, s.w, false});
    return out;
}

// Relative index q - p for every offset whose partner row exists.
int partner_rows(const Sweep& s, int y, std::vector<std::ptrdiff_t>& rel) {
    rel.clear();
    for (int i = 0; i < s.count; ++i) {
        const Offset o = s.offsets[i];
        const int qy = y + o.dy;
        if (qy >= 0 && qy < s.h) rel.push_back(static_cast<std::ptrdiff_t>(o.dy) * s.w + o.dx);
    }
    return static_cast<int>(rel.size());
}

// Votes and valid-pair counts for columns [seg.x0, seg.x1) of row y, written
// to votes[x] and counts[x].
void vote_segment(const Sweep& s, const Kernel& k, int y, const Segment& seg, std::vector<std::ptrdiff_t>& rel,
                  double* votes, double* counts) {
    const bool lit = k.literal;
    const bool masked = s.ok != nullptr;
    if (!seg.vector) {
        if (lit) {
            masked ? vote_pixels<true, true>(s, k, y, seg.x0, seg.x1, votes, counts)
                   : vote_pixels<true, false>(s, k, y, seg.x0, seg.x1, votes, counts);
        } else {
            masked ? vote_pixels<false, true>(s, k, y, seg.x0, seg.x1, votes, counts)
                   : vote_pixels<false, false>(s, k, y, seg.x0, seg.x1, votes, counts);
        }
        return;
    }
    const int taps = partner_rows(s, y, rel);
#if DEPTHVOTE_X86
    if (use_wide()) {
        if (lit) {
            masked ? vote_blocks_avx512<true, true>(s, k, y, seg.x0, seg.x1, rel.data(), taps, votes, counts)
                   : vote_blocks_avx512<true, false>(s, k, y, seg.x0, seg.x1, rel.data(), taps, votes, counts);
        } else {
            masked ? vote_blocks_avx512<false, true>(s, k, y, seg.x0, seg.x1, rel.data(), taps, votes, counts)
                   : vote_blocks_avx512<false, false>(s, k, y, seg.x0, seg.x1, rel.data(), taps, votes, counts);
        }
        return;
    }
#endif
    vote_blocks_portable(s, k, y, seg.x0, seg.x1, rel.data(), taps, votes, counts);
}

// Adds the sums of |ΔD̃| and |ΔD| over the half window for one segment.
void scale_segment(const Sweep& s, int y, const Segment& seg, std::vector<std::ptrdiff_t>& rel, double& num,
                   double& den) {
    const bool masked = s.ok != nullptr;
    if (!seg.vector) {
        masked ? scale_pixels<true>(s, y, seg.x0, seg.x1, num, den)
               : scale_pixels<false>(s, y, seg.x0, seg.x1, num, den);
        return;
    }
    const int taps = partner_rows(s, y, rel);
#if DEPTHVOTE_X86
    if (use_wide()) {
        masked ? scale_blocks_avx512<true>(s, y, seg.x0, seg.x1, rel.data(), taps, num, den)
               : scale_blocks_avx512<false>(s, y, seg.x0, seg.x1, rel.data(), taps, num, den);
        return;
    }
#endif
    scale_blocks_portable(s, y, seg.x0, seg.x1, rel.data(), taps, num, den);
}

// Number of taps i in [-half, half] with 0 <= x + i * dilation < size.
int taps_inside(int x, int size, int half, int dilation) {
    int n = 0;
    for (int i = -half; i <= half; ++i) {
        const int q = x + i * dilation;
        n += (q >= 0 && q < size) ? 1 : 0;
    }
    return n;
}

// Full-window tap counts when every pixel is valid.
void geometric_counts(const NeighborhoodSpec& spec, int w, int h, std::vector<double>& counts) {
    const int half = spec.window / 2;
    std::vector<int> cx(static_cast<std::size_t>(w));
    for (int x = 0; x < w; ++x) cx[static_cast<std::size_t>(x)] = taps_inside(x, w, half, spec.dilation);
    for (int y = 0; y < h; ++y) {
        const int cy = taps_inside(y, h, half, spec.dilation);
        for (int x = 0; x < w; ++x) counts[static_cast<std::size_t>(y) * w + x] = cx[static_cast<std::size_t>(x)] * cy - 1;
    }
}

#if DEPTHVOTE_X86
// Votes via the symmetric sweep. Bands own rows [y0, y1) as pair origins and
// credit partners up to `reach` rows below, so each band tallies into a
// private buffer with a halo. Integer tallies make the merge order irrelevant.
void symmetric_votes(const Sweep& full, const Kernel& k, std::vector<double>& votes) {
    std::vector<Offset> half;
    for (int i = 0; i < full.count; ++i) {
        const Offset o = full.offsets[i];
        if (o.dy > 0 || (o.dy == 0 && o.dx > 0)) half.push_back(o);
    }
    std::stable_sort(half.begin(), half.end(), [](const Offset& a, const Offset& b) { return a.dx < b.dx; });
    Sweep s = full;
    s.offsets = half.data();
    s.count = static_cast<int>(half.size());

    const int w = s.w;
    const int h = s.h;
    const int bands = std::max(1, std::min<int>(static_cast<int>(max_threads()), h));
    const int band_rows = (h + bands - 1) / bands;
    std::vector<std::vector<std::int64_t>> tallies(static_cast<std::size_t>(bands));
    parallel_for(bands, [&](int b0, int b1) {
        for (int b = b0; b < b1; ++b) {
            const int y0 = b * band_rows;
            const int y1 = std::min(h, y0 + band_rows);
            if (y0 >= y1) continue;
            auto& tally = tallies[static_cast<std::size_t>(b)];
            tally.assign(static_cast<std::size_t>(std::min(h, y1 + s.reach) - y0) * w, 0);
            if (k.literal) {
                symmetric_band_avx512<true>(s, k, y0, y1, tally.data());
            } else {
                symmetric_band_avx512<false>(s, k, y0, y1, tally.data());
            }
        }
    });
    for (int b = 0; b < bands; ++b) {
        const auto& tally = tallies[static_cast<std::size_t>(b)];
        const std::size_t base = static_cast<std::size_t>(b * band_rows) * w;
        for (std::size_t i = 0; i < tally.size(); ++i) votes[base + i] += static_cast<double>(tally[i]);
    }
}
#endif

// 1.0 where both maps are valid and finite; empty when that holds everywhere.
std::vector<double> joint_mask(const ScalarMap& a, const ScalarMap& b) {
    std::vector<double> ok(a.size());
    const auto va = a.values();
    const auto vb = b.values();
    bool all = true;
    for (std::size_t i = 0; i < ok.size(); ++i) {
        const bool good = a.valid(i) && b.valid(i) && std::isfinite(va[i]) && std::isfinite(vb[i]);
        ok[i] = good ? 1.0 : 0.0;
        all = all && good;
    }
    if (all) ok.clear();
    return ok;
}

// Owns the zeroed copies needed when some pixels are invalid.
struct SweepData {
    std::vector<double> ok;
    std::vector<double> d;
    std::vector<double> t;
    Sweep sweep;
};

void prepare(SweepData& data, const ScalarMap& disparity, const ScalarMap& depth, const std::vector<Offset>& offsets,
             const NeighborhoodSpec& spec) {
    data.ok = joint_mask(disparity, depth);
    const double* d = disparity.values().data();
    const double* t = depth.values().data();
    if (!data.ok.empty()) {
        data.d.assign(disparity.values().begin(), disparity.values().end());
        data.t.assign(depth.values().begin(), depth.values().end());
        for (std::size_t i = 0; i < data.ok.size(); ++i) {
            if (data.ok[i] == 0.0) data.d[i] = data.t[i] = 0.0;
        }
        d = data.d.data();
        t = data.t.data();
    }
    data.sweep = {d,
                  t,
                  data.ok.empty() ? nullptr : data.ok.data(),
                  disparity.width(),
                  disparity.height(),
                  offsets.data(),
                  static_cast<int>(offsets.size()),
                  spec.radius()};
}

}  // namespace

double global_scale(const ScalarMap& disparity, const ScalarMap& depth, const NeighborhoodSpec& spec) {
    require_same_shape(disparity.width(), disparity.height(), depth.width(), depth.height(), "global_scale");
    const auto offsets = half_window_offsets(spec);
    SweepData data;
    prepare(data, disparity, depth, offsets, spec);
    const Sweep& sweep = data.sweep;
    const int h = disparity.height();

    // Per-row partial sums keep the reduction order fixed for any thread count.
    std::vector<double> num_rows(static_cast<std::size_t>(h), 0.0);
    std::vector<double> den_rows(static_cast<std::size_t>(h), 0.0);
    const auto segs = segments(sweep);
    parallel_for(h, [&](int y0, int y1) {
        std::vector<std::ptrdiff_t> rel;
        for (const Segment& seg : segs) {
            for (int y = y0; y < y1; ++y) {
                scale_segment(sweep, y, seg, rel, num_rows[static_cast<std::size_t>(y)],
                              den_rows[static_cast<std::size_t>(y)]);
            }
        }
    });
    double num = 0.0;
    double den = 0.0;
    for (int y = 0; y < h; ++y) {
        num += num_rows[static_cast<std::size_t>(y)];
        den += den_rows[static_cast<std::size_t>(y)];
    }
    if (!(den > 0.0)) {
        throw DegenerateInput("degenerate disparity: no disparity variation inside any neighbourhood");
    }
    return num / den;
}

int vote_vc(double d_disp, double d_depth, double gamma, const DdcvParams& params) {
    if (!(gamma > 0.0)) throw std::invalid_argument("global scale must be > 0");
    if (!std::isfinite(d_disp) || !std::isfinite(d_depth)) throw InvalidInput("vote_vc received a non-finite value");
    return make_rule(gamma, params).vc(d_disp, d_depth);
}

int vote(Pixel p, Pixel q, const ScalarMap& disparity, const ScalarMap& depth, double gamma,
         const DdcvParams& params) {
    const double d_disp = disparity(p.x, p.y) - disparity(q.x, q.y);
    const double d_depth = depth(p.x, p.y) - depth(q.x, q.y);
    return vote_rc(d_disp, d_depth) * vote_vc(d_disp, d_depth, gamma, params);
}

ScalarMap confidence_map(const ScalarMap& disparity, const ScalarMap& depth, const DdcvParams& params) {
    params.validate();
    const double gamma = global_scale(disparity, depth, params.spec);
    return confidence_map_with_scale(disparity, depth, gamma, params);
}

ScalarMap confidence_map_with_scale(const ScalarMap& disparity, const ScalarMap& depth, double gamma,
                                    const DdcvParams& params) {
    params.validate();
    require_same_shape(disparity.width(), disparity.height(), depth.width(), depth.height(), "confidence_map");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw DegenerateInput("degenerate global scale " + std::to_string(gamma) +
                              " (relative depth has no variation)");
    }
    const int w = disparity.width();
    const int h = disparity.height();
    const auto offsets = window_offsets(params.spec);
    SweepData data;
    prepare(data, disparity, depth, offsets, params.spec);
    const Sweep& sweep = data.sweep;
    const Kernel kernel = make_kernel(make_rule(gamma, params));
    const bool masked = sweep.ok != nullptr;

    const std::size_t n = disparity.size();
    std::vector<double> votes(n, 0.0);
    std::vector<double> counts(n, 0.0);
    bool done = false;
#if DEPTHVOTE_X86
    if (!masked && use_wide()) {
        symmetric_votes(sweep, kernel, votes);
        geometric_counts(params.spec, w, h, counts);
        done = true;
    }
#endif
    if (!done) {
        const auto segs = segments(sweep);
        parallel_for(h, [&](int y0, int y1) {
            std::vector<std::ptrdiff_t> rel;
            for (const Segment& seg : segs) {
                for (int y = y0; y < y1; ++y) {
                    const std::size_t row = static_cast<std::size_t>(y) * w;
                    vote_segment(sweep, kernel, y, seg, rel, votes.data() + row, counts.data() + row);
                }
            }
        });
    }

    std::vector<double> values(n, 0.0);
    std::vector<std::uint8_t> valid(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if ((!masked || sweep.ok[i] != 0.0) && counts[i] > 0.0) {
            values[i] = votes[i] / counts[i];
            valid[i] = 1;
        }
    }
    return ScalarMap(w, h, std::move(values), std::move(valid));
}

namespace detail {
void force_portable_kernels(bool on) { g_portable_only.store(on); }
}  // namespace detail

}  // namespace depthvote::ddcv
