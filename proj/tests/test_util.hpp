#pragma once

// Shared test oracles: random fixtures, a naive convolution loop, and a central
// finite-difference gradient checker independent of the tape's backward pass, pairwise
// dart spacing, and a fully enumerated signed-rank test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dautomap/conv.hpp"
#include "dautomap/metrics.hpp"
#include "dautomap/rng.hpp"
#include "dautomap/sampling.hpp"
#include "dautomap/tape.hpp"

namespace testutil {

using namespace dautomap;

template <class Scalar = double>
Tensor4<Scalar> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    SplitMix64 rng(seed);
    Tensor4<Scalar> t(shape);
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(rng.uniform(lo, hi));
    return t;
}

/// Direct six-loop cross-correlation with explicit zero padding.
template <class Scalar>
Tensor4<Scalar> naive_conv(const Tensor4<Scalar>& in, const Tensor4<Scalar>& k, const Tensor4<Scalar>& bias,
                           Index pad_h = 0, Index pad_w = 0) {
    const Index Ho = in.height() + 2 * pad_h - k.height() + 1;
    const Index Wo = in.width() + 2 * pad_w - k.width() + 1;
    Tensor4<Scalar> out(in.batch(), k.batch(), Ho, Wo);
    for (Index b = 0; b < in.batch(); ++b)
        for (Index co = 0; co < k.batch(); ++co)
            for (Index i = 0; i < Ho; ++i)
                for (Index j = 0; j < Wo; ++j) {
                    Scalar acc = bias[co];
                    for (Index ci = 0; ci < k.channels(); ++ci)
                        for (Index u = 0; u < k.height(); ++u)
                            for (Index v = 0; v < k.width(); ++v) {
                                const Index h = i + u - pad_h, w = j + v - pad_w;
                                if (h < 0 || w < 0 || h >= in.height() || w >= in.width()) continue;
                                acc += k(co, ci, u, v) * in(b, ci, h, w);
                            }
                    out(b, co, i, j) = acc;
                }
    return out;
}

using LossBuilder = std::function<Var(GradTape<double>&, const std::vector<Var>&)>;

struct GradCheck {
    double max_rel_error = 0.0;
    int checked = 0;
    int skipped_kinks = 0;
};

/// Compares tape gradients with central differences (step h) on up to `per_leaf`
/// randomly chosen coordinates of each leaf. Coordinates whose perturbation flips any
/// ReLU are resampled. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradients(const LossBuilder& build, std::vector<Tensor4d> leaves, int per_leaf,
                                 std::uint64_t seed, double h = 1e-5, double floor = 1e-6) {
    GradTape<double> tape;
    std::vector<Var> vars;
    for (const auto& l : leaves) vars.push_back(tape.leaf(l, true));
    const Var loss = build(tape, vars);
    const auto grads = tape.backward(loss);
    const std::uint64_t base_pattern = tape.relu_pattern_hash();

    auto evaluate = [&](const std::vector<Tensor4d>& values, std::uint64_t& pattern) {
        GradTape<double> t;
        std::vector<Var> vs;
        for (const auto& l : values) vs.push_back(t.leaf(l, true));
        const Var out = build(t, vs);
        pattern = t.relu_pattern_hash();
        return t.value(out)[0];
    };

    SplitMix64 rng(seed);
    GradCheck result;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        const Index n = leaves[li].size();
        const int want = static_cast<int>(std::min<Index>(per_leaf, n));
        int done = 0, attempts = 0;
        while (done < want && attempts < 20 * want) {
            ++attempts;
            const Index idx = want == n ? done : static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
            const double original = leaves[li][idx];
            std::uint64_t p_plus = 0, p_minus = 0;
            leaves[li][idx] = original + h;
            const double f_plus = evaluate(leaves, p_plus);
            leaves[li][idx] = original - h;
            const double f_minus = evaluate(leaves, p_minus);
            leaves[li][idx] = original;
            if (p_plus != base_pattern || p_minus != base_pattern) {
                ++result.skipped_kinks;
                if (want == n) ++done;
                continue;
            }
            const double numeric = (f_plus - f_minus) / (2 * h);
            const double analytic = grads[vars[li]][idx];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
            result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
            ++result.checked;
            ++done;
        }
    }
    return result;
}

// Brute force over all pairs of accepted darts.
inline double min_pair_distance(const std::vector<MaskPoint>& pts) {
    double best = INFINITY;
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b)
            best = std::min(best, std::hypot(pts[a].row - pts[b].row, pts[a].col - pts[b].col));
    return best;
}

// Two-sided exact p-value by enumerating all 2^n sign patterns of the ranked |d|.
inline double wilcoxon_bruteforce(const std::vector<double>& d_all) {
    std::vector<double> d;
    for (double v : d_all)
        if (v != 0) d.push_back(v);
    std::vector<double> mags;
    for (double v : d) mags.push_back(std::abs(v));
    const auto ranks = midranks(mags);
    double w = 0, mean = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0) w += ranks[i];
        mean += ranks[i] / 2;
    }
    const std::uint64_t patterns = 1ull << d.size();
    double extreme = 0;
    for (std::uint64_t s = 0; s < patterns; ++s) {
        double ws = 0;
        for (std::size_t i = 0; i < d.size(); ++i)
            if (s >> i & 1) ws += ranks[i];
        if (std::abs(ws - mean) >= std::abs(w - mean) - 1e-12) extreme += 1;
    }
    return std::min(1.0, extreme / double(patterns));
}

}  // namespace testutil
