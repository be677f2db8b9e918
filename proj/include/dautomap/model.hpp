#pragma once

// dAUTOMAP: two DT blocks (each ReLU-activated) followed by a three-layer convolutional
// autoencoder head. Also the analytic parameter counters and a small-grid AUTOMAP
// baseline with fully-connected domain transform.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dautomap/dt_layer.hpp"
#include "dautomap/rng.hpp"
#include "dautomap/tape.hpp"

namespace dautomap {

inline constexpr Index kAutoencoderFilters = 64;
inline constexpr Index kAutoencoderKernel1 = 5;
inline constexpr Index kAutoencoderKernel2 = 5;
inline constexpr Index kAutoencoderKernel3 = 7;

/// conv(in->64, 5x5) -> ReLU -> conv(64->64, 5x5) -> ReLU -> conv(64->1, 7x7).
template <class Scalar>
struct AutoencoderParams {
    Tensor4<Scalar> conv1_kernel, conv1_bias;
    Tensor4<Scalar> conv2_kernel, conv2_bias;
    Tensor4<Scalar> conv3_kernel, conv3_bias;

    explicit AutoencoderParams(Index in_channels = 2)
        : conv1_kernel(kAutoencoderFilters, in_channels, kAutoencoderKernel1, kAutoencoderKernel1),
          conv1_bias(Tensor4<Scalar>::vector(kAutoencoderFilters)),
          conv2_kernel(kAutoencoderFilters, kAutoencoderFilters, kAutoencoderKernel2, kAutoencoderKernel2),
          conv2_bias(Tensor4<Scalar>::vector(kAutoencoderFilters)),
          conv3_kernel(1, kAutoencoderFilters, kAutoencoderKernel3, kAutoencoderKernel3),
          conv3_bias(Tensor4<Scalar>::vector(1)) {}

    static constexpr Index parameter_count(Index in_channels = 2) noexcept {
        return (kAutoencoderFilters * in_channels * kAutoencoderKernel1 * kAutoencoderKernel1 + kAutoencoderFilters) +
               (kAutoencoderFilters * kAutoencoderFilters * kAutoencoderKernel2 * kAutoencoderKernel2 +
                kAutoencoderFilters) +
               (kAutoencoderFilters * kAutoencoderKernel3 * kAutoencoderKernel3 + 1);
    }

    /// Kernels uniform in +-1/sqrt(fan_in); biases 0.
    static AutoencoderParams random(Index in_channels, SplitMix64& rng) {
        AutoencoderParams p(in_channels);
        for (Tensor4<Scalar>* k : {&p.conv1_kernel, &p.conv2_kernel, &p.conv3_kernel}) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(k->channels() * k->height() * k->width()));
            for (Index i = 0; i < k->size(); ++i) (*k)[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
        }
        return p;
    }

    /// Routes input channel 0 to the output unchanged (centre taps only).
    static AutoencoderParams passthrough(Index in_channels = 2) {
        AutoencoderParams p(in_channels);
        p.conv1_kernel(0, 0, kAutoencoderKernel1 / 2, kAutoencoderKernel1 / 2) = Scalar(1);
        p.conv2_kernel(0, 0, kAutoencoderKernel2 / 2, kAutoencoderKernel2 / 2) = Scalar(1);
        p.conv3_kernel(0, 0, kAutoencoderKernel3 / 2, kAutoencoderKernel3 / 2) = Scalar(1);
        return p;
    }

    template <class Self, class Visit>
    static void visit(Self& self, const std::string& prefix, Visit&& visit_fn) {
        visit_fn(prefix + "conv1.kernel", self.conv1_kernel);
        visit_fn(prefix + "conv1.bias", self.conv1_bias);
        visit_fn(prefix + "conv2.kernel", self.conv2_kernel);
        visit_fn(prefix + "conv2.bias", self.conv2_bias);
        visit_fn(prefix + "conv3.kernel", self.conv3_kernel);
        visit_fn(prefix + "conv3.bias", self.conv3_bias);
    }
};

namespace detail {

template <class Scalar, class Tensor>
struct NameCollector {
    std::vector<NamedTensor<Scalar, Tensor>>& out;
    void operator()(std::string name, Tensor& t) const { out.push_back({std::move(name), &t}); }
};

}  // namespace detail

template <class Scalar>
struct ModelParams {
    Index rows = 0;
    Index cols = 0;
    DtBlockParams<Scalar> block1;
    DtBlockParams<Scalar> block2;
    AutoencoderParams<Scalar> autoencoder;

    /// Fresh randomly initialised network; weight stream split from `seed`.
    static ModelParams random(Index n, Index m, std::uint64_t seed) {
        SplitMix64 rng = SplitMix64(seed).split(streams::kWeightInit);
        ModelParams p;
        p.rows = n;
        p.cols = m;
        p.block1 = DtBlockParams<Scalar>::random(n, m, rng);
        p.block2 = DtBlockParams<Scalar>::random(n, m, rng);
        p.autoencoder = AutoencoderParams<Scalar>::random(2, rng);
        return p;
    }

    /// Linear reconstruction: inverse-DFT block, identity block, passthrough head.
    static ModelParams inverse_fourier(Index n, Index m) {
        ModelParams p;
        p.rows = n;
        p.cols = m;
        p.block1 = DtBlockParams<Scalar>::fourier(n, m, Direction::inverse);
        p.block2 = DtBlockParams<Scalar>::identity(n, m);
        p.autoencoder = AutoencoderParams<Scalar>::passthrough(2);
        return p;
    }

    /// Tensors in a fixed order with unique names.
    std::vector<NamedTensor<Scalar>> named() { return collect<Tensor4<Scalar>>(*this); }
    std::vector<ConstNamedTensor<Scalar>> named() const { return collect<const Tensor4<Scalar>>(*this); }

    Index parameter_count() const {
        Index total = 0;
        for (const auto& nt : named()) total += nt.tensor->size();
        return total;
    }

    template <class Other>
    ModelParams<Other> cast() const {
        ModelParams<Other> out;
        out.rows = rows;
        out.cols = cols;
        out.block1 = {DtLayerParams<Other>(rows), DtLayerParams<Other>(cols)};
        out.block2 = {DtLayerParams<Other>(rows), DtLayerParams<Other>(cols)};
        const auto src = named();
        auto dst = out.named();
        for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<Other>();
        return out;
    }

private:
    template <class Tensor, class Self>
    static std::vector<NamedTensor<Scalar, Tensor>> collect(Self& self) {
        std::vector<NamedTensor<Scalar, Tensor>> out;
        detail::NameCollector<Scalar, Tensor> push{out};
        push("dt1.rows.kernel", self.block1.rows.kernel);
        push("dt1.rows.bias", self.block1.rows.bias);
        push("dt1.cols.kernel", self.block1.cols.kernel);
        push("dt1.cols.bias", self.block1.cols.bias);
        push("dt2.rows.kernel", self.block2.rows.kernel);
        push("dt2.rows.bias", self.block2.rows.bias);
        push("dt2.cols.kernel", self.block2.cols.kernel);
        push("dt2.cols.bias", self.block2.cols.bias);
        AutoencoderParams<Scalar>::visit(self.autoencoder, "ae.", push);
        return out;
    }
};

struct ModelOptions {
    /// Apply the outer conjugation at the end of each DT block.
    bool final_conj = true;
    /// Bypass every activation; only for exactness diagnostics.
    bool linear_diagnostic = false;
};

/// Tape handles for every tensor of a ModelParams, in named() order.
struct ModelVars {
    DtBlockVars block1, block2;
    Var conv1_kernel, conv1_bias, conv2_kernel, conv2_bias, conv3_kernel, conv3_bias;
    std::vector<Var> all;
};

template <class Scalar>
ModelVars register_params(GradTape<Scalar>& tape, const ModelParams<Scalar>& params, bool trainable) {
    ModelVars v;
    for (const auto& nt : params.named()) v.all.push_back(tape.leaf(*nt.tensor, trainable));
    v.block1 = {v.all[0], v.all[1], v.all[2], v.all[3]};
    v.block2 = {v.all[4], v.all[5], v.all[6], v.all[7]};
    v.conv1_kernel = v.all[8];
    v.conv1_bias = v.all[9];
    v.conv2_kernel = v.all[10];
    v.conv2_bias = v.all[11];
    v.conv3_kernel = v.all[12];
    v.conv3_bias = v.all[13];
    return v;
}

struct ForwardVars {
    Var output;
    /// Post-activation output of the second autoencoder conv (target of the sparsity penalty).
    Var hidden;
};

namespace detail {

template <class Scalar>
Var activate(GradTape<Scalar>& tape, Var x, const ModelOptions& options) {
    return options.linear_diagnostic ? x : tape.relu(x);
}

template <class Scalar>
ForwardVars autoencoder_forward(GradTape<Scalar>& tape, Var x, Var k1, Var b1, Var k2, Var b2, Var k3, Var b3,
                                const ModelOptions& options) {
    const Var h1 = activate(tape, tape.conv2d_same(x, k1, b1), options);
    const Var h2 = activate(tape, tape.conv2d_same(h1, k2, b2), options);
    return {tape.conv2d_same(h2, k3, b3), h2};
}

}  // namespace detail

/// (B, 2, N, M) zero-filled k-space -> (B, 1, N, M) magnitude estimate.
template <class Scalar>
ForwardVars dautomap_forward(GradTape<Scalar>& tape, Var kspace, const ModelVars& vars,
                             const ModelOptions& options = {}) {
    const Shape& s = tape.value(kspace).shape();
    if (s.channels != 2) throw DimensionError("dautomap_forward: k-space must have 2 channels, got " + s.str());
    Var x = detail::activate(tape, dt_block(tape, kspace, vars.block1, options.final_conj), options);
    x = detail::activate(tape, dt_block(tape, x, vars.block2, options.final_conj), options);
    return detail::autoencoder_forward(tape, x, vars.conv1_kernel, vars.conv1_bias, vars.conv2_kernel,
                                       vars.conv2_bias, vars.conv3_kernel, vars.conv3_bias, options);
}

template <class Scalar>
Tensor4<Scalar> dautomap_forward(const Tensor4<Scalar>& kspace, const ModelParams<Scalar>& params,
                                 const ModelOptions& options = {}) {
    if (kspace.height() != params.rows || kspace.width() != params.cols)
        throw DimensionError("dautomap_forward: k-space " + kspace.shape().str() + " does not match model grid " +
                             std::to_string(params.rows) + "x" + std::to_string(params.cols));
    GradTape<Scalar> tape;
    const ModelVars vars = register_params(tape, params, false);
    const Var in = tape.leaf(kspace);
    return tape.value(dautomap_forward(tape, in, vars, options).output);
}

/// Two DT blocks on an N x M grid plus the autoencoder.
constexpr std::int64_t dautomap_param_count(std::int64_t n, std::int64_t m) noexcept {
    return 2 * (2 * n * 2 * n + 2 * n) + 2 * (2 * m * 2 * m + 2 * m) + AutoencoderParams<double>::parameter_count(2);
}

/// Parameters in the learned domain transform only (no autoencoder).
constexpr std::int64_t dautomap_transform_param_count(std::int64_t n, std::int64_t m) noexcept {
    return dautomap_param_count(n, m) - AutoencoderParams<double>::parameter_count(2);
}

/// FC1 2n -> n and FC2 n -> n with biases (n = side^2) plus the same autoencoder head.
constexpr std::int64_t automap_param_count(std::int64_t side) noexcept {
    const std::int64_t n = side * side;
    return 2 * n * n + n + n * n + n + AutoencoderParams<double>::parameter_count(2);
}

constexpr std::int64_t automap_transform_param_count(std::int64_t side) noexcept {
    return automap_param_count(side) - AutoencoderParams<double>::parameter_count(2);
}

inline constexpr Index kAutomapTinyMaxSide = 32;

/// Fully-connected baseline for small grids. The FC output is reshaped to one channel,
/// so its head takes a single input channel.
template <class Scalar>
struct AutomapTinyParams {
    Index side = 0;
    Tensor4<Scalar> fc1_weight, fc1_bias, fc2_weight, fc2_bias;
    AutoencoderParams<Scalar> autoencoder{1};

    static void check_side(Index side) {
        if (side < 1 || side > kAutomapTinyMaxSide)
            throw ResourceError("automap_tiny: side " + std::to_string(side) + " outside [1, " +
                                std::to_string(kAutomapTinyMaxSide) + "]");
    }

    static AutomapTinyParams zeros(Index side) {
        check_side(side);
        const Index n = side * side;
        AutomapTinyParams p;
        p.side = side;
        p.fc1_weight = Tensor4<Scalar>(1, 1, n, 2 * n);
        p.fc1_bias = Tensor4<Scalar>::vector(n);
        p.fc2_weight = Tensor4<Scalar>(1, 1, n, n);
        p.fc2_bias = Tensor4<Scalar>::vector(n);
        p.autoencoder = AutoencoderParams<Scalar>(1);
        return p;
    }

    static AutomapTinyParams random(Index side, std::uint64_t seed) {
        AutomapTinyParams p = zeros(side);
        SplitMix64 rng = SplitMix64(seed).split(streams::kWeightInit);
        for (Tensor4<Scalar>* w : {&p.fc1_weight, &p.fc2_weight}) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(w->width()));
            for (Index i = 0; i < w->size(); ++i) (*w)[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
        }
        p.autoencoder = AutoencoderParams<Scalar>::random(1, rng);
        return p;
    }

    std::vector<NamedTensor<Scalar>> named() { return collect<Tensor4<Scalar>>(*this); }
    std::vector<ConstNamedTensor<Scalar>> named() const { return collect<const Tensor4<Scalar>>(*this); }

private:
    template <class Tensor, class Self>
    static std::vector<NamedTensor<Scalar, Tensor>> collect(Self& self) {
        std::vector<NamedTensor<Scalar, Tensor>> out;
        detail::NameCollector<Scalar, Tensor> push{out};
        push("fc1.weight", self.fc1_weight);
        push("fc1.bias", self.fc1_bias);
        push("fc2.weight", self.fc2_weight);
        push("fc2.bias", self.fc2_bias);
        AutoencoderParams<Scalar>::visit(self.autoencoder, "ae.", push);
        return out;
    }
};

/// Handles in AutomapTinyParams::named() order.
template <class Scalar>
std::vector<Var> register_params(GradTape<Scalar>& tape, const AutomapTinyParams<Scalar>& params, bool trainable) {
    std::vector<Var> vars;
    for (const auto& nt : params.named()) vars.push_back(tape.leaf(*nt.tensor, trainable));
    return vars;
}

/// flatten -> FC(2n -> n) -> tanh -> FC(n -> n) -> tanh -> reshape (B,1,side,side) -> head.
template <class Scalar>
ForwardVars automap_tiny_forward(GradTape<Scalar>& tape, Var kspace, const std::vector<Var>& vars,
                                 const ModelOptions& options = {}) {
    const Shape s = tape.value(kspace).shape();
    AutomapTinyParams<Scalar>::check_side(s.height);
    if (s.channels != 2 || s.height != s.width)
        throw DimensionError("automap_tiny_forward: expected (B, 2, n, n), got " + s.str());
    const Index n = s.height * s.width;
    Var x = tape.reshape(kspace, Shape{s.batch, 1, 1, 2 * n});
    x = tape.tanh(tape.linear(x, vars[0], vars[1]));
    x = tape.tanh(tape.linear(x, vars[2], vars[3]));
    x = tape.reshape(x, Shape{s.batch, 1, s.height, s.width});
    return detail::autoencoder_forward(tape, x, vars[4], vars[5], vars[6], vars[7], vars[8], vars[9], options);
}

template <class Scalar>
Tensor4<Scalar> automap_tiny_forward(const Tensor4<Scalar>& kspace, const AutomapTinyParams<Scalar>& params) {
    GradTape<Scalar> tape;
    const auto vars = register_params(tape, params, false);
    return tape.value(automap_tiny_forward(tape, tape.leaf(kspace), vars).output);
}

}  // namespace dautomap
