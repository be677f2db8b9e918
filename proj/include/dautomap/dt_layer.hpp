#pragma once

// Decomposed transform (DT) layer: a learnable fully-connected map along one spatial
// axis, realised as a valid convolution with kernel (2A, 2, A, 1) on the 2-channel real
// embedding. Output channels use block layout: 0..A-1 real parts, A..2A-1 imaginary.

#include <cmath>
#include <numbers>
#include <string>

#include "dautomap/conv.hpp"
#include "dautomap/rng.hpp"
#include "dautomap/tape.hpp"
#include "dautomap/tensor.hpp"

namespace dautomap {

enum class Direction { forward, inverse };

template <class Scalar_>
struct DtLayerParams {
    using Scalar = Scalar_;

    Tensor4<Scalar> kernel;  // (2A, 2, A, 1)
    Tensor4<Scalar> bias;    // (1, 1, 1, 2A)

    explicit DtLayerParams(Index axis_length = 0)
        : kernel(2 * axis_length, 2, axis_length, 1), bias(Tensor4<Scalar>::vector(2 * axis_length)) {}

    Index axis_length() const noexcept { return kernel.height(); }

    /// 2A * 2 * A weights + 2A biases.
    static constexpr Index parameter_count(Index axis_length) noexcept {
        return 2 * axis_length * 2 * axis_length + 2 * axis_length;
    }

    void validate() const {
        const Index A = axis_length();
        if (!(kernel.shape() == Shape{2 * A, 2, A, 1}))
            throw DimensionError("DtLayerParams: kernel " + kernel.shape().str() + " is not (2A, 2, A, 1) for A = " +
                                 std::to_string(A));
        if (bias.size() != 2 * A)
            throw DimensionError("DtLayerParams: bias has " + std::to_string(bias.size()) + " entries, expected " +
                                 std::to_string(2 * A));
    }

    /// Encodes multiplication of every input column by the complex matrix `m` (A x A).
    template <class Complex>
    static DtLayerParams from_complex_matrix(const Complex& m) {
        const Index A = m.rows();
        DtLayerParams p(A);
        for (Index k = 0; k < A; ++k) {
            for (Index n = 0; n < A; ++n) {
                const Scalar a = static_cast<Scalar>(m(k, n).real());
                const Scalar b = static_cast<Scalar>(m(k, n).imag());
                // (a + jb)(re + j im) = (a re - b im) + j(b re + a im)
                p.kernel(k, 0, n, 0) = a;
                p.kernel(k, 1, n, 0) = -b;
                p.kernel(A + k, 0, n, 0) = b;
                p.kernel(A + k, 1, n, 0) = a;
            }
        }
        return p;
    }
};

/// Kernel realising the (inverse) DFT along the axis. For theta = 2 pi n k / A the
/// forward entries are the real embedding of multiply-by-exp(-j theta); inverse flips
/// the sign of theta and scales by 1/A. `conjugate` flips the sign of theta once more,
/// giving the conjugated matrix, which is what the column stage of a DT block needs.
template <class Scalar>
DtLayerParams<Scalar> fourier_init(Index axis_length, Direction direction, bool conjugate = false) {
    if (axis_length < 1) throw ConfigError("fourier_init: axis length must be >= 1");
    const Index A = axis_length;
    const bool negative_exponent = (direction == Direction::forward) != conjugate;
    const long double sign = negative_exponent ? 1.0L : -1.0L;
    const Scalar scale = direction == Direction::inverse ? Scalar(1) / Scalar(A) : Scalar(1);
    DtLayerParams<Scalar> p(A);
    for (Index k = 0; k < A; ++k) {
        for (Index n = 0; n < A; ++n) {
            const long double theta =
                sign * 2.0L * std::numbers::pi_v<long double> * static_cast<long double>((n * k) % A) / A;
            const Scalar c = static_cast<Scalar>(std::cos(theta)) * scale;
            const Scalar s = static_cast<Scalar>(std::sin(theta)) * scale;
            p.kernel(k, 0, n, 0) = c;
            p.kernel(k, 1, n, 0) = s;
            p.kernel(A + k, 0, n, 0) = -s;
            p.kernel(A + k, 1, n, 0) = c;
        }
    }
    return p;
}

template <class Scalar>
DtLayerParams<Scalar> identity_init(Index axis_length) {
    DtLayerParams<Scalar> p(axis_length);
    for (Index k = 0; k < axis_length; ++k) {
        p.kernel(k, 0, k, 0) = Scalar(1);
        p.kernel(axis_length + k, 1, k, 0) = Scalar(1);
    }
    return p;
}

/// Weights uniform in +-sqrt(1 / (2A)) (fan-in of the 2 x A receptive field), bias 0.
template <class Scalar>
DtLayerParams<Scalar> random_init(Index axis_length, SplitMix64& rng) {
    DtLayerParams<Scalar> p(axis_length);
    const double bound = std::sqrt(1.0 / (2.0 * static_cast<double>(axis_length)));
    for (Index i = 0; i < p.kernel.size(); ++i) p.kernel[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    return p;
}

namespace detail {

inline void check_dt_input(const Shape& x, Index axis_length) {
    if (x.channels != 2)
        throw DimensionError("dt_forward: input must have 2 channels, got " + std::to_string(x.channels));
    if (x.height != axis_length)
        throw DimensionError("dt_forward: input height " + std::to_string(x.height) + " != layer axis length " +
                             std::to_string(axis_length));
}

}  // namespace detail

/// (B, 2, A, W) -> (B, 2A, 1, W). Each column w is mapped independently.
template <class Scalar>
Tensor4<Scalar> dt_forward(const Tensor4<Scalar>& x, const DtLayerParams<Scalar>& params) {
    params.validate();
    detail::check_dt_input(x.shape(), params.axis_length());
    return conv2d_valid(x, params.kernel, params.bias);
}

template <class Scalar>
Var dt_forward(GradTape<Scalar>& tape, Var x, Var kernel, Var bias) {
    detail::check_dt_input(tape.value(x).shape(), tape.value(kernel).height());
    return tape.conv2d_valid(x, kernel, bias);
}

/// A pair of DT layers: one along rows (length N), one along columns (length M).
template <class Scalar>
struct DtBlockParams {
    DtLayerParams<Scalar> rows;
    DtLayerParams<Scalar> cols;

    static DtBlockParams fourier(Index n, Index m, Direction direction) {
        return {fourier_init<Scalar>(n, direction), fourier_init<Scalar>(m, direction, true)};
    }
    static DtBlockParams identity(Index n, Index m) { return {identity_init<Scalar>(n), identity_init<Scalar>(m)}; }
    static DtBlockParams random(Index n, Index m, SplitMix64& rng) {
        auto r = random_init<Scalar>(n, rng);
        auto c = random_init<Scalar>(m, rng);
        return {std::move(r), std::move(c)};
    }

    static constexpr Index parameter_count(Index n, Index m) noexcept {
        return DtLayerParams<Scalar>::parameter_count(n) + DtLayerParams<Scalar>::parameter_count(m);
    }
};

/// rows layer -> conj_transpose -> cols layer -> conj_transpose (plain transpose when
/// final_conj is off). (B, 2, N, M) -> (B, 2, N, M).
///
/// The column layer sees conjugate-transposed data, so X F_M^T (the true 2-D DFT) needs
/// conj(F_M) in that layer; DtBlockParams::fourier() sets it up that way.
template <class Scalar>
Tensor4<Scalar> dt_block(const Tensor4<Scalar>& x, const DtBlockParams<Scalar>& block, bool final_conj = true) {
    if (x.height() != block.rows.axis_length() || x.width() != block.cols.axis_length())
        throw DimensionError("dt_block: input " + x.shape().str() + " does not match layers of length " +
                             std::to_string(block.rows.axis_length()) + " x " + std::to_string(block.cols.axis_length()));
    const Tensor4<Scalar> first = conj_transpose(dt_forward(x, block.rows), true);
    return conj_transpose(dt_forward(first, block.cols), final_conj);
}

struct DtBlockVars {
    Var rows_kernel, rows_bias, cols_kernel, cols_bias;
};

template <class Scalar>
Var dt_block(GradTape<Scalar>& tape, Var x, const DtBlockVars& block, bool final_conj = true) {
    const Shape& s = tape.value(x).shape();
    if (s.height != tape.value(block.rows_kernel).height() || s.width != tape.value(block.cols_kernel).height())
        throw DimensionError("dt_block: input " + s.str() + " does not match layer axis lengths");
    const Var first = tape.conj_transpose(dt_forward(tape, x, block.rows_kernel, block.rows_bias), true);
    return tape.conj_transpose(dt_forward(tape, first, block.cols_kernel, block.cols_bias), final_conj);
}

}  // namespace dautomap
