#pragma once

// Dense kernels: valid/same 2-D cross-correlation (im2col or shifted-tap GEMMs), pointwise
// activations, and the matching vector-Jacobian products.

#include <algorithm>
#include <cmath>
#include <string>

#include "dautomap/parallel.hpp"
#include "dautomap/tensor.hpp"

namespace dautomap {

struct Padding {
    Index rows = 0;
    Index cols = 0;
};

namespace detail {

inline Shape conv_output_shape(const Shape& in, const Shape& kernel, Padding pad) {
    if (kernel.channels != in.channels)
        throw DimensionError("conv2d: kernel in-channels (axis 1) = " + std::to_string(kernel.channels) +
                             " but input channels (axis 1) = " + std::to_string(in.channels));
    const Index padded_h = in.height + 2 * pad.rows;
    const Index padded_w = in.width + 2 * pad.cols;
    if (kernel.height > padded_h)
        throw DimensionError("conv2d: kernel height (axis 2) = " + std::to_string(kernel.height) +
                             " exceeds input height " + std::to_string(padded_h));
    if (kernel.width > padded_w)
        throw DimensionError("conv2d: kernel width (axis 3) = " + std::to_string(kernel.width) +
                             " exceeds input width " + std::to_string(padded_w));
    return {in.batch, kernel.batch, padded_h - kernel.height + 1, padded_w - kernel.width + 1};
}

template <class Scalar>
void check_bias(const Tensor4<Scalar>& bias, Index out_channels) {
    if (bias.size() != out_channels)
        throw DimensionError("conv2d: bias has " + std::to_string(bias.size()) +
                             " entries, kernel axis 0 has " + std::to_string(out_channels));
}

/// Column matrix with rows (ci, u, v) and columns (b, i, j).
template <class Scalar>
RowMatrix<Scalar> im2col(const Tensor4<Scalar>& in, Index kh, Index kw, Padding pad, const Shape& out) {
    const Index C = in.channels(), H = in.height(), W = in.width();
    const Index Ho = out.height, Wo = out.width, P = Ho * Wo;
    RowMatrix<Scalar> cols(C * kh * kw, in.batch() * P);
    parallel_for(in.batch(), [&](Index b) {
        for (Index c = 0; c < C; ++c) {
            for (Index u = 0; u < kh; ++u) {
                for (Index v = 0; v < kw; ++v) {
                    Scalar* dst = cols.data() + ((c * kh + u) * kw + v) * cols.cols() + b * P;
                    const Index shift = v - pad.cols;
                    const Index j0 = std::clamp<Index>(-shift, 0, Wo), j1 = std::clamp<Index>(W - shift, j0, Wo);
                    for (Index i = 0; i < Ho; ++i) {
                        const Index h = i + u - pad.rows;
                        Scalar* row = dst + i * Wo;
                        if (h < 0 || h >= H) {
                            std::fill(row, row + Wo, Scalar(0));
                            continue;
                        }
                        const Scalar* src = in.data() + in.offset(b, c, h, 0) + shift;
                        std::fill(row, row + j0, Scalar(0));
                        std::copy(src + j0, src + j1, row + j0);
                        std::fill(row + j1, row + Wo, Scalar(0));
                    }
                }
            }
        }
    });
    return cols;
}

/// Adjoint of im2col: scatter-adds columns back onto an input-shaped tensor.
template <class Scalar>
void col2im(const RowMatrix<Scalar>& cols, Index kh, Index kw, Padding pad, const Shape& out,
            Tensor4<Scalar>& grad_in) {
    const Index C = grad_in.channels(), H = grad_in.height(), W = grad_in.width();
    const Index Ho = out.height, Wo = out.width, P = Ho * Wo;
    parallel_for(grad_in.batch(), [&](Index b) {
        for (Index c = 0; c < C; ++c) {
            for (Index u = 0; u < kh; ++u) {
                for (Index v = 0; v < kw; ++v) {
                    const Scalar* src = cols.data() + ((c * kh + u) * kw + v) * cols.cols() + b * P;
                    const Index shift = v - pad.cols;
                    const Index j0 = std::clamp<Index>(-shift, 0, Wo), j1 = std::clamp<Index>(W - shift, j0, Wo);
                    for (Index i = 0; i < Ho; ++i) {
                        const Index h = i + u - pad.rows;
                        if (h < 0 || h >= H) continue;
                        Scalar* dst = grad_in.data() + grad_in.offset(b, c, h, 0) + shift;
                        const Scalar* row = src + i * Wo;
                        for (Index j = j0; j < j1; ++j) dst[j] += row[j];
                    }
                }
            }
        }
    });
}

template <class Scalar>
Eigen::Map<const RowMatrix<Scalar>> kernel_matrix(const Tensor4<Scalar>& kernel) {
    return {kernel.data(), kernel.batch(), kernel.channels() * kernel.height() * kernel.width()};
}

template <class Scalar>
using ColMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Geometry of the shifted-tap method. The zero-padded input is flattened to
/// columns (b, h, w) of a (C, length + tail) matrix; tap (u, v) then reads the
/// column window starting at u * Wp + v, and output (i, j) lives at column (b, i, j)
/// of the padded grid. Columns with i >= Ho or j >= Wo are discarded.
struct TapGrid {
    Index batch, hp, wp, kh, kw;
    Padding pad;
    Index plane() const { return hp * wp; }
    Index length() const { return batch * plane(); }
    Index tail() const { return (kh - 1) * wp + kw - 1; }
    Index offset(Index u, Index v) const { return u * wp + v; }
};

inline TapGrid tap_grid(const Shape& in, const Shape& kernel, Padding pad) {
    return {in.batch, in.height + 2 * pad.rows, in.width + 2 * pad.cols, kernel.height, kernel.width, pad};
}

template <class Scalar>
ColMatrix<Scalar> padded_columns(const Tensor4<Scalar>& in, const TapGrid& g) {
    const Index C = in.channels(), H = in.height(), W = in.width();
    ColMatrix<Scalar> x = ColMatrix<Scalar>::Zero(C, g.length() + g.tail());
    for (Index b = 0; b < in.batch(); ++b)
        for (Index c = 0; c < C; ++c)
            for (Index h = 0; h < H; ++h) {
                const Scalar* src = in.data() + in.offset(b, c, h, 0);
                Scalar* dst = x.data() + (b * g.plane() + (h + g.pad.rows) * g.wp + g.pad.cols) * C + c;
                for (Index w = 0; w < W; ++w) dst[w * C] = src[w];
            }
    return x;
}

/// Per-tap kernel slices side by side: block (u, v) is the (Cout, Cin) matrix kernel[:, :, u, v].
template <class Scalar>
ColMatrix<Scalar> tap_kernels(const Tensor4<Scalar>& kernel) {
    const Index Co = kernel.batch(), Ci = kernel.channels(), kh = kernel.height(), kw = kernel.width();
    ColMatrix<Scalar> k(Co, Ci * kh * kw);
    for (Index co = 0; co < Co; ++co)
        for (Index ci = 0; ci < Ci; ++ci)
            for (Index u = 0; u < kh; ++u)
                for (Index v = 0; v < kw; ++v) k(co, (u * kw + v) * Ci + ci) = kernel(co, ci, u, v);
    return k;
}

template <class Scalar>
Tensor4<Scalar> conv2d_taps(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel, const Tensor4<Scalar>& bias,
                            Padding pad, const Shape& out_shape) {
    const TapGrid g = tap_grid(input.shape(), kernel.shape(), pad);
    const Index Ci = kernel.channels(), Co = kernel.batch();
    const ColMatrix<Scalar> x = padded_columns(input, g);
    const ColMatrix<Scalar> k = tap_kernels(kernel);
    ColMatrix<Scalar> acc = ColMatrix<Scalar>::Zero(Co, g.length());
    for (Index u = 0; u < g.kh; ++u)
        for (Index v = 0; v < g.kw; ++v)
            acc.noalias() += k.middleCols((u * g.kw + v) * Ci, Ci) * x.middleCols(g.offset(u, v), g.length());

    Tensor4<Scalar> out(out_shape);
    for (Index b = 0; b < out_shape.batch; ++b)
        for (Index co = 0; co < Co; ++co)
            for (Index i = 0; i < out_shape.height; ++i) {
                Scalar* dst = out.data() + out.offset(b, co, i, 0);
                const Scalar* src = acc.data() + (b * g.plane() + i * g.wp) * Co + co;
                for (Index j = 0; j < out_shape.width; ++j) dst[j] = src[j * Co] + bias[co];
            }
    return out;
}

}  // namespace detail

enum class ConvMethod {
    automatic,  ///< shifted taps unless padding waste exceeds 2x, then im2col
    im2col,
    shifted_taps,
};

namespace detail {

inline bool use_taps(ConvMethod method, const Shape& in, const Shape& out, Padding pad) {
    if (method != ConvMethod::automatic) return method == ConvMethod::shifted_taps;
    const Index padded = (in.height + 2 * pad.rows) * (in.width + 2 * pad.cols);
    return padded <= 2 * out.height * out.width;
}

}  // namespace detail

/// Cross-correlation with explicit zero padding:
/// out[b,co,i,j] = bias[co] + sum_{ci,u,v} kernel[co,ci,u,v] * in[b,ci,i+u-pad.rows,j+v-pad.cols].
template <class Scalar>
Tensor4<Scalar> conv2d(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel,
                       const Tensor4<Scalar>& bias, Padding pad, ConvMethod method = ConvMethod::automatic) {
    const Shape out_shape = detail::conv_output_shape(input.shape(), kernel.shape(), pad);
    detail::check_bias(bias, kernel.batch());
    if (detail::use_taps(method, input.shape(), out_shape, pad))
        return detail::conv2d_taps(input, kernel, bias, pad, out_shape);

    const Index P = out_shape.height * out_shape.width;
    const RowMatrix<Scalar> cols = detail::im2col(input, kernel.height(), kernel.width(), pad, out_shape);
    RowMatrix<Scalar> prod(kernel.batch(), cols.cols());
    prod.noalias() = detail::kernel_matrix(kernel) * cols;

    Tensor4<Scalar> out(out_shape);
    for (Index b = 0; b < out_shape.batch; ++b) {
        for (Index co = 0; co < out_shape.channels; ++co) {
            Eigen::Map<Eigen::Array<Scalar, 1, Eigen::Dynamic>> dst(out.data() + out.offset(b, co, 0, 0), P);
            dst = prod.row(co).segment(b * P, P).array() + bias[co];
        }
    }
    return out;
}

/// Valid (unpadded) cross-correlation; output is (B, Cout, H-Kh+1, W-Kw+1). No kernel flip.
template <class Scalar>
Tensor4<Scalar> conv2d_valid(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel,
                             const Tensor4<Scalar>& bias) {
    return conv2d(input, kernel, bias, Padding{});
}

inline Padding same_padding(const Shape& kernel) {
    if (kernel.height % 2 == 0 || kernel.width % 2 == 0)
        throw ConfigError("conv2d_same: kernel size must be odd, got " + std::to_string(kernel.height) +
                          "x" + std::to_string(kernel.width));
    return {(kernel.height - 1) / 2, (kernel.width - 1) / 2};
}

/// Zero-padded cross-correlation preserving H and W. Kernel sides must be odd.
template <class Scalar>
Tensor4<Scalar> conv2d_same(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel,
                            const Tensor4<Scalar>& bias) {
    return conv2d(input, kernel, bias, same_padding(kernel.shape()));
}

template <class Scalar>
struct ConvGrads {
    Tensor4<Scalar> input;
    Tensor4<Scalar> kernel;
    Tensor4<Scalar> bias;
};

namespace detail {

template <class Scalar>
ConvGrads<Scalar> conv2d_backward_taps(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel,
                                       const Tensor4<Scalar>& grad_out, Padding pad, bool want_input_grad) {
    const TapGrid g = tap_grid(input.shape(), kernel.shape(), pad);
    const Index Ci = kernel.channels(), Co = kernel.batch();
    const Shape& os = grad_out.shape();

    ColMatrix<Scalar> gm = ColMatrix<Scalar>::Zero(Co, g.length());
    for (Index b = 0; b < os.batch; ++b)
        for (Index co = 0; co < Co; ++co)
            for (Index i = 0; i < os.height; ++i) {
                const Scalar* src = grad_out.data() + grad_out.offset(b, co, i, 0);
                Scalar* dst = gm.data() + (b * g.plane() + i * g.wp) * Co + co;
                for (Index j = 0; j < os.width; ++j) dst[j * Co] = src[j];
            }

    ConvGrads<Scalar> grads;
    grads.bias = Tensor4<Scalar>::vector(Co);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(grads.bias.data(), Co) = gm.rowwise().sum();

    const ColMatrix<Scalar> x = padded_columns(input, g);
    grads.kernel = Tensor4<Scalar>(kernel.shape());
    ColMatrix<Scalar> dk(Co, Ci);
    for (Index u = 0; u < g.kh; ++u)
        for (Index v = 0; v < g.kw; ++v) {
            dk.noalias() = gm * x.middleCols(g.offset(u, v), g.length()).transpose();
            for (Index co = 0; co < Co; ++co)
                for (Index ci = 0; ci < Ci; ++ci) grads.kernel(co, ci, u, v) = dk(co, ci);
        }

    if (want_input_grad) {
        const ColMatrix<Scalar> k = tap_kernels(kernel);
        ColMatrix<Scalar> dx = ColMatrix<Scalar>::Zero(Ci, g.length() + g.tail());
        for (Index u = 0; u < g.kh; ++u)
            for (Index v = 0; v < g.kw; ++v)
                dx.middleCols(g.offset(u, v), g.length()).noalias() +=
                    k.middleCols((u * g.kw + v) * Ci, Ci).transpose() * gm;
        grads.input = Tensor4<Scalar>(input.shape());
        for (Index b = 0; b < input.batch(); ++b)
            for (Index c = 0; c < Ci; ++c)
                for (Index h = 0; h < input.height(); ++h) {
                    Scalar* dst = grads.input.data() + grads.input.offset(b, c, h, 0);
                    const Scalar* src = dx.data() + (b * g.plane() + (h + pad.rows) * g.wp + pad.cols) * Ci + c;
                    for (Index w = 0; w < input.width(); ++w) dst[w] = src[w * Ci];
                }
    }
    return grads;
}

}  // namespace detail

/// Vector-Jacobian product of conv2d. The input gradient is left empty unless requested.
template <class Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor4<Scalar>& input, const Tensor4<Scalar>& kernel,
                                  const Tensor4<Scalar>& grad_out, Padding pad, bool want_input_grad,
                                  ConvMethod method = ConvMethod::automatic) {
    const Shape out_shape = detail::conv_output_shape(input.shape(), kernel.shape(), pad);
    require_same_shape(grad_out.shape(), out_shape, "conv2d_backward");
    if (detail::use_taps(method, input.shape(), out_shape, pad))
        return detail::conv2d_backward_taps(input, kernel, grad_out, pad, want_input_grad);

    const Index P = out_shape.height * out_shape.width;
    const Index Cout = out_shape.channels;

    RowMatrix<Scalar> g(Cout, out_shape.batch * P);
    for (Index b = 0; b < out_shape.batch; ++b)
        for (Index co = 0; co < Cout; ++co)
            g.row(co).segment(b * P, P) =
                Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(grad_out.data() + grad_out.offset(b, co, 0, 0), P);

    ConvGrads<Scalar> grads;
    {
        const RowMatrix<Scalar> cols = detail::im2col(input, kernel.height(), kernel.width(), pad, out_shape);
        grads.kernel = Tensor4<Scalar>(kernel.shape());
        Eigen::Map<RowMatrix<Scalar>> dk(grads.kernel.data(), Cout, cols.rows());
        dk.noalias() = g * cols.transpose();
    }
    grads.bias = Tensor4<Scalar>::vector(Cout);
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(grads.bias.data(), Cout) = g.rowwise().sum();

    if (want_input_grad) {
        RowMatrix<Scalar> dcols(kernel.channels() * kernel.height() * kernel.width(), g.cols());
        dcols.noalias() = detail::kernel_matrix(kernel).transpose() * g;
        grads.input = Tensor4<Scalar>(input.shape());
        detail::col2im(dcols, kernel.height(), kernel.width(), pad, out_shape, grads.input);
    }
    return grads;
}

/// max(0, x) elementwise.
template <class Scalar>
Tensor4<Scalar> relu(const Tensor4<Scalar>& input) {
    Tensor4<Scalar> out(input.shape());
    out.array() = input.array().max(Scalar(0));
    return out;
}

/// Subgradient convention: 1 where input > 0, else 0 (including input == 0).
template <class Scalar>
Tensor4<Scalar> relu_backward(const Tensor4<Scalar>& input, const Tensor4<Scalar>& grad_out) {
    require_same_shape(input.shape(), grad_out.shape(), "relu_backward");
    Tensor4<Scalar> out(input.shape());
    out.array() = (input.array() > Scalar(0)).select(grad_out.array(), Scalar(0));
    return out;
}

template <class Scalar>
Tensor4<Scalar> zero_pad(const Tensor4<Scalar>& input, Padding pad) {
    Tensor4<Scalar> out(input.batch(), input.channels(), input.height() + 2 * pad.rows,
                        input.width() + 2 * pad.cols);
    for (Index b = 0; b < input.batch(); ++b)
        for (Index c = 0; c < input.channels(); ++c)
            out.plane(b, c).block(pad.rows, pad.cols, input.height(), input.width()) = input.plane(b, c);
    return out;
}

}  // namespace dautomap
