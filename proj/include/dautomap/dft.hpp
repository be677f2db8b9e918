#pragma once

// Reference discrete Fourier transforms. Deliberately direct: the quadruple loop and
// explicit Kronecker product are the ground truth the learned layers are checked against.

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>

#include "dautomap/tensor.hpp"

namespace dautomap {

template <class Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

/// Complex N x M grid stored as two row-major real planes.
template <class Scalar_>
struct ComplexGrid {
    using Scalar = Scalar_;

    RowMatrix<Scalar> re;
    RowMatrix<Scalar> im;

    ComplexGrid() = default;
    ComplexGrid(Index rows, Index cols) : re(RowMatrix<Scalar>::Zero(rows, cols)), im(RowMatrix<Scalar>::Zero(rows, cols)) {}
    ComplexGrid(RowMatrix<Scalar> real, RowMatrix<Scalar> imag) : re(std::move(real)), im(std::move(imag)) {
        if (re.rows() != im.rows() || re.cols() != im.cols())
            throw DimensionError("ComplexGrid: real and imaginary planes differ in shape");
    }

    static ComplexGrid from_complex(const ComplexMatrix<Scalar>& z) { return {z.real(), z.imag()}; }

    /// Plane (b, 0) is real, (b, 1) imaginary.
    static ComplexGrid from_tensor(const Tensor4<Scalar>& t, Index b = 0) {
        if (t.channels() != 2)
            throw DimensionError("ComplexGrid: tensor must have 2 channels, got " + std::to_string(t.channels()));
        return {t.plane(b, 0), t.plane(b, 1)};
    }

    Index rows() const noexcept { return re.rows(); }
    Index cols() const noexcept { return re.cols(); }

    ComplexMatrix<Scalar> complex() const {
        ComplexMatrix<Scalar> z(rows(), cols());
        z.real() = re;
        z.imag() = im;
        return z;
    }

    Tensor4<Scalar> to_tensor() const {
        Tensor4<Scalar> t(1, 2, rows(), cols());
        t.plane(0, 0) = re;
        t.plane(0, 1) = im;
        return t;
    }

    /// Sum of |z|^2.
    Scalar energy() const { return re.squaredNorm() + im.squaredNorm(); }

    /// |z| per entry.
    RowMatrix<Scalar> magnitude() const { return (re.array().square() + im.array().square()).sqrt().matrix(); }
};

template <class Scalar>
Scalar max_abs_diff(const ComplexGrid<Scalar>& a, const ComplexGrid<Scalar>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("max_abs_diff: grid shapes differ");
    if (a.rows() * a.cols() == 0) return Scalar(0);
    return ((a.re - b.re).array().square() + (a.im - b.im).array().square()).sqrt().maxCoeff();
}

namespace detail {

/// exp(-j 2 pi p / n) with p reduced modulo n first so large index products stay accurate.
template <class Scalar>
std::complex<Scalar> twiddle(Index p, Index n, Scalar sign = Scalar(-1)) {
    const Index r = p % n;
    const long double theta = 2.0L * std::numbers::pi_v<long double> * static_cast<long double>(r) / static_cast<long double>(n);
    return {static_cast<Scalar>(std::cos(theta)), static_cast<Scalar>(sign * static_cast<Scalar>(std::sin(theta)))};
}

}  // namespace detail

/// (F_N)[k, n] = exp(-j 2 pi n k / N); symmetric by construction. With inverse set,
/// the conjugate exp(+j 2 pi n k / N), unscaled.
template <class Scalar>
ComplexMatrix<Scalar> dft_matrix(Index n, bool inverse = false) {
    ComplexMatrix<Scalar> f(n, n);
    const Scalar sign = inverse ? Scalar(1) : Scalar(-1);
    for (Index k = 0; k < n; ++k)
        for (Index j = 0; j <= k; ++j) {
            f(k, j) = detail::twiddle<Scalar>(j * k, n, sign);
            f(j, k) = f(k, j);
        }
    return f;
}

/// y[k,l] = sum_{n<N, m<M} x[n,m] exp(-j 2 pi (nk/N + ml/M)), evaluated term by term.
template <class Scalar>
ComplexGrid<Scalar> dft2_naive(const ComplexGrid<Scalar>& x) {
    const Index N = x.rows(), M = x.cols();
    ComplexGrid<Scalar> y(N, M);
    for (Index k = 0; k < N; ++k) {
        for (Index l = 0; l < M; ++l) {
            std::complex<Scalar> acc(0, 0);
            for (Index n = 0; n < N; ++n) {
                const std::complex<Scalar> row = detail::twiddle<Scalar>(n * k, N);
                for (Index m = 0; m < M; ++m)
                    acc += std::complex<Scalar>(x.re(n, m), x.im(n, m)) * row * detail::twiddle<Scalar>(m * l, M);
            }
            y.re(k, l) = acc.real();
            y.im(k, l) = acc.imag();
        }
    }
    return y;
}

/// F_N x F_M^T as two dense products.
template <class Scalar>
ComplexGrid<Scalar> dft2_separable(const ComplexGrid<Scalar>& x) {
    const ComplexMatrix<Scalar> fn = dft_matrix<Scalar>(x.rows());
    const ComplexMatrix<Scalar> fm = dft_matrix<Scalar>(x.cols());
    const ComplexMatrix<Scalar> y = fn * x.complex() * fm.transpose();
    return ComplexGrid<Scalar>::from_complex(y);
}

/// Row-major vec(): entry (n, m) lands at n*M + m.
template <class Scalar>
ComplexVector<Scalar> vec(const ComplexGrid<Scalar>& x) {
    ComplexVector<Scalar> v(x.rows() * x.cols());
    for (Index n = 0; n < x.rows(); ++n)
        for (Index m = 0; m < x.cols(); ++m) v[n * x.cols() + m] = {x.re(n, m), x.im(n, m)};
    return v;
}

template <class Scalar>
ComplexGrid<Scalar> unvec(const ComplexVector<Scalar>& v, Index rows, Index cols) {
    if (v.size() != rows * cols) throw DimensionError("unvec: vector length does not match grid");
    ComplexGrid<Scalar> x(rows, cols);
    for (Index n = 0; n < rows; ++n)
        for (Index m = 0; m < cols; ++m) {
            x.re(n, m) = v[n * cols + m].real();
            x.im(n, m) = v[n * cols + m].imag();
        }
    return x;
}

inline constexpr Index kKronDefaultLimit = 4096;

/// Materialises (A kron B) with E[p, q] = A[k, n] * B[l, m], p = k*M + l, q = n*M + m,
/// and multiplies it into vec(x). Quadratic memory in N*M, so guarded by `limit`.
template <class Scalar>
ComplexVector<Scalar> kron_apply(const ComplexMatrix<Scalar>& a, const ComplexMatrix<Scalar>& b,
                                 const ComplexGrid<Scalar>& x, Index limit = kKronDefaultLimit) {
    const Index N = a.rows(), M = b.rows();
    if (a.cols() != N || b.cols() != M) throw DimensionError("kron_apply: factors must be square");
    if (x.rows() != N || x.cols() != M)
        throw DimensionError("kron_apply: grid is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                             ", factors imply " + std::to_string(N) + "x" + std::to_string(M));
    if (N * M > limit)
        throw ResourceError("kron_apply: N*M = " + std::to_string(N * M) + " exceeds limit " + std::to_string(limit));
    ComplexMatrix<Scalar> e(N * M, N * M);
    for (Index k = 0; k < N; ++k)
        for (Index l = 0; l < M; ++l)
            for (Index n = 0; n < N; ++n)
                for (Index m = 0; m < M; ++m) e(k * M + l, n * M + m) = a(k, n) * b(l, m);
    return e * vec(x);
}

/// Inverse of dft2 with the full 1/(N*M) normalisation on this side.
template <class Scalar>
ComplexGrid<Scalar> idft2(const ComplexGrid<Scalar>& y) {
    const ComplexMatrix<Scalar> fn = dft_matrix<Scalar>(y.rows(), true);
    const ComplexMatrix<Scalar> fm = dft_matrix<Scalar>(y.cols(), true);
    const ComplexMatrix<Scalar> x = fn * y.complex() * fm.transpose() / Scalar(y.rows() * y.cols());
    return ComplexGrid<Scalar>::from_complex(x);
}

/// Forward 2-D DFT used by the data pipeline (separable products).
template <class Scalar>
ComplexGrid<Scalar> dft2(const ComplexGrid<Scalar>& x) {
    return dft2_separable(x);
}

}  // namespace dautomap
