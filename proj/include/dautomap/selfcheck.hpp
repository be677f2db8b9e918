#pragma once

// Exactness of the Fourier-initialised network pieces against the brute-force DFT.

#include <vector>

#include "dautomap/dft.hpp"
#include "dautomap/dt_layer.hpp"
#include "dautomap/rng.hpp"

namespace dautomap {

struct ExactnessRow {
    Index rows = 0;
    Index cols = 0;
    double forward = 0;  ///< dt_block(fourier forward) vs dft2_naive
    double inverse = 0;  ///< dt_block(fourier inverse) of the spectrum vs the input
    double kron = -1;    ///< kron_apply(F_N, F_M) vs vec(dft2_naive); -1 when skipped
    double kron_adjoint_gap = -1;  ///< distance between the ^T and ^H right factors
};

inline constexpr Index kKronMaxSide = 8;

inline ExactnessRow exactness_row(Index n, Index m, std::uint64_t seed) {
    SplitMix64 rng(seed);
    ComplexGrid<double> x(n, m);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) {
            x.re(i, j) = rng.uniform(-1, 1);
            x.im(i, j) = rng.uniform(-1, 1);
        }
    const auto oracle = dft2_naive(x);
    ExactnessRow row{n, m};
    const auto y = ComplexGrid<double>::from_tensor(
        dt_block(x.to_tensor(), DtBlockParams<double>::fourier(n, m, Direction::forward)));
    row.forward = max_abs_diff(y, oracle);
    const auto back = ComplexGrid<double>::from_tensor(
        dt_block(oracle.to_tensor(), DtBlockParams<double>::fourier(n, m, Direction::inverse)));
    row.inverse = max_abs_diff(back, x);
    if (n <= kKronMaxSide && m <= kKronMaxSide) {
        const auto fn = dft_matrix<double>(n), fm = dft_matrix<double>(m);
        const auto k = kron_apply(fn, fm, x);
        row.kron = (k - vec(oracle)).cwiseAbs().maxCoeff();
        const ComplexMatrix<double> adjoint_form = fn * x.complex() * fm.adjoint();
        row.kron_adjoint_gap = (k - vec(ComplexGrid<double>::from_complex(adjoint_form))).cwiseAbs().maxCoeff();
    }
    return row;
}

/// Square grids 2, 4, ... up to max_side.
inline std::vector<ExactnessRow> exactness_suite(Index max_side, std::uint64_t seed = 1) {
    std::vector<ExactnessRow> rows;
    for (Index n = 2; n <= max_side; n *= 2) rows.push_back(exactness_row(n, n, seed + std::uint64_t(n)));
    return rows;
}

}  // namespace dautomap
