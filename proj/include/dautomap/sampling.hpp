#pragma once

// Undersampling masks. Grids are stored shifted (k-space centre at row N/2, column M/2);
// unshifted() moves DC to (0, 0), the convention of the transforms.
//
// Poisson-type masks are dart-throwing over one candidate per cell, visited in a seeded
// order. Each candidate sits at its cell centre plus a fixed seeded jitter in
// [-0.5, 0.5)^2, so pairwise distances are continuous in the radius and the sampled
// fraction can be tuned finely. A candidate is rejected when an accepted point lies
// strictly closer than the radius evaluated at the candidate. The forced centre block is
// neither tested nor used as an obstacle.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dautomap/binary_io.hpp"
#include "dautomap/dft.hpp"
#include "dautomap/tensor.hpp"

namespace dautomap {

enum class Pattern : std::uint8_t { cartesian = 0, poisson = 1, vdp = 2 };

std::string_view pattern_name(Pattern p);
Pattern parse_pattern(std::string_view name);

using MaskGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MaskPoint {
    double row;
    double col;
};

struct SamplingMask {
    MaskGrid grid;  ///< shifted, 1 = sampled
    Pattern pattern = Pattern::cartesian;
    float af = 1.0f;
    std::uint64_t seed = 0;
    double achieved_fraction = 1.0;
    /// Poisson: final radius. VDP: final r0. Cartesian: 0.
    double radius = 0.0;
    /// Accepted dart positions (shifted coordinates), excluding the forced centre. Not persisted.
    std::vector<MaskPoint> points;

    Index rows() const noexcept { return grid.rows(); }
    Index cols() const noexcept { return grid.cols(); }
    Index count() const;

    /// Grid with DC at (0, 0): out(u, v) = grid((u + N/2) % N, (v + M/2) % M).
    MaskGrid unshifted() const;
};

/// Number of always-sampled centre rows of a Cartesian mask: max(1, floor(0.08 N)).
Index cartesian_center_rows(Index n);
/// Rows [first, first + count) of the forced centre band / block along an axis of length n.
Index center_first(Index n, Index count);
inline constexpr Index kPoissonCenterSide = 4;
inline constexpr int kRadiusIterations = 20;
inline constexpr double kFractionTolerance = 0.1;

SamplingMask cartesian_mask(Index n, Index m, float af, std::uint64_t seed);
SamplingMask poisson_mask(Index n, Index m, float af, std::uint64_t seed);
SamplingMask vdp_mask(Index n, Index m, float af, std::uint64_t seed);
SamplingMask make_mask(Pattern pattern, Index n, Index m, float af, std::uint64_t seed);
/// All-ones mask (af = 1), any pattern tag.
SamplingMask full_mask(Index n, Index m);

Bytes encode_mask(const SamplingMask& mask);
SamplingMask decode_mask(const Bytes& bytes);
void write_mask(const std::filesystem::path& path, const SamplingMask& mask);
SamplingMask read_mask(const std::filesystem::path& path);

/// Zeroes every unsampled k-space entry (both channels). kspace has DC at (0, 0).
template <class Scalar>
ComplexGrid<Scalar> apply_mask(const ComplexGrid<Scalar>& kspace, const SamplingMask& mask) {
    if (kspace.rows() != mask.rows() || kspace.cols() != mask.cols())
        throw DimensionError("apply_mask: k-space is " + std::to_string(kspace.rows()) + "x" +
                             std::to_string(kspace.cols()) + ", mask is " + std::to_string(mask.rows()) + "x" +
                             std::to_string(mask.cols()));
    const RowArray<Scalar> keep = mask.unshifted().template cast<Scalar>().array();
    return {(kspace.re.array() * keep).matrix(), (kspace.im.array() * keep).matrix()};
}

/// Batched form on a (B, 2, N, M) tensor.
template <class Scalar>
Tensor4<Scalar> apply_mask(const Tensor4<Scalar>& kspace, const SamplingMask& mask) {
    if (kspace.channels() != 2 || kspace.height() != mask.rows() || kspace.width() != mask.cols())
        throw DimensionError("apply_mask: tensor " + kspace.shape().str() + " does not match mask " +
                             std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()));
    const RowArray<Scalar> keep = mask.unshifted().template cast<Scalar>().array();
    Tensor4<Scalar> out = kspace;
    for (Index b = 0; b < kspace.batch(); ++b)
        for (Index c = 0; c < 2; ++c) out.plane(b, c).array() *= keep;
    return out;
}

}  // namespace dautomap
