#pragma once

// Synthetic cardiac-like phantoms, k-space simulation and the dataset file.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dautomap/binary_io.hpp"
#include "dautomap/dft.hpp"
#include "dautomap/sampling.hpp"
#include "dautomap/tensor.hpp"

namespace dautomap {

/// Magnitude images in [0, 1], stored as a (count, 1, N, M) tensor.
struct Dataset {
    Tensor4f images;
    std::uint64_t seed = 0;

    Index count() const noexcept { return images.batch(); }
    Index rows() const noexcept { return images.height(); }
    Index cols() const noexcept { return images.width(); }
    RowMatrix<float> image(Index i) const { return images.plane(i, 0); }

    bool operator==(const Dataset&) const = default;
};

/// Phantom i uses stream split(kPhantom).split(i) of `seed`, so images are independent
/// of count and of generation order.
Dataset gen_phantoms(Index count, Index rows, Index cols, std::uint64_t seed);
RowMatrix<double> phantom(Index rows, Index cols, std::uint64_t seed, Index index);

/// Separable Gaussian blur, kernel radius ceil(3 sigma), zero padding.
RowMatrix<double> gaussian_blur(const RowMatrix<double>& image, double sigma);

template <class Scalar>
struct Sample {
    Tensor4<Scalar> target;  ///< (1, 1, N, M)
    Tensor4<Scalar> input;   ///< (1, 2, N, M) masked k-space, DC at (0, 0)
};

/// Frequencies f in [-N/2, N/2) of the larger spectrum, rescaled by N*M / (N0*M0)
/// so pixel intensities survive the change of grid.
ComplexGrid<double> crop_kspace(const ComplexGrid<double>& kspace, Index rows, Index cols);

/// image -> dft2 -> centre crop to the mask grid -> mask. When cropping happens the
/// target is |idft2| of the fully sampled crop; otherwise it is the image itself.
/// `kspace_scale` multiplies the network input only.
template <class Scalar>
Sample<Scalar> simulate_sample(const RowMatrix<double>& image, const SamplingMask& mask, double kspace_scale = 1.0) {
    const Index n = mask.rows(), m = mask.cols();
    if (image.rows() < n || image.cols() < m)
        throw DimensionError("simulate_sample: image " + std::to_string(image.rows()) + "x" +
                             std::to_string(image.cols()) + " is smaller than mask " + std::to_string(n) + "x" +
                             std::to_string(m));
    ComplexGrid<double> k = dft2(ComplexGrid<double>(image, RowMatrix<double>::Zero(image.rows(), image.cols())));
    Sample<Scalar> s{Tensor4<Scalar>(1, 1, n, m), Tensor4<Scalar>(1, 2, n, m)};
    if (image.rows() != n || image.cols() != m) {
        k = crop_kspace(k, n, m);
        s.target.plane(0, 0) = idft2(k).magnitude().template cast<Scalar>();
    } else {
        s.target.plane(0, 0) = image.template cast<Scalar>();
    }
    const ComplexGrid<double> masked = apply_mask(k, mask);
    s.input.plane(0, 0) = (masked.re * kspace_scale).template cast<Scalar>();
    s.input.plane(0, 1) = (masked.im * kspace_scale).template cast<Scalar>();
    return s;
}

template <class Scalar>
struct Batch {
    Tensor4<Scalar> input;   ///< (B, 2, N, M)
    Tensor4<Scalar> target;  ///< (B, 1, N, M)
};

/// Every image of the dataset through one mask.
template <class Scalar>
Batch<Scalar> simulate_dataset(const Dataset& data, const SamplingMask& mask, double kspace_scale = 1.0) {
    Batch<Scalar> out{Tensor4<Scalar>(data.count(), 2, mask.rows(), mask.cols()),
                      Tensor4<Scalar>(data.count(), 1, mask.rows(), mask.cols())};
    for (Index i = 0; i < data.count(); ++i) {
        const auto s = simulate_sample<Scalar>(data.image(i).cast<double>(), mask, kspace_scale);
        out.input.plane(i, 0) = s.input.plane(0, 0);
        out.input.plane(i, 1) = s.input.plane(0, 1);
        out.target.plane(i, 0) = s.target.plane(0, 0);
    }
    return out;
}

/// Rows `indices` of a batch, in order.
template <class Scalar>
Batch<Scalar> gather(const Batch<Scalar>& all, std::span<const Index> indices) {
    const Index n = all.input.height(), m = all.input.width();
    Batch<Scalar> out{Tensor4<Scalar>(Index(indices.size()), 2, n, m), Tensor4<Scalar>(Index(indices.size()), 1, n, m)};
    const Index in_stride = 2 * n * m, t_stride = n * m;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Index i = indices[k];
        std::copy_n(all.input.data() + i * in_stride, in_stride, out.input.data() + Index(k) * in_stride);
        std::copy_n(all.target.data() + i * t_stride, t_stride, out.target.data() + Index(k) * t_stride);
    }
    return out;
}

/// |idft2| of each (re, im) k-space pair, undoing `kspace_scale`: (B, 2, N, M) -> (B, 1, N, M).
template <class Scalar>
Tensor4<Scalar> zero_filled(const Tensor4<Scalar>& kspace, double kspace_scale = 1.0) {
    Tensor4<Scalar> out(kspace.batch(), 1, kspace.height(), kspace.width());
    for (Index b = 0; b < kspace.batch(); ++b) {
        const ComplexGrid<double> k(kspace.plane(b, 0).template cast<double>() / kspace_scale,
                                    kspace.plane(b, 1).template cast<double>() / kspace_scale);
        out.plane(b, 0) = idft2(k).magnitude().template cast<Scalar>();
    }
    return out;
}

Bytes encode_dataset(const Dataset& data);
Dataset decode_dataset(const Bytes& bytes);
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace dautomap
