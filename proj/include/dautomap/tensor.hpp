#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>

#include "dautomap/error.hpp"

namespace dautomap {

using Index = Eigen::Index;

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class Scalar>
using RowArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// (batch, channels, height, width).
struct Shape {
    Index batch = 0;
    Index channels = 0;
    Index height = 0;
    Index width = 0;

    Index numel() const noexcept { return batch * channels * height * width; }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        std::ostringstream os;
        os << '(' << batch << ", " << channels << ", " << height << ", " << width << ')';
        return os.str();
    }
};

/// Dense 4-axis real array, row-major: index(b,c,h,w) = ((b*C + c)*H + h)*W + w.
template <class Scalar_>
class Tensor4 {
public:
    using Scalar = Scalar_;
    using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    using PlaneMap = Eigen::Map<RowMatrix<Scalar>>;
    using ConstPlaneMap = Eigen::Map<const RowMatrix<Scalar>>;

    Tensor4() = default;

    explicit Tensor4(const Shape& shape, Scalar fill = Scalar(0)) : shape_(shape) {
        if (shape.batch < 0 || shape.channels < 0 || shape.height < 0 || shape.width < 0)
            throw DimensionError("negative tensor dimension " + shape.str());
        data_ = Storage::Constant(shape.numel(), fill);
    }

    Tensor4(Index b, Index c, Index h, Index w, Scalar fill = Scalar(0))
        : Tensor4(Shape{b, c, h, w}, fill) {}

    Tensor4(const Shape& shape, std::initializer_list<Scalar> values) : Tensor4(shape) {
        if (static_cast<Index>(values.size()) != shape.numel())
            throw DimensionError("initializer has " + std::to_string(values.size()) +
                                 " values for shape " + shape.str());
        Index i = 0;
        for (Scalar v : values) data_[i++] = v;
    }

    /// Shape (1, 1, 1, n); the layout used for bias vectors.
    static Tensor4 vector(Index n, Scalar fill = Scalar(0)) { return Tensor4(1, 1, 1, n, fill); }

    const Shape& shape() const noexcept { return shape_; }
    Index batch() const noexcept { return shape_.batch; }
    Index channels() const noexcept { return shape_.channels; }
    Index height() const noexcept { return shape_.height; }
    Index width() const noexcept { return shape_.width; }
    Index size() const noexcept { return data_.size(); }

    Index offset(Index b, Index c, Index h, Index w) const noexcept {
        return ((b * shape_.channels + c) * shape_.height + h) * shape_.width + w;
    }

    Scalar& operator()(Index b, Index c, Index h, Index w) noexcept { return data_[offset(b, c, h, w)]; }
    Scalar operator()(Index b, Index c, Index h, Index w) const noexcept {
        return data_[offset(b, c, h, w)];
    }

    Scalar& operator[](Index i) noexcept { return data_[i]; }
    Scalar operator[](Index i) const noexcept { return data_[i]; }

    Storage& array() noexcept { return data_; }
    const Storage& array() const noexcept { return data_; }

    Scalar* data() noexcept { return data_.data(); }
    const Scalar* data() const noexcept { return data_.data(); }

    std::span<Scalar> span() noexcept { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
    std::span<const Scalar> span() const noexcept {
        return {data_.data(), static_cast<std::size_t>(data_.size())};
    }

    /// H x W view of one (batch, channel) plane.
    PlaneMap plane(Index b, Index c) noexcept {
        return PlaneMap(data_.data() + offset(b, c, 0, 0), shape_.height, shape_.width);
    }
    ConstPlaneMap plane(Index b, Index c) const noexcept {
        return ConstPlaneMap(data_.data() + offset(b, c, 0, 0), shape_.height, shape_.width);
    }

    /// Same data, new shape of equal element count.
    Tensor4 reshaped(const Shape& shape) const {
        if (shape.numel() != shape_.numel())
            throw DimensionError("cannot reshape " + shape_.str() + " to " + shape.str());
        Tensor4 out;
        out.shape_ = shape;
        out.data_ = data_;
        return out;
    }

    template <class Other>
    Tensor4<Other> cast() const {
        Tensor4<Other> out(shape_);
        out.array() = data_.template cast<Other>();
        return out;
    }

    void set_zero() { data_.setZero(); }

    bool operator==(const Tensor4& other) const {
        return shape_ == other.shape_ && (data_ == other.data_).all();
    }

private:
    Shape shape_{};
    Storage data_;
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (!(a == b))
        throw DimensionError(std::string(what) + ": shape " + a.str() + " does not match " + b.str());
}

template <class Scalar>
Scalar max_abs_diff(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b) {
    require_same_shape(a.shape(), b.shape(), "max_abs_diff");
    if (a.size() == 0) return Scalar(0);
    return (a.array() - b.array()).abs().maxCoeff();
}

/// Named handle into a parameter set; what optimisers and checkpoints iterate over.
template <class Scalar, class Tensor = Tensor4<Scalar>>
struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

template <class Scalar>
using ConstNamedTensor = NamedTensor<Scalar, const Tensor4<Scalar>>;

}  // namespace dautomap
