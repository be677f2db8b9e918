#include "dautomap/data.hpp"

#include <cmath>

#include "dautomap/rng.hpp"

namespace dautomap {

namespace {

constexpr char kDatasetMagic[] = "DSET";
constexpr std::uint8_t kDatasetVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

struct Ellipse {
    double cy, cx, ry, rx, angle;

    bool contains(double y, double x) const {
        const double c = std::cos(angle), s = std::sin(angle);
        const double dy = y - cy, dx = x - cx;
        const double u = c * dx + s * dy, v = -s * dx + c * dy;
        return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
    }
};

template <class Fn>
void paint(RowMatrix<double>& img, Fn&& value_at) {
    const Index n = img.rows(), m = img.cols();
    for (Index i = 0; i < n; ++i) {
        const double y = (2.0 * double(i) + 1.0) / double(n) - 1.0;
        for (Index j = 0; j < m; ++j) {
            const double x = (2.0 * double(j) + 1.0) / double(m) - 1.0;
            img(i, j) = value_at(img(i, j), y, x);
        }
    }
}

RowMatrix<double> blur_rows(const RowMatrix<double>& img, const std::vector<double>& k) {
    const Index r = Index(k.size() / 2), m = img.cols();
    RowMatrix<double> out = RowMatrix<double>::Zero(img.rows(), m);
    for (Index i = 0; i < img.rows(); ++i)
        for (Index j = 0; j < m; ++j) {
            double acc = 0;
            for (Index t = -r; t <= r; ++t)
                if (j + t >= 0 && j + t < m) acc += k[std::size_t(t + r)] * img(i, j + t);
            out(i, j) = acc;
        }
    return out;
}

}  // namespace

RowMatrix<double> gaussian_blur(const RowMatrix<double>& image, double sigma) {
    const Index r = Index(std::ceil(3.0 * sigma));
    std::vector<double> k(std::size_t(2 * r + 1));
    double total = 0;
    for (Index t = -r; t <= r; ++t) total += k[std::size_t(t + r)] = std::exp(-double(t * t) / (2 * sigma * sigma));
    for (auto& v : k) v /= total;
    const RowMatrix<double> h = blur_rows(image, k);
    return blur_rows(h.transpose(), k).transpose();
}

RowMatrix<double> phantom(Index rows, Index cols, std::uint64_t seed, Index index) {
    SplitMix64 rng = SplitMix64(seed).split(streams::kPhantom).split(std::uint64_t(index));
    RowMatrix<double> img = RowMatrix<double>::Zero(rows, cols);

    const Ellipse body{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.7, 0.9),
                       rng.uniform(0.6, 0.85), rng.uniform(-0.3, 0.3)};
    const double body_level = rng.uniform(0.25, 0.4);
    paint(img, [&](double v, double y, double x) { return body.contains(y, x) ? v + body_level : v; });

    const int blobs = 3 + int(rng.below(6));
    for (int k = 0; k < blobs; ++k) {
        const double rad = 0.6 * std::sqrt(rng.uniform()), phi = rng.uniform(0, 2 * std::numbers::pi);
        const Ellipse e{body.cy + rad * body.ry * std::sin(phi), body.cx + rad * body.rx * std::cos(phi),
                        rng.uniform(0.05, 0.25), rng.uniform(0.05, 0.25), rng.uniform(0, std::numbers::pi)};
        const double level = (rng.uniform() < 0.3 ? -1.0 : 1.0) * rng.uniform(0.05, 0.3);
        paint(img, [&](double v, double y, double x) { return e.contains(y, x) && body.contains(y, x) ? v + level : v; });
    }

    // ventricle: bright pool inside a darker wall
    const double cy = body.cy + rng.uniform(-0.15, 0.15), cx = body.cx + rng.uniform(-0.15, 0.15);
    const double outer = rng.uniform(0.2, 0.32), wall = outer * rng.uniform(0.3, 0.45);
    const double squash = rng.uniform(0.85, 1.15), tilt = rng.uniform(0, std::numbers::pi);
    const Ellipse ring_out{cy, cx, outer * squash, outer, tilt};
    const Ellipse ring_in{cy, cx, (outer - wall) * squash, outer - wall, tilt};
    const double wall_level = rng.uniform(0.5, 0.7), pool_level = rng.uniform(0.8, 1.0);
    paint(img, [&](double v, double y, double x) {
        if (ring_in.contains(y, x)) return pool_level;
        if (ring_out.contains(y, x)) return wall_level;
        return v;
    });

    const double gx = rng.uniform(-1, 1), gy = rng.uniform(-1, 1), gxy = rng.uniform(-1, 1);
    paint(img, [&](double v, double y, double x) { return v * (1.0 + 0.15 * (gx * x + gy * y) + 0.1 * gxy * x * y); });

    img = gaussian_blur(img, 1.0);
    const double lo = img.minCoeff(), hi = img.maxCoeff();
    if (hi > lo) img = ((img.array() - lo) / (hi - lo)).matrix();
    else img.setZero();
    return img;
}

Dataset gen_phantoms(Index count, Index rows, Index cols, std::uint64_t seed) {
    if (count < 1) throw ConfigError("gen_phantoms: count must be >= 1");
    if (rows < 1 || cols < 1) throw ConfigError("gen_phantoms: image must be at least 1x1");
    Dataset d{Tensor4f(count, 1, rows, cols), seed};
    for (Index i = 0; i < count; ++i) d.images.plane(i, 0) = phantom(rows, cols, seed, i).cast<float>();
    return d;
}

ComplexGrid<double> crop_kspace(const ComplexGrid<double>& kspace, Index rows, Index cols) {
    const Index n0 = kspace.rows(), m0 = kspace.cols();
    if (rows > n0 || cols > m0) throw DimensionError("crop_kspace: crop larger than the spectrum");
    const double scale = double(rows * cols) / double(n0 * m0);
    ComplexGrid<double> out(rows, cols);
    for (Index u = 0; u < rows; ++u) {
        const Index fu = (u + rows / 2) % rows - rows / 2;
        const Index su = (fu + n0) % n0;
        for (Index v = 0; v < cols; ++v) {
            const Index fv = (v + cols / 2) % cols - cols / 2;
            const Index sv = (fv + m0) % m0;
            out.re(u, v) = scale * kspace.re(su, sv);
            out.im(u, v) = scale * kspace.im(su, sv);
        }
    }
    return out;
}

Bytes encode_dataset(const Dataset& data) {
    ByteWriter w;
    w.put_magic(std::string_view(kDatasetMagic, 4));
    w.put<std::uint8_t>(kDatasetVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.count()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(data.cols()));
    w.put<std::uint8_t>(kDtypeF32);
    w.put<std::uint64_t>(data.seed);
    w.put_array(data.images.data(), std::size_t(data.images.size()));
    return w.take();
}

Dataset decode_dataset(const Bytes& bytes) {
    ByteReader r(bytes, "dataset file");
    r.expect_magic(std::string_view(kDatasetMagic, 4));
    std::size_t at = r.offset();
    if (const auto v = r.get<std::uint8_t>("version"); v != kDatasetVersion)
        r.fail_at("unsupported version " + std::to_string(v), at);
    at = r.offset();
    const auto count = r.get<std::uint32_t>("count");
    if (count == 0) r.fail_at("empty dataset (count 0)", at);
    at = r.offset();
    const auto n = r.get<std::uint32_t>("rows");
    const auto m = r.get<std::uint32_t>("cols");
    if (n == 0 || m == 0) r.fail_at("empty image shape", at);
    at = r.offset();
    if (const auto dtype = r.get<std::uint8_t>("dtype"); dtype != kDtypeF32)
        r.fail_at("unsupported dtype " + std::to_string(dtype), at);
    Dataset d;
    d.seed = r.get<std::uint64_t>("seed");
    const std::size_t values = std::size_t(count) * n * m;
    if (values > r.remaining() / sizeof(float)) r.fail("truncated image data");
    d.images = Tensor4f(Index(count), 1, Index(n), Index(m));
    r.get_array(d.images.data(), values, "image data");
    r.expect_end();
    return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) { write_file(path, encode_dataset(data)); }

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

}  // namespace dautomap
