#include "dautomap/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dautomap/rng.hpp"

namespace dautomap {

namespace {

constexpr char kMaskMagic[] = "DMSK";
constexpr std::uint8_t kMaskVersion = 1;

void check_request(Index n, Index m, float af) {
    if (n < 1 || m < 1) throw ConfigError("mask: grid must be at least 1x1");
    if (!(af >= 1.0f)) throw ConfigError("mask: acceleration factor must be >= 1, got " + std::to_string(af));
}

bool within_tolerance(double fraction, double target) {
    return std::abs(fraction - target) <= kFractionTolerance * target;
}

double fraction_of(const MaskGrid& g) {
    return double(g.cast<Index>().sum()) / double(g.size());
}

struct Darts {
    Index n, m;
    std::vector<MaskPoint> position;  // per cell, row-major
    std::vector<Index> order;
    std::vector<std::uint8_t> forced;
};

Darts prepare_darts(Index n, Index m, std::uint64_t seed) {
    Darts d{n, m, {}, {}, std::vector<std::uint8_t>(std::size_t(n * m), 0)};
    SplitMix64 rng = SplitMix64(seed).split(streams::kMask);
    d.position.reserve(std::size_t(n * m));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) {
            const double dr = rng.uniform(-0.5, 0.5);
            const double dc = rng.uniform(-0.5, 0.5);
            d.position.push_back({double(i) + dr, double(j) + dc});
        }
    d.order.resize(std::size_t(n * m));
    std::iota(d.order.begin(), d.order.end(), Index(0));
    rng.shuffle(std::span<Index>(d.order));

    const Index rows = std::min(kPoissonCenterSide, n), cols = std::min(kPoissonCenterSide, m);
    const Index r0 = center_first(n, rows), c0 = center_first(m, cols);
    for (Index i = r0; i < r0 + rows; ++i)
        for (Index j = c0; j < c0 + cols; ++j) d.forced[std::size_t(i * m + j)] = 1;
    return d;
}

template <class RadiusFn>
SamplingMask throw_darts(const Darts& d, RadiusFn&& radius_at) {
    SamplingMask mask;
    mask.grid = MaskGrid::Zero(d.n, d.m);
    std::vector<Index> owner(std::size_t(d.n * d.m), -1);
    std::vector<Index> accepted;
    for (Index cell = 0; cell < d.n * d.m; ++cell)
        if (d.forced[std::size_t(cell)]) mask.grid(cell / d.m, cell % d.m) = 1;

    for (const Index cell : d.order) {
        if (d.forced[std::size_t(cell)]) continue;
        const MaskPoint p = d.position[std::size_t(cell)];
        const double r = radius_at(p);
        const double r2 = r * r;
        auto too_close = [&](Index other) {
            const MaskPoint q = d.position[std::size_t(other)];
            const double dr = p.row - q.row, dc = p.col - q.col;
            return dr * dr + dc * dc < r2;
        };
        bool ok = true;
        if (r > 0) {
            const Index w = Index(std::ceil(r)) + 1;
            if ((2 * w + 1) * (2 * w + 1) > Index(accepted.size())) {
                ok = std::none_of(accepted.begin(), accepted.end(), too_close);
            } else {
                const Index ci = cell / d.m, cj = cell % d.m;
                for (Index i = std::max<Index>(0, ci - w); ok && i <= std::min(d.n - 1, ci + w); ++i)
                    for (Index j = std::max<Index>(0, cj - w); j <= std::min(d.m - 1, cj + w); ++j) {
                        const Index o = owner[std::size_t(i * d.m + j)];
                        if (o >= 0 && too_close(o)) {
                            ok = false;
                            break;
                        }
                    }
            }
        }
        if (!ok) continue;
        accepted.push_back(cell);
        owner[std::size_t(cell)] = cell;
        mask.grid(cell / d.m, cell % d.m) = 1;
    }
    for (const Index cell : accepted) mask.points.push_back(d.position[std::size_t(cell)]);
    mask.achieved_fraction = fraction_of(mask.grid);
    return mask;
}

// Bisection on a radius-like parameter; the sampled fraction decreases as it grows.
template <class Generate>
SamplingMask tune_radius(double hi, double target, const char* what, Generate&& generate) {
    SamplingMask best = generate(0.0);
    best.radius = 0.0;
    if (within_tolerance(best.achieved_fraction, target)) return best;
    double lo = 0.0;
    for (int it = 0; it < kRadiusIterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        SamplingMask trial = generate(mid);
        trial.radius = mid;
        if (within_tolerance(trial.achieved_fraction, target)) return trial;
        if (std::abs(trial.achieved_fraction - target) < std::abs(best.achieved_fraction - target))
            best = trial;
        (trial.achieved_fraction > target ? lo : hi) = mid;
    }
    throw ConvergenceError(std::string(what) + ": radius bisection did not reach fraction " + std::to_string(target),
                           best.achieved_fraction);
}

SamplingMask finish(SamplingMask mask, Pattern pattern, float af, std::uint64_t seed) {
    mask.pattern = pattern;
    mask.af = af;
    mask.seed = seed;
    return mask;
}

}  // namespace

std::string_view pattern_name(Pattern p) {
    switch (p) {
        case Pattern::cartesian: return "cartesian";
        case Pattern::poisson: return "poisson";
        case Pattern::vdp: return "vdp";
    }
    return "unknown";
}

Pattern parse_pattern(std::string_view name) {
    for (Pattern p : {Pattern::cartesian, Pattern::poisson, Pattern::vdp})
        if (pattern_name(p) == name) return p;
    throw ConfigError("unknown mask pattern \"" + std::string(name) + "\" (expected cartesian, poisson or vdp)");
}

Index SamplingMask::count() const { return grid.cast<Index>().sum(); }

MaskGrid SamplingMask::unshifted() const {
    const Index n = rows(), m = cols();
    MaskGrid out(n, m);
    for (Index u = 0; u < n; ++u)
        for (Index v = 0; v < m; ++v) out(u, v) = grid((u + n / 2) % n, (v + m / 2) % m);
    return out;
}

Index cartesian_center_rows(Index n) { return std::max<Index>(1, Index(std::floor(0.08 * double(n)))); }

Index center_first(Index n, Index count) { return n / 2 - count / 2; }

SamplingMask cartesian_mask(Index n, Index m, float af, std::uint64_t seed) {
    check_request(n, m, af);
    if (double(af) > double(n))
        throw InfeasibleError("cartesian_mask: af " + std::to_string(af) + " exceeds the row count " +
                              std::to_string(n));
    const double target = 1.0 / double(af);
    const Index rows_on = std::max<Index>(1, Index(std::llround(double(n) * target)));
    if (!within_tolerance(double(rows_on) / double(n), target))
        throw InfeasibleError("cartesian_mask: " + std::to_string(n) + " rows cannot realise af " +
                              std::to_string(af) + " within 10%");
    const Index center = std::min(cartesian_center_rows(n), rows_on);
    const Index first = center_first(n, center);

    std::vector<Index> others;
    for (Index r = 0; r < n; ++r)
        if (r < first || r >= first + center) others.push_back(r);
    SplitMix64 rng = SplitMix64(seed).split(streams::kMask);
    rng.shuffle(std::span<Index>(others));

    SamplingMask mask;
    mask.grid = MaskGrid::Zero(n, m);
    mask.grid.middleRows(first, center).setOnes();
    for (Index k = 0; k < rows_on - center; ++k) mask.grid.row(others[std::size_t(k)]).setOnes();
    mask.achieved_fraction = fraction_of(mask.grid);
    return finish(std::move(mask), Pattern::cartesian, af, seed);
}

SamplingMask poisson_mask(Index n, Index m, float af, std::uint64_t seed) {
    check_request(n, m, af);
    const Darts darts = prepare_darts(n, m, seed);
    SamplingMask mask = tune_radius(std::hypot(double(n), double(m)), 1.0 / double(af), "poisson_mask",
                                    [&](double r) { return throw_darts(darts, [r](MaskPoint) { return r; }); });
    return finish(std::move(mask), Pattern::poisson, af, seed);
}

SamplingMask vdp_mask(Index n, Index m, float af, std::uint64_t seed) {
    check_request(n, m, af);
    const Darts darts = prepare_darts(n, m, seed);
    const double cr = double(n / 2), cc = double(m / 2);
    const double dmax = std::max(std::hypot(double(n) / 2, double(m) / 2), 1e-12);
    SamplingMask mask = tune_radius(std::hypot(double(n), double(m)), 1.0 / double(af), "vdp_mask", [&](double r0) {
        return throw_darts(darts, [&](MaskPoint p) {
            const double d = std::hypot(p.row - cr, p.col - cc);
            return r0 * (1.0 + 2.0 * d / dmax);
        });
    });
    return finish(std::move(mask), Pattern::vdp, af, seed);
}

SamplingMask make_mask(Pattern pattern, Index n, Index m, float af, std::uint64_t seed) {
    switch (pattern) {
        case Pattern::cartesian: return cartesian_mask(n, m, af, seed);
        case Pattern::poisson: return poisson_mask(n, m, af, seed);
        case Pattern::vdp: return vdp_mask(n, m, af, seed);
    }
    throw ConfigError("make_mask: unknown pattern");
}

SamplingMask full_mask(Index n, Index m) {
    SamplingMask mask;
    mask.grid = MaskGrid::Ones(n, m);
    mask.achieved_fraction = 1.0;
    return mask;
}

Bytes encode_mask(const SamplingMask& mask) {
    ByteWriter w;
    w.put_magic(std::string_view(kMaskMagic, 4));
    w.put<std::uint8_t>(kMaskVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(mask.pattern));
    w.put<float>(mask.af);
    w.put<std::uint64_t>(mask.seed);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(mask.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(mask.cols()));
    w.put_array(mask.grid.data(), std::size_t(mask.grid.size()));
    return w.take();
}

SamplingMask decode_mask(const Bytes& bytes) {
    ByteReader r(bytes, "mask file");
    r.expect_magic(std::string_view(kMaskMagic, 4));
    std::size_t at = r.offset();
    if (const auto v = r.get<std::uint8_t>("version"); v != kMaskVersion)
        r.fail_at("unsupported version " + std::to_string(v), at);
    at = r.offset();
    const auto pattern = r.get<std::uint8_t>("pattern");
    if (pattern > 2) r.fail_at("unknown pattern code " + std::to_string(pattern), at);
    SamplingMask mask;
    mask.pattern = static_cast<Pattern>(pattern);
    mask.af = r.get<float>("af");
    mask.seed = r.get<std::uint64_t>("seed");
    at = r.offset();
    const auto n = r.get<std::uint32_t>("rows");
    const auto m = r.get<std::uint32_t>("cols");
    if (n == 0 || m == 0) r.fail_at("empty grid", at);
    mask.grid.resize(n, m);
    at = r.offset();
    r.get_array(mask.grid.data(), std::size_t(n) * m, "mask cells");
    r.expect_end();
    for (Index i = 0; i < mask.grid.size(); ++i)
        if (mask.grid.data()[i] > 1) r.fail_at("mask cell is not 0/1", at + std::size_t(i));
    mask.achieved_fraction = fraction_of(mask.grid);
    return mask;
}

void write_mask(const std::filesystem::path& path, const SamplingMask& mask) { write_file(path, encode_mask(mask)); }

SamplingMask read_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

}  // namespace dautomap
