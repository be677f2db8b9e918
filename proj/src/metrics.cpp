#include "dautomap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace dautomap {

namespace {

void require_same(const Image& x, const Image& ref, const char* what) {
    if (x.rows() != ref.rows() || x.cols() != ref.cols())
        throw DimensionError(std::string(what) + ": image is " + std::to_string(x.rows()) + "x" +
                             std::to_string(x.cols()) + ", reference is " + std::to_string(ref.rows()) + "x" +
                             std::to_string(ref.cols()));
    if (x.size() == 0) throw DimensionError(std::string(what) + ": empty image");
}

Image filter_valid(const Image& x, const Image& k) {
    const Index ho = x.rows() - k.rows() + 1, wo = x.cols() - k.cols() + 1;
    Image out(ho, wo);
    for (Index i = 0; i < ho; ++i)
        for (Index j = 0; j < wo; ++j) out(i, j) = (x.block(i, j, k.rows(), k.cols()).array() * k.array()).sum();
    return out;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double mse(const Image& x, const Image& ref) {
    require_same(x, ref, "mse");
    return (x - ref).squaredNorm() / double(x.size());
}

double psnr(const Image& x, const Image& ref) {
    require_same(x, ref, "psnr");
    const double peak = ref.maxCoeff();
    if (!(peak > ref.minCoeff())) throw MetricError("psnr: reference has zero dynamic range");
    const double err = mse(x, ref);
    if (err == 0.0) return kPsnrPerfect;
    return 10.0 * std::log10(peak * peak / err);
}

Image gaussian_window(Index size, double sigma) {
    Image w(size, size);
    const double c = double(size - 1) / 2;
    for (Index i = 0; i < size; ++i)
        for (Index j = 0; j < size; ++j) {
            const double r2 = (double(i) - c) * (double(i) - c) + (double(j) - c) * (double(j) - c);
            w(i, j) = std::exp(-r2 / (2 * sigma * sigma));
        }
    return w / w.sum();
}

Image log_kernel(Index size, double sigma) {
    const Image g = gaussian_window(size, sigma);
    const double c = double(size - 1) / 2, s2 = sigma * sigma;
    Image h(size, size);
    for (Index i = 0; i < size; ++i)
        for (Index j = 0; j < size; ++j) {
            const double r2 = (double(i) - c) * (double(i) - c) + (double(j) - c) * (double(j) - c);
            h(i, j) = g(i, j) * (r2 - 2 * s2) / (s2 * s2);
        }
    return (h.array() - h.mean()).matrix();
}

Image filter_same(const Image& x, const Image& kernel) {
    if (kernel.rows() % 2 == 0 || kernel.cols() % 2 == 0) throw ConfigError("filter_same: kernel sides must be odd");
    const Index pr = kernel.rows() / 2, pc = kernel.cols() / 2;
    Image padded = Image::Zero(x.rows() + 2 * pr, x.cols() + 2 * pc);
    padded.block(pr, pc, x.rows(), x.cols()) = x;
    return filter_valid(padded, kernel);
}

namespace {

void check_ssim_window(const Image& x) {
    if (x.rows() < kSsimWindow || x.cols() < kSsimWindow)
        throw ConfigError("ssim: image " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                          " is smaller than the " + std::to_string(kSsimWindow) + "x" +
                          std::to_string(kSsimWindow) + " window");
}

}  // namespace

double ssim(const Image& x, const Image& ref) {
    require_same(x, ref, "ssim");
    check_ssim_window(x);
    const double range = ref.maxCoeff() - ref.minCoeff();
    if (!(range > 0)) throw MetricError("ssim: reference has zero dynamic range");
    return ssim(x, ref, range);
}

double ssim(const Image& x, const Image& ref, double dynamic_range) {
    require_same(x, ref, "ssim");
    check_ssim_window(x);
    if (!(dynamic_range > 0)) throw MetricError("ssim: dynamic range must be positive");
    const Image w = gaussian_window(kSsimWindow, kSsimSigma);
    const double c1 = std::pow(kSsimK1 * dynamic_range, 2), c2 = std::pow(kSsimK2 * dynamic_range, 2);
    const Eigen::ArrayXXd mx = filter_valid(x, w).array(), my = filter_valid(ref, w).array();
    const Eigen::ArrayXXd sxx = filter_valid(x.cwiseProduct(x), w).array() - mx * mx;
    const Eigen::ArrayXXd syy = filter_valid(ref.cwiseProduct(ref), w).array() - my * my;
    const Eigen::ArrayXXd sxy = filter_valid(x.cwiseProduct(ref), w).array() - mx * my;
    return (((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))).mean();
}

double hfen(const Image& x, const Image& ref) {
    require_same(x, ref, "hfen");
    const Image k = log_kernel(kLogSize, kLogSigma);
    const double denom = filter_same(ref, k).norm();
    if (!(denom > 0)) throw MetricError("hfen: LoG of the reference is identically zero");
    return filter_same(x - ref, k).norm() / denom;
}

std::vector<double> midranks(const std::vector<double>& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * double(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    WilcoxonMethod method) {
    if (a.size() != b.size())
        throw DimensionError("wilcoxon: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " values");
    if (Index(a.size()) < kWilcoxonMinPairs)
        throw ConfigError("wilcoxon: needs at least " + std::to_string(kWilcoxonMinPairs) + " pairs, got " +
                          std::to_string(a.size()));
    std::vector<double> diff;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (std::isnan(d)) throw MetricError("wilcoxon: difference " + std::to_string(i) + " is NaN");
        if (d != 0.0) diff.push_back(d);
    }
    if (diff.empty()) throw DegenerateError("wilcoxon: all paired differences are zero");

    std::vector<double> mags(diff.size());
    std::transform(diff.begin(), diff.end(), mags.begin(), [](double d) { return std::abs(d); });
    const std::vector<double> ranks = midranks(mags);

    WilcoxonResult r;
    r.n_used = Index(diff.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        if (diff[i] > 0) r.statistic += ranks[i];

    const bool exact = method == WilcoxonMethod::exact ||
                       (method == WilcoxonMethod::automatic && r.n_used <= kWilcoxonExactMax);
    if (exact) {
        if (r.n_used > 30) throw ConfigError("wilcoxon: exact distribution limited to 30 pairs");
        // doubled midranks are integers; count sign assignments per doubled rank sum
        std::vector<std::uint64_t> twice(ranks.size());
        std::transform(ranks.begin(), ranks.end(), twice.begin(), [](double q) { return std::uint64_t(std::llround(2 * q)); });
        const std::uint64_t total = std::accumulate(twice.begin(), twice.end(), std::uint64_t(0));
        std::vector<double> ways(total + 1, 0.0);
        ways[0] = 1.0;
        for (const std::uint64_t t : twice)
            for (std::uint64_t s = total; s >= t; --s) {
                ways[s] += ways[s - t];
                if (s == t) break;
            }
        const std::uint64_t w2 = std::uint64_t(std::llround(2 * r.statistic));
        double lower = 0, upper = 0;
        for (std::uint64_t s = 0; s <= total; ++s) {
            if (s <= w2) lower += ways[s];
            if (s >= w2) upper += ways[s];
        }
        const double all = std::ldexp(1.0, int(r.n_used));
        r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        r.exact = true;
        return r;
    }

    const double n = double(r.n_used);
    double ties = 0;
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double t = double(j - i);
        ties += t * t * t - t;
        i = j;
    }
    const double mean = n * (n + 1) / 4;
    const double var = n * (n + 1) * (2 * n + 1) / 24 - ties / 48;
    const double z = std::max(std::abs(r.statistic - mean) - 0.5, 0.0) / std::sqrt(var);
    r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return r;
}

Stat aggregate(const std::vector<double>& values) {
    if (values.empty()) return {std::nan(""), std::nan("")};
    const double n = double(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (!std::isfinite(mean)) return {mean, std::nan("")};
    double ss = 0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

void RunningStat::push(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / double(n_);
    m2_ += delta * (x - mean_);
}

Stat RunningStat::stat() const {
    if (n_ == 0) return {std::nan(""), std::nan("")};
    return {mean_, std::sqrt(m2_ / double(n_))};
}

void MetricReport::add(const Image& x, const Image& ref) {
    mse.push_back(dautomap::mse(x, ref));
    psnr.push_back(dautomap::psnr(x, ref));
    ssim.push_back(dautomap::ssim(x, ref));
    hfen.push_back(dautomap::hfen(x, ref));
}

namespace {

template <class Fn>
void for_each_metric(const MetricReport& r, Fn&& fn) {
    fn("mse", r.mse);
    fn("psnr", r.psnr);
    fn("ssim", r.ssim);
    fn("hfen", r.hfen);
}

}  // namespace

std::string to_text(const MetricReport& report, const std::string& name) {
    std::string out = name + ".count = " + std::to_string(report.count()) + "\n";
    for_each_metric(report, [&](const char* metric, const std::vector<double>& v) {
        const Stat s = aggregate(v);
        out += name + "." + metric + ".mean = " + format_number(s.mean) + "\n";
        out += name + "." + metric + ".std = " + format_number(s.std) + "\n";
    });
    return out;
}

nlohmann::ordered_json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

nlohmann::ordered_json to_json(const MetricReport& report) {
    nlohmann::ordered_json j;
    j["count"] = report.count();
    nlohmann::ordered_json per_image = nlohmann::ordered_json::object(), agg = nlohmann::ordered_json::object();
    for_each_metric(report, [&](const char* metric, const std::vector<double>& v) {
        auto arr = nlohmann::ordered_json::array();
        for (const double x : v) arr.push_back(json_number(x));
        per_image[metric] = arr;
        const Stat s = aggregate(v);
        agg[metric] = {{"mean", json_number(s.mean)}, {"std", json_number(s.std)}};
    });
    j["per_image"] = per_image;
    j["aggregate"] = agg;
    return j;
}

}  // namespace dautomap
