#pragma once

// Image-quality metrics on real images and the paired signed-rank test.
//
// Constants: SSIM uses an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// valid windows only, L = dynamic range of the reference. HFEN filters with a 15x15
// zero-mean Laplacian of Gaussian (sigma 1.5), zero "same" padding, and reports
// ||LoG(x - ref)|| / ||LoG(ref)||. PSNR's peak is max(ref).

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dautomap/tensor.hpp"

namespace dautomap {

using Image = RowMatrix<double>;

inline constexpr Index kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr Index kLogSize = 15;
inline constexpr double kLogSigma = 1.5;
inline constexpr double kPsnrPerfect = std::numeric_limits<double>::infinity();

double mse(const Image& x, const Image& ref);
/// +infinity when x == ref.
double psnr(const Image& x, const Image& ref);
double ssim(const Image& x, const Image& ref);
double ssim(const Image& x, const Image& ref, double dynamic_range);
double hfen(const Image& x, const Image& ref);

/// Normalised 2-D Gaussian window.
Image gaussian_window(Index size, double sigma);
/// fspecial-style LoG: Gaussian-weighted (r^2 - 2 sigma^2) / sigma^4, then shifted to zero mean.
Image log_kernel(Index size, double sigma);
/// Zero-padded correlation keeping the input size; kernel sides odd.
Image filter_same(const Image& x, const Image& kernel);

enum class WilcoxonMethod { automatic, exact, normal };

struct WilcoxonResult {
    double statistic = 0;  ///< W+, the rank sum of positive differences a - b
    double p_value = 1;    ///< two-sided
    Index n_used = 0;      ///< pairs left after dropping zero differences
    bool exact = false;
};

inline constexpr Index kWilcoxonMinPairs = 6;
inline constexpr Index kWilcoxonExactMax = 20;

/// Zero differences are discarded; ties share midranks. Exact permutation distribution
/// for n <= 20 under `automatic`, otherwise the normal approximation with continuity and
/// tie corrections.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                    WilcoxonMethod method = WilcoxonMethod::automatic);

/// Midranks (1-based) of the values.
std::vector<double> midranks(const std::vector<double>& values);

struct Stat {
    double mean = 0;
    double std = 0;  ///< population (divide by n)
};

/// Mean and population standard deviation; +inf entries give mean +inf and std NaN.
Stat aggregate(const std::vector<double>& values);

/// Welford accumulator, for comparison with aggregate().
class RunningStat {
public:
    void push(double x);
    Stat stat() const;
    Index count() const noexcept { return n_; }

private:
    Index n_ = 0;
    double mean_ = 0, m2_ = 0;
};

struct MetricReport {
    std::vector<double> mse, psnr, ssim, hfen;

    void add(const Image& x, const Image& ref);
    Index count() const noexcept { return Index(mse.size()); }
};

/// "name.metric.mean = value" lines.
std::string to_text(const MetricReport& report, const std::string& name);
/// {"count", "per_image": {metric: [...]}, "aggregate": {metric: {"mean", "std"}}};
/// non-finite numbers are written as the strings "inf", "-inf" or "nan".
nlohmann::ordered_json to_json(const MetricReport& report);
nlohmann::ordered_json json_number(double v);

}  // namespace dautomap
