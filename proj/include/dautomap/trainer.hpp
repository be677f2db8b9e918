#pragma once

// Mini-batch training of the decomposed-transform network, checkpoints, evaluation
// against the zero-filled baseline, and inference latency.
//
// A checkpoint is a directory holding manifest.json and tensors.f32. The blob is the
// concatenation of every model tensor (named() order) followed by the optimizer state
// tensors, as little-endian f32. The manifest records names, shapes, byte offsets, the
// training config (without output paths), epoch, shuffle RNG state and loss history,
// plus an FNV-1a 64 hash of the blob.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dautomap/data.hpp"
#include "dautomap/metrics.hpp"
#include "dautomap/model.hpp"
#include "dautomap/optim.hpp"
#include "dautomap/sampling.hpp"

namespace dautomap {

struct TrainConfig {
    Index epochs = 1000;
    Index batch_size = 16;
    OptimizerConfig optimizer = OptimizerConfig::defaults(OptimizerKind::adam);
    std::string loss = "mse";
    /// Weight of mean |activation| of the second autoencoder conv; 0 disables.
    double l1_weight = 1e-4;
    std::uint64_t seed = 0;
    std::string precision = "f32";
    /// Checkpoint every this many epochs (0: only at the end).
    Index eval_every = 0;
    /// Multiplies the network's k-space input.
    double kspace_scale = 1.0;
    /// Draw an independent mask per sample (same pattern and af) instead of one fixed mask.
    bool per_sample_masks = false;
    /// Checkpoint directory and loss.csv go here; empty keeps everything in memory.
    std::filesystem::path out_dir;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static TrainConfig from_json(const nlohmann::ordered_json& j);
};

struct Checkpoint {
    TrainConfig config;
    Index epoch = 0;
    std::uint64_t rng_state = 0;
    ModelParams<float> params;
    std::uint64_t optimizer_steps = 0;
    std::vector<std::pair<std::string, Tensor4f>> optimizer_state;
    std::vector<double> loss_history;
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kBlobFile = "tensors.f32";
inline constexpr const char* kLossFile = "loss.csv";

std::uint64_t fnv1a64(const Bytes& bytes, std::uint64_t h = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);
/// FNV-1a 64 over manifest.json then tensors.f32.
std::uint64_t checkpoint_hash(const std::filesystem::path& dir);

/// Called after each epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(Index, double)>;

struct TrainResult {
    Checkpoint checkpoint;
    double initial_loss = 0;  ///< first-epoch mean loss of this run (before resume, if any)
};

/// Trains from scratch, or continues `resume` up to config.epochs.
TrainResult train(const TrainConfig& config, const Dataset& data, const SamplingMask& mask,
                  const Checkpoint* resume = nullptr, const EpochCallback& on_epoch = {});

/// One mask per sample, seeds derived from the base mask's seed.
std::vector<SamplingMask> per_sample_masks(const SamplingMask& base, Index count);

struct EvalResult {
    MetricReport model;
    MetricReport zero_filled;
    std::optional<WilcoxonResult> psnr_test;  ///< model vs zero-filled PSNR
    std::string psnr_test_note;                ///< why the test is absent, if it is
};

/// |idft2| of the masked k-space against each target; no model involved.
MetricReport evaluate_zero_filled(const Dataset& data, const SamplingMask& mask);

template <class Scalar>
EvalResult evaluate(const ModelParams<Scalar>& params, const Dataset& data, const SamplingMask& mask,
                    double kspace_scale = 1.0, Index batch_size = 16) {
    if (data.count() < 1) throw ConfigError("evaluate: empty dataset");
    EvalResult r;
    const auto all = simulate_dataset<Scalar>(data, mask, kspace_scale);
    for (Index start = 0; start < data.count(); start += batch_size) {
        std::vector<Index> idx;
        for (Index i = start; i < std::min(data.count(), start + batch_size); ++i) idx.push_back(i);
        const auto batch = gather(all, std::span<const Index>(idx));
        const auto pred = dautomap_forward(batch.input, params);
        const auto zf = zero_filled(batch.input, kspace_scale);
        for (Index b = 0; b < batch.input.batch(); ++b) {
            const Image ref = batch.target.plane(b, 0).template cast<double>();
            r.model.add(pred.plane(b, 0).template cast<double>(), ref);
            r.zero_filled.add(zf.plane(b, 0).template cast<double>(), ref);
        }
    }
    try {
        r.psnr_test = wilcoxon_signed_rank(r.model.psnr, r.zero_filled.psnr);
    } catch (const Error& e) {
        r.psnr_test_note = e.what();
    }
    return r;
}

std::string to_text(const EvalResult& r);
nlohmann::ordered_json to_json(const EvalResult& r);

struct Latency {
    double mean_ms = 0;
    double std_ms = 0;
    Index runs = 0;
};

/// Wall-clock of single-image forward passes on random k-space; warm-up runs excluded.
Latency benchmark(const ModelParams<float>& params, Index runs, Index warmup = 10, std::uint64_t seed = 0);

}  // namespace dautomap
