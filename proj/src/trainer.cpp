#include "dautomap/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "dautomap/rng.hpp"

namespace dautomap {

using Json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "dautomap-checkpoint";
constexpr int kFormatVersion = 1;

template <class T>
T field(const Json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing field \"") + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("field \"") + key + "\": " + e.what());
    }
}

template <class T>
T field_or(const Json& j, const char* key, T fallback) {
    return j.contains(key) ? field<T>(j, key) : fallback;
}

Json shape_json(const Shape& s) { return Json::array({s.batch, s.channels, s.height, s.width}); }

Shape shape_from(const Json& j) {
    if (!j.is_array() || j.size() != 4) throw ConfigError("tensor shape must have 4 entries");
    return {j[0].get<Index>(), j[1].get<Index>(), j[2].get<Index>(), j[3].get<Index>()};
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_loss_csv(const std::filesystem::path& dir, const std::vector<double>& history) {
    std::string text = "epoch,loss\n";
    for (std::size_t e = 0; e < history.size(); ++e) text += std::to_string(e + 1) + "," + format_g17(history[e]) + "\n";
    write_file(dir / kLossFile, Bytes(text.begin(), text.end()));
}

Batch<float> build_samples(const TrainConfig& config, const Dataset& data, const SamplingMask& mask) {
    if (!config.per_sample_masks) return simulate_dataset<float>(data, mask, config.kspace_scale);
    const auto masks = per_sample_masks(mask, data.count());
    Batch<float> out{Tensor4f(data.count(), 2, mask.rows(), mask.cols()), Tensor4f(data.count(), 1, mask.rows(), mask.cols())};
    for (Index i = 0; i < data.count(); ++i) {
        const auto s = simulate_sample<float>(data.image(i).cast<double>(), masks[std::size_t(i)], config.kspace_scale);
        out.input.plane(i, 0) = s.input.plane(0, 0);
        out.input.plane(i, 1) = s.input.plane(0, 1);
        out.target.plane(i, 0) = s.target.plane(0, 0);
    }
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (loss != "mse") throw ConfigError("unsupported loss \"" + loss + "\" (only mse)");
    if (precision != "f32") throw ConfigError("unsupported training precision \"" + precision + "\" (only f32)");
    if (!(l1_weight >= 0)) throw ConfigError("l1 weight must be >= 0");
    if (eval_every < 0) throw ConfigError("eval-every must be >= 0");
    if (!(kspace_scale > 0) || !std::isfinite(kspace_scale)) throw ConfigError("k-space scale must be positive");
    if (!(optimizer.lr >= 0)) throw ConfigError("learning rate must be >= 0");
}

Json TrainConfig::to_json() const {
    return Json{{"epochs", epochs},
                {"batch_size", batch_size},
                {"optimizer",
                 {{"kind", std::string(optimizer_name(optimizer.kind))},
                  {"lr", optimizer.lr},
                  {"beta1", optimizer.beta1},
                  {"beta2", optimizer.beta2},
                  {"alpha", optimizer.alpha},
                  {"eps", optimizer.eps},
                  {"max_grad_norm", optimizer.max_grad_norm}}},
                {"loss", loss},
                {"l1_weight", l1_weight},
                {"seed", seed},
                {"precision", precision},
                {"eval_every", eval_every},
                {"kspace_scale", kspace_scale},
                {"per_sample_masks", per_sample_masks}};
}

TrainConfig TrainConfig::from_json(const Json& j) {
    TrainConfig c;
    c.epochs = field<Index>(j, "epochs");
    c.batch_size = field<Index>(j, "batch_size");
    const Json& o = j.at("optimizer");
    c.optimizer.kind = parse_optimizer(field<std::string>(o, "kind"));
    c.optimizer.lr = field<double>(o, "lr");
    c.optimizer.beta1 = field<double>(o, "beta1");
    c.optimizer.beta2 = field<double>(o, "beta2");
    c.optimizer.alpha = field<double>(o, "alpha");
    c.optimizer.eps = field<double>(o, "eps");
    c.optimizer.max_grad_norm = field_or<double>(o, "max_grad_norm", 0.0);
    c.loss = field<std::string>(j, "loss");
    c.l1_weight = field<double>(j, "l1_weight");
    c.seed = field<std::uint64_t>(j, "seed");
    c.precision = field<std::string>(j, "precision");
    c.eval_every = field_or<Index>(j, "eval_every", 0);
    c.kspace_scale = field_or<double>(j, "kspace_scale", 1.0);
    c.per_sample_masks = field_or<bool>(j, "per_sample_masks", false);
    c.validate();
    return c;
}

std::uint64_t fnv1a64(const Bytes& bytes, std::uint64_t h) {
    for (const std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
    ByteWriter blob;
    Json tensors = Json::array();
    auto put = [&](const std::string& name, const Tensor4f& t, const char* group) {
        tensors.push_back({{"name", name}, {"group", group}, {"shape", shape_json(t.shape())},
                           {"offset", blob.bytes().size()}, {"bytes", std::size_t(t.size()) * sizeof(float)}});
        blob.put_array(t.data(), std::size_t(t.size()));
    };
    for (const auto& nt : ckpt.params.named()) put(nt.name, *nt.tensor, "model");
    for (const auto& [name, t] : ckpt.optimizer_state) put(name, t, "optimizer");

    Json history = Json::array();
    for (const double v : ckpt.loss_history) history.push_back(json_number(v));
    const Json manifest{{"format", kFormat},
                        {"version", kFormatVersion},
                        {"model", "dautomap"},
                        {"rows", ckpt.params.rows},
                        {"cols", ckpt.params.cols},
                        {"epoch", ckpt.epoch},
                        {"config", ckpt.config.to_json()},
                        {"rng_state", ckpt.rng_state},
                        {"optimizer_steps", ckpt.optimizer_steps},
                        {"blob", kBlobFile},
                        {"blob_bytes", blob.bytes().size()},
                        {"blob_fnv1a64", hex64(fnv1a64(blob.bytes()))},
                        {"tensors", tensors},
                        {"loss_history", history}};
    std::filesystem::create_directories(dir);
    write_file(dir / kBlobFile, blob.bytes());
    const std::string text = manifest.dump(2) + "\n";
    write_file(dir / kManifestFile, Bytes(text.begin(), text.end()));
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    const Bytes manifest_bytes = read_file(dir / kManifestFile);
    Json m;
    try {
        m = Json::parse(manifest_bytes.begin(), manifest_bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("checkpoint manifest: " + std::string(e.what()), e.byte);
    }
    if (field<std::string>(m, "format") != kFormat) throw ConfigError("not a dautomap checkpoint: " + dir.string());
    if (field<int>(m, "version") != kFormatVersion) throw ConfigError("unsupported checkpoint version");
    const Bytes blob = read_file(dir / field<std::string>(m, "blob"));
    if (blob.size() != field<std::size_t>(m, "blob_bytes"))
        throw FormatError("checkpoint blob has " + std::to_string(blob.size()) + " bytes, manifest says " +
                              std::to_string(field<std::size_t>(m, "blob_bytes")),
                          blob.size());
    if (hex64(fnv1a64(blob)) != field<std::string>(m, "blob_fnv1a64"))
        throw FormatError("checkpoint blob hash mismatch", 0);

    Checkpoint c;
    c.config = TrainConfig::from_json(m.at("config"));
    c.epoch = field<Index>(m, "epoch");
    c.rng_state = field<std::uint64_t>(m, "rng_state");
    c.optimizer_steps = field<std::uint64_t>(m, "optimizer_steps");
    c.params = ModelParams<float>::random(field<Index>(m, "rows"), field<Index>(m, "cols"), 0);
    for (const auto& v : m.at("loss_history"))
        c.loss_history.push_back(v.is_number() ? v.get<double>() : std::nan(""));

    auto params = c.params.named();
    std::size_t next_param = 0;
    for (const auto& t : m.at("tensors")) {
        const std::string name = field<std::string>(t, "name");
        const Shape shape = shape_from(t.at("shape"));
        const auto offset = field<std::size_t>(t, "offset"), bytes = field<std::size_t>(t, "bytes");
        if (bytes != std::size_t(shape.numel()) * sizeof(float) || offset > blob.size() || bytes > blob.size() - offset)
            throw FormatError("tensor " + name + " lies outside the blob", offset);
        Tensor4f value(shape);
        std::memcpy(value.data(), blob.data() + offset, bytes);
        if (field<std::string>(t, "group") == "model") {
            if (next_param >= params.size() || params[next_param].name != name)
                throw ConfigError("checkpoint tensor " + name + " out of order");
            require_same_shape(shape, params[next_param].tensor->shape(), name.c_str());
            *params[next_param++].tensor = std::move(value);
        } else {
            c.optimizer_state.emplace_back(name, std::move(value));
        }
    }
    if (next_param != params.size()) throw ConfigError("checkpoint is missing model tensors");
    return c;
}

std::uint64_t checkpoint_hash(const std::filesystem::path& dir) {
    return fnv1a64(read_file(dir / kBlobFile), fnv1a64(read_file(dir / kManifestFile)));
}

std::vector<SamplingMask> per_sample_masks(const SamplingMask& base, Index count) {
    const SplitMix64 root = SplitMix64(base.seed).split(streams::kSampleMask);
    std::vector<SamplingMask> out;
    for (Index i = 0; i < count; ++i)
        out.push_back(make_mask(base.pattern, base.rows(), base.cols(), base.af, root.split(std::uint64_t(i)).state()));
    return out;
}

TrainResult train(const TrainConfig& config, const Dataset& data, const SamplingMask& mask, const Checkpoint* resume,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (data.count() < 1) throw ConfigError("train: empty dataset");
    if (data.rows() < mask.rows() || data.cols() < mask.cols())
        throw DimensionError("train: images are " + std::to_string(data.rows()) + "x" + std::to_string(data.cols()) +
                             ", mask is " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()));

    const Batch<float> samples = build_samples(config, data, mask);
    const Index n = data.count();

    Checkpoint state;
    state.config = config;
    SplitMix64 shuffle_rng = SplitMix64(config.seed).split(streams::kShuffle);
    if (resume) {
        state = *resume;
        state.config.epochs = config.epochs;
        state.config.eval_every = config.eval_every;
        state.config.out_dir = config.out_dir;
        if (resume->params.rows != mask.rows() || resume->params.cols != mask.cols())
            throw DimensionError("train: checkpoint grid does not match the mask");
        shuffle_rng = SplitMix64(resume->rng_state);
    } else {
        state.params = ModelParams<float>::random(mask.rows(), mask.cols(), config.seed);
    }
    const TrainConfig& cfg = state.config;

    std::vector<ConstNamedTensor<float>> const_params;
    for (const auto& nt : std::as_const(state.params).named()) const_params.push_back(nt);
    Optimizer<float> opt(cfg.optimizer, const_params);
    if (resume) {
        auto slots = opt.state();
        if (slots.size() != resume->optimizer_state.size())
            throw ConfigError("checkpoint optimizer state does not match the optimizer kind");
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i].name != resume->optimizer_state[i].first)
                throw ConfigError("checkpoint optimizer tensor " + resume->optimizer_state[i].first + " unexpected");
            *slots[i].tensor = resume->optimizer_state[i].second;
        }
        opt.set_steps(resume->optimizer_steps);
    }

    auto snapshot = [&](Index epoch) {
        state.epoch = epoch;
        state.rng_state = shuffle_rng.state();
        state.optimizer_steps = opt.steps();
        state.optimizer_state.clear();
        for (const auto& s : opt.state()) state.optimizer_state.emplace_back(s.name, *s.tensor);
        if (!cfg.out_dir.empty()) save_checkpoint(cfg.out_dir, state);
    };

    TrainResult result;
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), Index(0));
        shuffle_rng.shuffle(std::span<Index>(order));
        double total = 0;
        for (Index start = 0; start < n; start += cfg.batch_size) {
            const Index count = std::min(cfg.batch_size, n - start);
            const auto batch = gather(samples, std::span<const Index>(order.data() + start, std::size_t(count)));
            GradTape<float> tape;
            const ModelVars vars = register_params(tape, state.params, true);
            const auto out = dautomap_forward(tape, tape.leaf(batch.input), vars);
            Var loss = tape.mse(out.output, tape.leaf(batch.target));
            if (cfg.l1_weight > 0)
                loss = tape.add(loss, tape.scale(tape.mean_abs(out.hidden), static_cast<float>(cfg.l1_weight)));
            const float value = tape.value(loss)[0];
            if (!std::isfinite(value))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                                    std::to_string(start) + "; last saved checkpoint kept");
            const auto grads = tape.backward(loss);
            std::vector<Tensor4f> g;
            g.reserve(vars.all.size());
            for (const Var v : vars.all) g.push_back(grads[v]);
            opt.step(state.params.named(), g);
            total += double(value) * double(count);
        }
        const double mean = total / double(n);
        state.loss_history.push_back(mean);
        if (!cfg.out_dir.empty()) write_loss_csv(cfg.out_dir, state.loss_history);
        if (on_epoch) on_epoch(epoch, mean);
        if (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0 && epoch + 1 < cfg.epochs) snapshot(epoch + 1);
    }
    snapshot(cfg.epochs > state.epoch ? cfg.epochs : state.epoch);
    result.initial_loss = state.loss_history.empty() ? std::nan("") : state.loss_history.front();
    result.checkpoint = std::move(state);
    return result;
}

MetricReport evaluate_zero_filled(const Dataset& data, const SamplingMask& mask) {
    if (data.count() < 1) throw ConfigError("evaluate: empty dataset");
    MetricReport r;
    const auto all = simulate_dataset<double>(data, mask);
    const auto zf = zero_filled(all.input);
    for (Index i = 0; i < data.count(); ++i) r.add(zf.plane(i, 0), all.target.plane(i, 0));
    return r;
}

std::string to_text(const EvalResult& r) {
    std::string out = to_text(r.model, "model") + to_text(r.zero_filled, "zero_filled");
    if (r.psnr_test) {
        out += "wilcoxon.psnr.statistic = " + format_g17(r.psnr_test->statistic) + "\n";
        out += "wilcoxon.psnr.p_value = " + format_g17(r.psnr_test->p_value) + "\n";
        out += "wilcoxon.psnr.n = " + std::to_string(r.psnr_test->n_used) + "\n";
        out += std::string("wilcoxon.psnr.method = ") + (r.psnr_test->exact ? "exact" : "normal") + "\n";
    } else {
        out += "wilcoxon.psnr.unavailable = " + r.psnr_test_note + "\n";
    }
    return out;
}

Json to_json(const EvalResult& r) {
    Json j{{"model", to_json(r.model)}, {"zero_filled", to_json(r.zero_filled)}};
    if (r.psnr_test)
        j["wilcoxon_psnr"] = {{"statistic", r.psnr_test->statistic},
                              {"p_value", r.psnr_test->p_value},
                              {"n", r.psnr_test->n_used},
                              {"method", r.psnr_test->exact ? "exact" : "normal"}};
    else
        j["wilcoxon_psnr"] = {{"unavailable", r.psnr_test_note}};
    return j;
}

Latency benchmark(const ModelParams<float>& params, Index runs, Index warmup, std::uint64_t seed) {
    if (runs < 1) throw ConfigError("benchmark: runs must be >= 1");
    SplitMix64 rng(seed);
    Tensor4f input(1, 2, params.rows, params.cols);
    for (Index i = 0; i < input.size(); ++i) input[i] = float(rng.uniform(-1, 1));
    for (Index i = 0; i < warmup; ++i) (void)dautomap_forward(input, params);
    std::vector<double> ms;
    for (Index i = 0; i < runs; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto out = dautomap_forward(input, params);
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        if (out.size() == 0) throw ContractError("benchmark: empty output");
    }
    const Stat s = aggregate(ms);
    return {s.mean, runs == 1 ? 0.0 : s.std, runs};
}

}  // namespace dautomap
