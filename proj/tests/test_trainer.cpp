#include <doctest.h>

#include <filesystem>

#include "dautomap/trainer.hpp"

using namespace dautomap;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    Dataset data = gen_phantoms(6, 8, 8, 1);
    SamplingMask mask = cartesian_mask(8, 8, 2.0f, 2);
};

TrainConfig small_config(Index epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 4;
    c.seed = 3;
    return c;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dautomap_test_trainer_" + name);
    fs::remove_all(p);
    return p;
}

bool same_params(const ModelParams<float>& a, const ModelParams<float>& b) {
    const auto x = a.named(), y = b.named();
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i].name != y[i].name || !(*x[i].tensor == *y[i].tensor)) return false;
    return true;
}

}  // namespace

TEST_CASE("TrainConfig validation and JSON round trip") {
    TrainConfig c = small_config(5);
    c.optimizer = OptimizerConfig::defaults(OptimizerKind::rmsprop);
    c.kspace_scale = 0.25;
    c.out_dir = "ignored";
    const auto back = TrainConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.out_dir.empty());
    CHECK_FALSE(c.to_json().contains("out_dir"));

    auto bad = c;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.loss = "l1";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.precision = "f64";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64({}) == 0xcbf29ce484222325ull);
    CHECK(fnv1a64({'a'}) == 0xaf63dc4c8601ec8cull);
    CHECK(hex64(fnv1a64({'f', 'o', 'o', 'b', 'a', 'r'})) == "85944171f73967e8");
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    Fixture f;
    auto c = small_config(1);
    c.optimizer.lr = 0;
    const auto r = train(c, f.data, f.mask);
    CHECK(r.checkpoint.loss_history.size() == 1);
    CHECK(r.checkpoint.epoch == 1);
    CHECK(same_params(r.checkpoint.params, ModelParams<float>::random(8, 8, c.seed)));
    CHECK(std::isfinite(r.initial_loss));
}

TEST_CASE("training lowers the loss on a tiny problem") {
    Fixture f;
    const auto r = train(small_config(15), f.data, f.mask);
    const auto& h = r.checkpoint.loss_history;
    REQUIRE(h.size() == 15);
    CHECK(h.back() < h.front());
}

TEST_CASE("training is deterministic") {
    Fixture f;
    auto c = small_config(3);
    c.out_dir = scratch("det_a");
    const auto a = train(c, f.data, f.mask);
    const fs::path first = c.out_dir;
    c.out_dir = scratch("det_b");
    const auto b = train(c, f.data, f.mask);
    CHECK(a.checkpoint.loss_history == b.checkpoint.loss_history);
    CHECK(checkpoint_hash(first) == checkpoint_hash(c.out_dir));
    CHECK(fs::exists(c.out_dir / kLossFile));
    fs::remove_all(first);
    fs::remove_all(c.out_dir);
}

TEST_CASE("resume is bitwise equal to an uninterrupted run") {
    Fixture f;
    for (auto kind : {OptimizerKind::adam, OptimizerKind::rmsprop}) {
        auto c = small_config(4);
        c.optimizer = OptimizerConfig::defaults(kind);
        c.optimizer.lr = 1e-3;
        c.out_dir = scratch("straight");
        const auto straight = train(c, f.data, f.mask);

        auto part = c;
        part.epochs = 2;
        part.out_dir = scratch("part");
        train(part, f.data, f.mask);
        const auto ckpt = load_checkpoint(part.out_dir);
        CHECK(ckpt.epoch == 2);
        auto rest = c;
        rest.out_dir = part.out_dir;
        const auto resumed = train(rest, f.data, f.mask, &ckpt);

        CHECK(resumed.checkpoint.loss_history == straight.checkpoint.loss_history);
        CHECK(same_params(resumed.checkpoint.params, straight.checkpoint.params));
        CHECK(resumed.checkpoint.optimizer_steps == straight.checkpoint.optimizer_steps);
        CHECK(checkpoint_hash(part.out_dir) == checkpoint_hash(c.out_dir));
        fs::remove_all(c.out_dir);
        fs::remove_all(part.out_dir);
    }
}

TEST_CASE("checkpoint round trip and corruption") {
    Fixture f;
    auto c = small_config(2);
    c.eval_every = 1;
    c.out_dir = scratch("ckpt");
    const auto r = train(c, f.data, f.mask);
    const auto back = load_checkpoint(c.out_dir);
    CHECK(same_params(back.params, r.checkpoint.params));
    CHECK(back.loss_history == r.checkpoint.loss_history);
    CHECK(back.rng_state == r.checkpoint.rng_state);
    CHECK(back.config.to_json() == r.checkpoint.config.to_json());
    REQUIRE(back.optimizer_state.size() == r.checkpoint.optimizer_state.size());
    for (std::size_t i = 0; i < back.optimizer_state.size(); ++i) {
        CHECK(back.optimizer_state[i].first == r.checkpoint.optimizer_state[i].first);
        CHECK(back.optimizer_state[i].second == r.checkpoint.optimizer_state[i].second);
    }

    const fs::path copy = scratch("ckpt_copy");
    save_checkpoint(copy, back);
    CHECK(checkpoint_hash(copy) == checkpoint_hash(c.out_dir));

    Bytes blob = read_file(copy / kBlobFile);
    blob[7] ^= 0x40;
    write_file(copy / kBlobFile, blob);
    CHECK_THROWS_AS(load_checkpoint(copy), FormatError);
    blob.pop_back();
    write_file(copy / kBlobFile, blob);
    CHECK_THROWS_AS(load_checkpoint(copy), FormatError);
    CHECK_THROWS_AS(load_checkpoint(scratch("missing")), Error);
    fs::remove_all(copy);
    fs::remove_all(c.out_dir);
}

TEST_CASE("non-finite loss aborts and keeps the last checkpoint") {
    Fixture f;
    auto c = small_config(1);
    c.out_dir = scratch("nan");
    train(c, f.data, f.mask);
    const auto before = checkpoint_hash(c.out_dir);
    const auto ckpt = load_checkpoint(c.out_dir);
    auto blow = small_config(3);
    blow.out_dir = c.out_dir;
    blow.kspace_scale = 1e30;
    CHECK_THROWS_AS(train(blow, f.data, f.mask, &ckpt), TrainingError);
    CHECK(checkpoint_hash(c.out_dir) == before);
    fs::remove_all(c.out_dir);
}

TEST_CASE("per-sample masks are seeded and distinct") {
    const auto base = poisson_mask(16, 16, 3.0f, 9);
    const auto a = per_sample_masks(base, 3), b = per_sample_masks(base, 3);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].grid == b[i].grid);
    CHECK_FALSE(a[0].grid == a[1].grid);
    Fixture f;
    auto c = small_config(1);
    c.per_sample_masks = true;
    CHECK(std::isfinite(train(c, f.data, f.mask).initial_loss));
}

TEST_CASE("evaluation") {
    Fixture f{gen_phantoms(6, 16, 16, 1), cartesian_mask(16, 16, 2.0f, 2)};
    SUBCASE("zero-filled baseline matches the model path's baseline") {
        const auto p = ModelParams<float>::random(16, 16, 1);
        const auto r = evaluate(p, f.data, f.mask);
        const auto zf = evaluate_zero_filled(f.data, f.mask);
        REQUIRE(zf.count() == 6);
        for (Index i = 0; i < 6; ++i) CHECK(r.zero_filled.psnr[std::size_t(i)] == doctest::Approx(zf.psnr[std::size_t(i)]).epsilon(1e-4));
        CHECK(r.psnr_test.has_value());
        const auto text = to_text(r);
        CHECK(text.find("model.psnr.mean = ") != std::string::npos);
        CHECK(text.find("wilcoxon.psnr.p_value = ") != std::string::npos);
        CHECK(to_json(r)["wilcoxon_psnr"].contains("p_value"));
    }
    SUBCASE("exact inverse weights with a full mask") {
        const auto r = evaluate(ModelParams<double>::inverse_fourier(16, 16), f.data, full_mask(16, 16));
        for (const double v : r.model.psnr) CHECK(v > 100.0);
        for (const double v : r.model.ssim) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("too few images for the test") {
        const auto small = gen_phantoms(3, 16, 16, 2);
        const auto r = evaluate(ModelParams<float>::random(16, 16, 1), small, f.mask);
        CHECK_FALSE(r.psnr_test.has_value());
        CHECK_FALSE(r.psnr_test_note.empty());
        CHECK(to_text(r).find("wilcoxon.psnr.unavailable") != std::string::npos);
    }
}

TEST_CASE("benchmark") {
    const auto p = ModelParams<float>::random(16, 16, 1);
    const auto one = benchmark(p, 1, 1);
    CHECK(one.runs == 1);
    CHECK(one.std_ms == 0.0);
    CHECK(one.mean_ms > 0.0);
    const auto small = benchmark(p, 5, 2);
    const auto big = benchmark(ModelParams<float>::random(32, 32, 1), 5, 2);
    CHECK(big.mean_ms < 16.0 * small.mean_ms);
    CHECK_THROWS_AS(benchmark(p, 0), ConfigError);
}
