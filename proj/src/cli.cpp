#include "dautomap/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>

#include "dautomap/parallel.hpp"
#include "dautomap/selfcheck.hpp"
#include "dautomap/trainer.hpp"

namespace dautomap::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kExactnessTolerance = 1e-8;

std::string grouped(std::int64_t v) {
    std::string digits = std::to_string(v), out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

std::string sci(double v, int digits = 3) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*e", digits, v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Binary P5, 8-bit; pixel = round(255 * clamp(v / scale, 0, 1)).
void write_pgm(const fs::path& path, const Image& img, double scale) {
    const std::string header = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
    Bytes bytes(header.begin(), header.end());
    for (Index i = 0; i < img.rows(); ++i)
        for (Index j = 0; j < img.cols(); ++j) {
            const double v = scale > 0 ? std::clamp(img(i, j) / scale, 0.0, 1.0) : 0.0;
            bytes.push_back(static_cast<std::uint8_t>(std::lround(255.0 * v)));
        }
    write_file(path, bytes);
}

struct GridFlags {
    Index size = 0;
    Index rows = 0;
    Index cols = 0;

    void add(CLI::App* cmd, Index default_size) {
        size = default_size;
        cmd->add_option("--size", size, "Square grid side")->capture_default_str()->check(CLI::PositiveNumber);
        cmd->add_option("--rows", rows, "Grid rows (overrides --size)")->check(CLI::PositiveNumber);
        cmd->add_option("--cols", cols, "Grid columns (overrides --size)")->check(CLI::PositiveNumber);
    }
    Index r() const { return rows > 0 ? rows : size; }
    Index c() const { return cols > 0 ? cols : size; }
};

struct Options {
    int threads = 0;

    struct {
        Index count = 200;
        GridFlags grid;
        std::uint64_t seed = 0;
        fs::path out;
    } gen;

    struct {
        std::string pattern = "cartesian";
        float af = 2.0f;
        GridFlags grid;
        std::uint64_t seed = 0;
        fs::path out;
    } mask;

    struct {
        fs::path data, mask, out;
        std::optional<fs::path> resume;
        Index epochs = 1000;
        Index batch_size = 16;
        std::string optimizer = "adam";
        std::optional<double> lr;
        double l1 = 1e-4;
        std::uint64_t seed = 0;
        std::string precision = "f32";
        Index eval_every = 0;
        double kspace_scale = 1.0;
        double max_grad_norm = 0;
        bool per_sample_masks = false;
    } train;

    struct {
        fs::path checkpoint, data, mask;
        std::optional<fs::path> out;
        std::string format = "text";
        Index batch_size = 16;
    } eval;

    struct {
        fs::path checkpoint, data, mask, out;
        Index index = 0;
    } recon;

    struct {
        std::vector<Index> sizes{128, 256};
    } params;

    struct {
        Index max_size = 64;
        std::uint64_t seed = 1;
    } dft;

    struct {
        std::optional<fs::path> checkpoint;
        std::vector<Index> sizes{128, 256};
        Index runs = 100;
        Index warmup = 10;
        std::uint64_t seed = 0;
    } bench;
};

void print_config(std::ostream& out, const CLI::App& app, const CLI::App& sub) {
    out << "# resolved configuration\n";
    out << "subcommand=\"" << sub.get_name() << "\"\n";
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->get_name() == "--help") continue;
        out << opt->get_lnames().front() << "=" << (opt->count() ? opt->as<std::string>() : opt->get_default_str()) << "\n";
    }
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_name() == "--help") continue;
        std::string value = opt->count() ? opt->as<std::string>() : opt->get_default_str();
        if (opt->get_expected_max() > 1 && opt->count()) {
            value.clear();
            for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
        }
        out << opt->get_lnames().front() << "=" << value << "\n";
    }
    out << "workers=" << num_threads() << "\n# end configuration\n";
}

Dataset load_data(const fs::path& p) { return read_dataset(p); }

int cmd_gen_data(const Options& o, std::ostream& out) {
    const auto& g = o.gen;
    const Dataset d = gen_phantoms(g.count, g.grid.r(), g.grid.c(), g.seed);
    write_dataset(g.out, d);
    out << "wrote " << d.count() << " phantoms of " << d.rows() << "x" << d.cols() << " to " << g.out.string() << "\n";
    return kExitOk;
}

int cmd_make_mask(const Options& o, std::ostream& out) {
    const auto& m = o.mask;
    const auto mask = make_mask(parse_pattern(m.pattern), m.grid.r(), m.grid.c(), m.af, m.seed);
    write_mask(m.out, mask);
    out << "wrote " << pattern_name(mask.pattern) << " mask " << mask.rows() << "x" << mask.cols()
        << " af=" << m.af << " fraction=" << fixed(mask.achieved_fraction, 6) << " (target "
        << fixed(1.0 / m.af, 6) << ")";
    if (mask.pattern != Pattern::cartesian) out << " radius=" << fixed(mask.radius, 4);
    out << " to " << m.out.string() << "\n";
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    const auto& t = o.train;
    TrainConfig c;
    c.epochs = t.epochs;
    c.batch_size = t.batch_size;
    c.optimizer = OptimizerConfig::defaults(parse_optimizer(t.optimizer));
    if (t.lr) c.optimizer.lr = *t.lr;
    c.optimizer.max_grad_norm = t.max_grad_norm;
    c.l1_weight = t.l1;
    c.seed = t.seed;
    c.precision = t.precision;
    c.eval_every = t.eval_every;
    c.kspace_scale = t.kspace_scale;
    c.per_sample_masks = t.per_sample_masks;
    c.out_dir = t.out;

    std::optional<Checkpoint> resume;
    if (t.resume) {
        resume = load_checkpoint(*t.resume);
        const Index epochs = c.epochs, every = c.eval_every;
        c = resume->config;
        c.epochs = epochs;
        c.eval_every = every;
        c.out_dir = t.out;
        out << "resuming from " << t.resume->string() << " at epoch " << resume->epoch
            << "; training settings come from the checkpoint\n";
    }
    c.validate();
    out << "train config: " << c.to_json().dump() << "\n";

    const Dataset data = load_data(t.data);
    const SamplingMask mask = read_mask(t.mask);
    const auto report = [&](Index epoch, double loss) {
        out << "epoch " << epoch + 1 << "/" << c.epochs << " loss " << sci(loss, 6) << "\n";
        out.flush();
    };
    const auto r = train(c, data, mask, resume ? &*resume : nullptr, report);
    out << "checkpoint " << t.out.string() << " epoch " << r.checkpoint.epoch << " hash "
        << hex64(checkpoint_hash(t.out)) << "\n";
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const auto& e = o.eval;
    const Checkpoint ckpt = load_checkpoint(e.checkpoint);
    const EvalResult r =
        evaluate(ckpt.params, load_data(e.data), read_mask(e.mask), ckpt.config.kspace_scale, e.batch_size);
    const std::string text = to_text(r);
    const std::string json = to_json(r).dump(2) + "\n";
    out << (e.format == "json" ? json : text);
    if (e.out) {
        write_file(*e.out / "report.txt", Bytes(text.begin(), text.end()));
        write_file(*e.out / "report.json", Bytes(json.begin(), json.end()));
        out << "wrote report.txt and report.json to " << e.out->string() << "\n";
    }
    return kExitOk;
}

int cmd_reconstruct(const Options& o, std::ostream& out) {
    const auto& rc = o.recon;
    const Checkpoint ckpt = load_checkpoint(rc.checkpoint);
    const Dataset data = load_data(rc.data);
    if (rc.index < 0 || rc.index >= data.count())
        throw ConfigError("--index " + std::to_string(rc.index) + " is outside [0, " + std::to_string(data.count()) +
                          ")");
    const SamplingMask mask = read_mask(rc.mask);
    const double scale = ckpt.config.kspace_scale;
    const auto s = simulate_sample<float>(data.image(rc.index).cast<double>(), mask, scale);
    const Image pred = dautomap_forward(s.input, ckpt.params).plane(0, 0).cast<double>();
    const Image zf = zero_filled(s.input, scale).plane(0, 0).cast<double>();
    const Image ref = s.target.plane(0, 0).cast<double>();
    const Image err = (pred - ref).cwiseAbs();
    const Image zf_err = (zf - ref).cwiseAbs();

    const double peak = ref.maxCoeff();
    const double err_max = err.maxCoeff(), zf_err_max = zf_err.maxCoeff();
    write_pgm(rc.out / "reconstruction.pgm", pred, peak);
    write_pgm(rc.out / "target.pgm", ref, peak);
    write_pgm(rc.out / "zero_filled.pgm", zf, peak);
    write_pgm(rc.out / "error.pgm", err, err_max);
    write_pgm(rc.out / "zero_filled_error.pgm", zf_err, zf_err_max);
    out << "image " << rc.index << ": psnr " << fixed(psnr(pred, ref), 4) << " dB (zero-filled "
        << fixed(psnr(zf, ref), 4) << " dB)\n";
    out << "intensity scale: 255 = " << sci(peak, 6) << "\n";
    out << "error map scale: 255 = " << sci(err_max, 6) << "\n";
    out << "zero-filled error map scale: 255 = " << sci(zf_err_max, 6) << "\n";
    out << "wrote reconstruction.pgm, target.pgm, zero_filled.pgm, error.pgm, zero_filled_error.pgm to "
        << rc.out.string() << "\n";
    return kExitOk;
}

int cmd_params(const Options& o, std::ostream& out) {
    char line[256];
    std::snprintf(line, sizeof line, "%6s  %14s %10s  %18s %10s  %14s %18s\n", "size", "dautomap", "(1e6)",
                  "automap", "(sci)", "dautomap_xform", "automap_xform");
    out << line;
    for (const Index n : o.params.sizes) {
        const auto d = dautomap_param_count(n, n);
        const auto a = automap_param_count(n);
        std::snprintf(line, sizeof line, "%6lld  %14s %10s  %18s %10s  %14s %18s\n", static_cast<long long>(n),
                      grouped(d).c_str(), fixed(double(d) / 1e6, 2).c_str(), grouped(a).c_str(),
                      sci(double(a), 2).c_str(), grouped(dautomap_transform_param_count(n, n)).c_str(),
                      grouped(automap_transform_param_count(n)).c_str());
        out << line;
    }
    return kExitOk;
}

int cmd_dft_check(const Options& o, std::ostream& out) {
    if (o.dft.max_size < 2) throw ConfigError("--max-size must be >= 2");
    double worst = 0;
    for (const auto& r : exactness_suite(o.dft.max_size, o.dft.seed)) {
        worst = std::max({worst, r.forward, r.inverse, std::max(r.kron, 0.0)});
        out << r.rows << "x" << r.cols << ": forward " << sci(r.forward) << " inverse " << sci(r.inverse);
        if (r.kron >= 0) out << " kron(^T) " << sci(r.kron) << " kron(^H) gap " << sci(r.kron_adjoint_gap);
        out << "\n";
    }
    if (worst < kExactnessTolerance) {
        out << "max abs error < 1e-8 (" << sci(worst) << ")\n";
        return kExitOk;
    }
    out << "max abs error " << sci(worst) << " exceeds 1e-8\n";
    return kExitFailure;
}

void print_latency(std::ostream& out, Index n, const Latency& l) {
    out << n << "x" << n << ": " << fixed(l.mean_ms, 4) << " +- " << fixed(l.std_ms, 4) << " ms over " << l.runs
        << " runs\n";
}

int cmd_bench(const Options& o, std::ostream& out) {
    const auto& b = o.bench;
    if (b.checkpoint) {
        const auto ckpt = load_checkpoint(*b.checkpoint);
        print_latency(out, ckpt.params.rows, benchmark(ckpt.params, b.runs, b.warmup, b.seed));
        return kExitOk;
    }
    for (const Index n : b.sizes)
        print_latency(out, n, benchmark(ModelParams<float>::random(n, n, b.seed), b.runs, b.warmup, b.seed));
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"dautomap: decomposed-transform MRI reconstruction", "dautomap"};
    app.require_subcommand(1);
    app.add_option("--threads", o.threads, "Worker threads (default: $DAUTOMAP_NUM_THREADS or 1)")
        ->check(CLI::NonNegativeNumber);

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
    gen->add_option("--count", o.gen.count, "Number of phantoms")->capture_default_str()->check(CLI::PositiveNumber);
    o.gen.grid.add(gen, 32);
    gen->add_option("--seed", o.gen.seed)->capture_default_str();
    gen->add_option("--out", o.gen.out, "Dataset file")->required();

    auto* mask = app.add_subcommand("make-mask", "Generate an undersampling mask");
    mask->add_option("--pattern", o.mask.pattern)
        ->capture_default_str()
        ->check(CLI::IsMember({"cartesian", "poisson", "vdp"}));
    mask->add_option("--af", o.mask.af, "Acceleration factor")->capture_default_str();
    o.mask.grid.add(mask, 32);
    mask->add_option("--seed", o.mask.seed)->capture_default_str();
    mask->add_option("--out", o.mask.out, "Mask file")->required();

    auto* tr = app.add_subcommand("train", "Train the network");
    tr->add_option("--data", o.train.data, "Training dataset")->required();
    tr->add_option("--mask", o.train.mask, "Sampling mask")->required();
    tr->add_option("--out", o.train.out, "Checkpoint directory")->required();
    tr->add_option("--resume", o.train.resume, "Continue from this checkpoint directory");
    tr->add_option("--epochs", o.train.epochs)->capture_default_str();
    tr->add_option("--batch-size", o.train.batch_size)->capture_default_str();
    tr->add_option("--optimizer", o.train.optimizer)->capture_default_str()->check(CLI::IsMember({"adam", "rmsprop"}));
    tr->add_option("--lr", o.train.lr, "Learning rate (default: 1e-3 adam, 2e-5 rmsprop)");
    tr->add_option("--l1", o.train.l1, "Weight of the hidden-activation L1 term")->capture_default_str();
    tr->add_option("--seed", o.train.seed)->capture_default_str();
    tr->add_option("--precision", o.train.precision)->capture_default_str()->check(CLI::IsMember({"f32"}));
    tr->add_option("--eval-every", o.train.eval_every, "Checkpoint period in epochs (0: end only)")
        ->capture_default_str();
    tr->add_option("--kspace-scale", o.train.kspace_scale)->capture_default_str();
    tr->add_option("--max-grad-norm", o.train.max_grad_norm, "Global gradient clip (0: off)")->capture_default_str();
    tr->add_flag("--per-sample-masks", o.train.per_sample_masks, "Draw a fresh mask per sample");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint against the zero-filled baseline");
    ev->add_option("--checkpoint", o.eval.checkpoint)->required();
    ev->add_option("--data", o.eval.data)->required();
    ev->add_option("--mask", o.eval.mask)->required();
    ev->add_option("--out", o.eval.out, "Directory for report.txt and report.json");
    ev->add_option("--format", o.eval.format)->capture_default_str()->check(CLI::IsMember({"text", "json"}));
    ev->add_option("--batch-size", o.eval.batch_size)->capture_default_str()->check(CLI::PositiveNumber);

    auto* rc = app.add_subcommand("reconstruct", "Write reconstruction and error-map images");
    rc->add_option("--checkpoint", o.recon.checkpoint)->required();
    rc->add_option("--data", o.recon.data)->required();
    rc->add_option("--mask", o.recon.mask)->required();
    rc->add_option("--index", o.recon.index)->capture_default_str();
    rc->add_option("--out", o.recon.out, "Image directory")->required();

    auto* pc = app.add_subcommand("params", "Parameter counts");
    pc->add_option("--size", o.params.sizes, "Grid side (repeatable)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    auto* dc = app.add_subcommand("dft-check", "Fourier-initialised layers against the brute-force DFT");
    dc->add_option("--max-size", o.dft.max_size)->capture_default_str();
    dc->add_option("--seed", o.dft.seed)->capture_default_str();

    auto* bn = app.add_subcommand("bench", "Inference latency");
    bn->add_option("--checkpoint", o.bench.checkpoint);
    bn->add_option("--size", o.bench.sizes, "Grid side for random weights (repeatable)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    bn->add_option("--runs", o.bench.runs)->capture_default_str()->check(CLI::PositiveNumber);
    bn->add_option("--warmup", o.bench.warmup)->capture_default_str()->check(CLI::NonNegativeNumber);
    bn->add_option("--seed", o.bench.seed)->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (o.threads > 0) set_num_threads(o.threads);
        print_config(out, app, *app.get_subcommands().front());
        if (gen->parsed()) return cmd_gen_data(o, out);
        if (mask->parsed()) return cmd_make_mask(o, out);
        if (tr->parsed()) return cmd_train(o, out);
        if (ev->parsed()) return cmd_eval(o, out);
        if (rc->parsed()) return cmd_reconstruct(o, out);
        if (pc->parsed()) return cmd_params(o, out);
        if (dc->parsed()) return cmd_dft_check(o, out);
        return cmd_bench(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace dautomap::cli
