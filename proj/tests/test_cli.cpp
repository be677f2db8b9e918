#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "dautomap/binary_io.hpp"
#include "dautomap/cli.hpp"

namespace fs = std::filesystem;
using dautomap::cli::run;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result call(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

bool contains(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dautomap_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::set<std::string> listing(const fs::path& root) {
    std::set<std::string> names;
    for (const auto& e : fs::recursive_directory_iterator(root)) names.insert(fs::relative(e.path(), root).string());
    return names;
}

}  // namespace

TEST_CASE("params prints the parameter table") {
    const auto r = call({"params", "--size", "128", "--size", "256"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "372,033"));
    CHECK(contains(r.out, "1,159,489"));
    CHECK(contains(r.out, "1.29e+10"));
    CHECK(contains(r.out, "# resolved configuration"));
    CHECK(r.out.find("# resolved configuration") < r.out.find("372,033"));
}

TEST_CASE("dft-check") {
    const auto r = call({"dft-check", "--max-size", "32"});
    CHECK(r.code == 0);
    CHECK(contains(r.out, "max abs error < 1e-8"));
    CHECK(contains(r.out, "kron(^T)"));
    CHECK(call({"dft-check", "--max-size", "1"}).code == 1);
}

TEST_CASE("usage errors exit 2, runtime errors exit 1") {
    CHECK(call({}).code == 2);
    CHECK(call({"frobnicate"}).code == 2);
    const auto flag = call({"params", "--nope", "3"});
    CHECK(flag.code == 2);
    CHECK(contains(flag.err, "Usage"));
    CHECK(call({"make-mask", "--size", "8"}).code == 2);  // --out missing
    CHECK(call({"make-mask", "--pattern", "spiral", "--out", "x"}).code == 2);
    CHECK(call({"--help"}).code == 0);

    const auto dir = scratch("errors");
    const auto missing = call({"eval", "--checkpoint", (dir / "none").string(), "--data", (dir / "d").string(),
                               "--mask", (dir / "m").string()});
    CHECK(missing.code == 1);
    CHECK(contains(missing.err, "error:"));
    CHECK(call({"make-mask", "--af", "0.5", "--size", "8", "--out", (dir / "m.dmsk").string()}).code == 1);
    fs::remove_all(dir);
}

TEST_CASE("make-mask is deterministic") {
    const auto dir = scratch("mask");
    const std::vector<std::string> base{"make-mask", "--pattern", "cartesian", "--af", "2", "--size", "64", "--seed", "7",
                                        "--out"};
    auto a = base, b = base;
    a.push_back((dir / "a.dmsk").string());
    b.push_back((dir / "b.dmsk").string());
    REQUIRE(call(a).code == 0);
    REQUIRE(call(b).code == 0);
    CHECK(dautomap::read_file(dir / "a.dmsk") == dautomap::read_file(dir / "b.dmsk"));
    fs::remove_all(dir);
}

TEST_CASE("pipeline: outputs stay under --out, resume matches a straight run, runs are idempotent") {
    const auto dir = scratch("pipeline");
    const auto p = [&](const char* rel) { return (dir / rel).string(); };
    REQUIRE(call({"gen-data", "--count", "12", "--size", "16", "--seed", "1", "--out", p("data/train.dset")}).code == 0);
    REQUIRE(call({"gen-data", "--count", "8", "--size", "16", "--seed", "2", "--out", p("data/test.dset")}).code == 0);
    REQUIRE(call({"make-mask", "--pattern", "poisson", "--af", "3", "--size", "16", "--out", p("data/m.dmsk")}).code ==
            0);
    CHECK(listing(dir) == std::set<std::string>{"data", "data/train.dset", "data/test.dset", "data/m.dmsk"});

    const std::vector<std::string> train{"train", "--data", p("data/train.dset"), "--mask", p("data/m.dmsk"),
                                         "--batch-size", "4", "--seed", "5"};
    auto straight = train, part = train, rest = train, again = train;
    straight.insert(straight.end(), {"--epochs", "3", "--out", p("straight")});
    again.insert(again.end(), {"--epochs", "3", "--out", p("again")});
    part.insert(part.end(), {"--epochs", "1", "--out", p("resumed")});
    rest.insert(rest.end(), {"--epochs", "3", "--resume", p("resumed"), "--out", p("resumed")});
    REQUIRE(call(straight).code == 0);
    REQUIRE(call(again).code == 0);
    REQUIRE(call(part).code == 0);
    const auto resumed = call(rest);
    REQUIRE(resumed.code == 0);
    CHECK(contains(resumed.out, "epoch 3/3"));
    for (const char* f : {"manifest.json", "tensors.f32", "loss.csv"}) {
        CHECK(dautomap::read_file(dir / "straight" / f) == dautomap::read_file(dir / "again" / f));
        CHECK(dautomap::read_file(dir / "straight" / f) == dautomap::read_file(dir / "resumed" / f));
    }

    const std::vector<std::string> eval{"eval", "--checkpoint", p("straight"), "--data", p("data/test.dset"), "--mask",
                                        p("data/m.dmsk"), "--out"};
    auto e1 = eval, e2 = eval;
    e1.push_back(p("eval1"));
    e2.push_back(p("eval2"));
    const auto r1 = call(e1);
    REQUIRE(r1.code == 0);
    CHECK(contains(r1.out, "zero_filled.psnr.mean"));
    CHECK(contains(r1.out, "wilcoxon.psnr.p_value"));
    REQUIRE(call(e2).code == 0);
    CHECK(dautomap::read_file(dir / "eval1/report.json") == dautomap::read_file(dir / "eval2/report.json"));
    CHECK(dautomap::read_file(dir / "eval1/report.txt") == dautomap::read_file(dir / "eval2/report.txt"));

    const auto json = call({"eval", "--checkpoint", p("straight"), "--data", p("data/test.dset"), "--mask",
                            p("data/m.dmsk"), "--format", "json"});
    CHECK(json.code == 0);
    CHECK(contains(json.out, "\"wilcoxon_psnr\""));

    const auto rc = call({"reconstruct", "--checkpoint", p("straight"), "--data", p("data/test.dset"), "--mask",
                          p("data/m.dmsk"), "--index", "2", "--out", p("images")});
    REQUIRE(rc.code == 0);
    CHECK(contains(rc.out, "error map scale: 255 = "));
    const auto pgm = dautomap::read_file(dir / "images/error.pgm");
    const std::string header = "P5\n16 16\n255\n";
    REQUIRE(pgm.size() == header.size() + 256);
    CHECK(std::string(pgm.begin(), pgm.begin() + std::ptrdiff_t(header.size())) == header);
    CHECK(*std::max_element(pgm.begin() + std::ptrdiff_t(header.size()), pgm.end()) == 255);
    CHECK(call({"reconstruct", "--checkpoint", p("straight"), "--data", p("data/test.dset"), "--mask",
                p("data/m.dmsk"), "--index", "8", "--out", p("images")})
              .code == 1);

    const auto bench = call({"bench", "--checkpoint", p("straight"), "--runs", "2", "--warmup", "1"});
    CHECK(bench.code == 0);
    CHECK(contains(bench.out, "16x16: "));

    std::set<std::string> top;
    for (const auto& e : fs::directory_iterator(dir)) top.insert(e.path().filename().string());
    CHECK(top == std::set<std::string>{"data", "straight", "again", "resumed", "eval1", "eval2", "images"});
    fs::remove_all(dir);
}
