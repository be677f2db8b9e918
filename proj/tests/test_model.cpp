#include <doctest.h>

#include <set>

#include "dautomap/dft.hpp"
#include "dautomap/model.hpp"
#include "test_util.hpp"

using namespace dautomap;
using testutil::random_tensor;

TEST_CASE("dautomap_param_count") {
    CHECK(dautomap_param_count(128, 128) == 372'033);
    CHECK(dautomap_param_count(256, 256) == 1'159'489);
    CHECK(dautomap_param_count(1, 1) == 108'889);
    for (Index n : {1, 8, 32, 64}) {
        const auto p = ModelParams<float>::random(n, n, 1);
        CHECK(p.parameter_count() == dautomap_param_count(n, n));
    }
    CHECK(ModelParams<float>::random(12, 20, 1).parameter_count() == dautomap_param_count(12, 20));
}

TEST_CASE("automap_param_count") {
    CHECK(automap_param_count(1) == 2 + 1 + 1 + 1 + 108'865);
    CHECK(std::abs(double(automap_param_count(128)) / 806e6 - 1.0) < 0.01);
    CHECK(std::abs(double(automap_param_count(256)) / 1.29e10 - 1.0) < 0.01);
    for (std::int64_t n : {32, 64, 128}) {
        const double ratio = double(automap_param_count(2 * n)) / double(automap_param_count(n));
        CHECK(ratio > 15.0);
        CHECK(ratio < 17.0);
    }
}

TEST_CASE("parameter names are unique") {
    const auto p = ModelParams<float>::random(4, 4, 2);
    std::set<std::string> names;
    for (const auto& nt : p.named()) names.insert(nt.name);
    CHECK(names.size() == p.named().size());
}

TEST_CASE("dautomap_forward contracts") {
    SUBCASE("zero k-space with zero biases gives a zero image") {
        const auto p = ModelParams<double>::random(8, 8, 3);
        const auto y = dautomap_forward(Tensor4d(1, 2, 8, 8), p);
        CHECK(y.array().abs().maxCoeff() == 0.0);
    }
    SUBCASE("output shape") {
        const auto p = ModelParams<float>::random(32, 32, 4);
        CHECK(dautomap_forward(Tensor4f(2, 2, 32, 32), p).shape() == Shape{2, 1, 32, 32});
    }
    SUBCASE("grid mismatch") {
        const auto p = ModelParams<float>::random(8, 8, 4);
        CHECK_THROWS_AS(dautomap_forward(Tensor4f(1, 2, 8, 6), p), DimensionError);
    }
    SUBCASE("deterministic") {
        const auto p = ModelParams<float>::random(16, 16, 5);
        const auto x = random_tensor<float>({2, 2, 16, 16}, 6);
        CHECK(dautomap_forward(x, p) == dautomap_forward(x, p));
    }
}

TEST_CASE("linear diagnostic mode reconstructs the image through the network") {
    const Index n = 8, m = 8;
    const auto image = random_tensor({1, 1, n, m}, 7, 0.0, 1.0);
    ComplexGrid<double> x(n, m);
    x.re = image.plane(0, 0);
    const auto kspace = dft2_naive(x).to_tensor();
    const auto params = ModelParams<double>::inverse_fourier(n, m);
    ModelOptions options;
    options.linear_diagnostic = true;
    const auto y = dautomap_forward(kspace, params, options);
    CHECK(max_abs_diff(y, image) < 1e-6);
    // nonnegative image: the ReLUs are inactive on the real plane too
    CHECK(max_abs_diff(dautomap_forward(kspace, params), image) < 1e-6);
}

TEST_CASE("full network gradients match finite differences") {
    auto params = ModelParams<double>::random(8, 8, 8);
    for (auto& nt : params.named())
        if (nt.name.find("bias") != std::string::npos)
            *nt.tensor = random_tensor(nt.tensor->shape(), 9 + nt.name.size(), -0.1, 0.1);
    std::vector<Tensor4d> leaves{random_tensor({2, 2, 8, 8}, 10)};
    for (const auto& nt : params.named()) leaves.push_back(*nt.tensor);
    const auto target = random_tensor({2, 1, 8, 8}, 11, 0.0, 1.0);
    const auto r = testutil::check_gradients(
        [&](GradTape<double>& t, const std::vector<Var>& v) {
            ModelVars vars;
            vars.block1 = {v[1], v[2], v[3], v[4]};
            vars.block2 = {v[5], v[6], v[7], v[8]};
            vars.conv1_kernel = v[9];
            vars.conv1_bias = v[10];
            vars.conv2_kernel = v[11];
            vars.conv2_bias = v[12];
            vars.conv3_kernel = v[13];
            vars.conv3_bias = v[14];
            const auto out = dautomap_forward(t, v[0], vars);
            return t.add(t.mse(out.output, t.leaf(target)), t.scale(t.mean_abs(out.hidden), 1e-4));
        },
        leaves, 8, 12);
    INFO("checked " << r.checked << ", skipped " << r.skipped_kinks);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked >= 100);
}

TEST_CASE("automap_tiny baseline") {
    SUBCASE("zero params, zero input") {
        const auto p = AutomapTinyParams<double>::zeros(4);
        CHECK(automap_tiny_forward(Tensor4d(1, 2, 4, 4), p).array().abs().maxCoeff() == 0.0);
    }
    SUBCASE("shape contract and guard") {
        const auto p = AutomapTinyParams<float>::random(6, 1);
        CHECK(automap_tiny_forward(random_tensor<float>({3, 2, 6, 6}, 2), p).shape() == Shape{3, 1, 6, 6});
        CHECK_THROWS_AS(AutomapTinyParams<float>::zeros(33), ResourceError);
    }
    SUBCASE("gradients") {
        auto p = AutomapTinyParams<double>::random(4, 3);
        std::vector<Tensor4d> leaves{random_tensor({2, 2, 4, 4}, 4)};
        for (const auto& nt : p.named()) leaves.push_back(*nt.tensor);
        const auto target = random_tensor({2, 1, 4, 4}, 5);
        const auto r = testutil::check_gradients(
            [&](GradTape<double>& t, const std::vector<Var>& v) {
                const std::vector<Var> params(v.begin() + 1, v.end());
                return t.mse(automap_tiny_forward(t, v[0], params).output, t.leaf(target));
            },
            leaves, 8, 6);
        CHECK(r.max_rel_error < 1e-4);
    }
}
