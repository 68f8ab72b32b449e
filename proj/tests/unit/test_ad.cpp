// Copyright 2026 The capsyolo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ad/ops.hpp"
#include "common/errors.hpp"
#include "support/gradcheck.hpp"

using namespace capsyolo;
using ad::Tensor;
using testing::gradcheck;

TEST_CASE("tensor rejects inconsistent shapes")
{
    CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
    CHECK_THROWS_AS(Tensor({0, 3}, {}), DimensionError);
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.at({1, 2}) == 6.0);
}

TEST_CASE("conv2d")
{
    Rng rng(11);
    SUBCASE("identity 1x1 kernel")
    {
        Tensor x = testing::random_tensor(rng, {1, 4, 5});
        Tensor k({1, 1, 1, 1}, {1.0});
        Tensor y = ad::conv2d(x, k, 1, 0);
        REQUIRE(y.shape() == x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
    }
    SUBCASE("all-ones 2x2 window sums to 4")
    {
        Tensor y = ad::conv2d(Tensor::full({1, 2, 2}, 1.0), Tensor::full({1, 1, 2, 2}, 1.0), 1, 0);
        REQUIRE(y.shape() == ad::Shape{1, 1, 1});
        CHECK(y.item() == 4.0);
    }
    SUBCASE("zero input gives zero output")
    {
        Tensor y = ad::conv2d(Tensor::zeros({3, 6, 6}), testing::random_tensor(rng, {4, 3, 3, 3}), 2, 1);
        for (double v : y.data()) CHECK(v == 0.0);
    }
    SUBCASE("output extent")
    {
        Tensor y = ad::conv2d(Tensor::zeros({2, 7, 9}), Tensor::zeros({3, 2, 3, 2}), 2, 1);
        CHECK(y.shape() == ad::Shape{3, (7 + 2 - 3) / 2 + 1, (9 + 2 - 2) / 2 + 1});
    }
    SUBCASE("cross-correlation, no kernel flip")
    {
        Tensor x({1, 1, 3}, {1, 2, 3});
        Tensor k({1, 1, 1, 2}, {1, 10});
        Tensor y = ad::conv2d(x, k, 1, 0);
        CHECK(y.data()[0] == 21.0);
        CHECK(y.data()[1] == 32.0);
    }
    SUBCASE("channel mismatch")
    {
        CHECK_THROWS_AS(ad::conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 3, 1, 1}), 1, 0), DimensionError);
        CHECK_THROWS_AS(ad::conv2d(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 1, 5, 5}), 1, 1), DimensionError);
    }
}

TEST_CASE("dense")
{
    CHECK(ad::dense(Tensor({2}, {1, 1}), Tensor({2, 2}, {1, 2, 3, 4}), Tensor::zeros({2})).data()[1] == 7.0);
    Tensor y = ad::dense(Tensor({2}, {1, 1}), Tensor({2, 2}, {1, 2, 3, 4}), Tensor::zeros({2}));
    CHECK(y.data()[0] == 3.0);
    Tensor id = ad::dense(Tensor({3}, {4, 5, 6}), Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}), Tensor::zeros({3}));
    CHECK(id.data()[2] == 6.0);
    Tensor b = ad::dense(Tensor({2}, {9, 9}), Tensor::zeros({3, 2}), Tensor({3}, {1, 2, 3}));
    CHECK(b.data()[2] == 3.0);
    CHECK_THROWS_AS(ad::dense(Tensor({3}, {1, 1, 1}), Tensor::zeros({2, 2}), Tensor::zeros({2})), DimensionError);
}

TEST_CASE("softmax")
{
    Tensor a = ad::softmax(Tensor({2}, {0, 0}), 0);
    CHECK(a.data()[0] == doctest::Approx(0.5).epsilon(1e-15));
    Tensor b = ad::softmax(Tensor({2}, {std::log(1.0), std::log(3.0)}), 0);
    CHECK(b.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(b.data()[1] == doctest::Approx(0.75).epsilon(1e-12));

    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.index(12);
        Tensor x = testing::random_tensor(rng, {n}, -30, 30);
        const double c = rng.uniform(-500, 500);
        Tensor y = ad::softmax(x, 0);
        Tensor ys = ad::softmax(ad::add_scalar(x, c), 0);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(y.data()[i] > 0.0);
            CHECK(std::abs(y.data()[i] - ys.data()[i]) < 1e-12);
            total += y.data()[i];
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }

    SUBCASE("non-trailing axis")
    {
        Tensor m = ad::softmax(Tensor({2, 2}, {0, 5, 0, 5}), 0);
        CHECK(m.data()[0] == doctest::Approx(0.5));
        CHECK(m.data()[1] == doctest::Approx(0.5));
    }
    CHECK_THROWS_AS(ad::softmax(Tensor({2}, {1, 2}), 1), DimensionError);
}

TEST_CASE("backward basics")
{
    SUBCASE("sum of squares")
    {
        Tensor x({3}, {1.0, -2.0, 0.5}, true);
        ad::sum(ad::square(x)).backward();
        REQUIRE(x.has_grad());
        CHECK(x.grad()[0] == 2.0);
        CHECK(x.grad()[1] == -4.0);
        CHECK(x.grad()[2] == 1.0);
    }
    SUBCASE("backward from a non-scalar is a contract error")
    {
        Tensor x({3}, {1, 2, 3}, true);
        CHECK_THROWS_AS(ad::square(x).backward(), ContractError);
    }
    SUBCASE("tensors off the graph get no gradient")
    {
        Tensor x({2}, {1, 2}, true);
        Tensor unused({2}, {3, 4}, true);
        ad::sum(x).backward();
        CHECK(x.has_grad());
        CHECK_FALSE(unused.has_grad());
    }
    SUBCASE("second backward through the same graph fails")
    {
        Tensor x({2}, {1, 2}, true);
        Tensor loss = ad::sum(ad::square(x));
        loss.backward();
        CHECK_THROWS_AS(loss.backward(), ContractError);
        x.zero_grad();
        ad::sum(ad::square(x)).backward();
        CHECK(x.grad()[1] == 4.0);
    }
    SUBCASE("gradients accumulate until reset")
    {
        Tensor x({1}, {3.0}, true);
        ad::sum(x).backward();
        ad::sum(x).backward();
        CHECK(x.grad()[0] == 2.0);
        x.zero_grad();
        CHECK_FALSE(x.has_grad());
    }
    SUBCASE("no-grad guard records nothing")
    {
        Tensor x({1}, {3.0}, true);
        ad::NoGradGuard g;
        Tensor y = ad::square(x);
        CHECK_FALSE(y.requires_grad());
    }
    SUBCASE("shared subexpression")
    {
        Tensor x({1}, {3.0}, true);
        Tensor y = ad::mul(x, x);
        ad::sum(ad::add(y, y)).backward();
        CHECK(x.grad()[0] == 12.0);
    }
}

// Every primitive against central differences, 100 random trials each on
// shapes with at most 64 elements.
TEST_CASE("primitive gradients match finite differences")
{
    Rng rng(2024);
    constexpr int kTrials = 100;
    constexpr double kTol = 1e-3;
    auto dim = [&](std::size_t hi) { return 1 + static_cast<std::size_t>(rng.index(hi)); };

    auto check = [&](const char* name, auto make_inputs, auto fn) {
        double worst = 0.0;
        for (int t = 0; t < kTrials; ++t) {
            auto r = gradcheck(fn, make_inputs(), 100 + t);
            worst = std::max(worst, r.max_rel_error);
        }
        INFO(name << " worst relative error " << worst);
        CHECK(worst < kTol);
    };

    check(
        "add/sub/mul",
        [&] {
            ad::Shape s{dim(4), dim(4)};
            return std::vector<Tensor>{testing::random_tensor(rng, s), testing::random_tensor(rng, s)};
        },
        [](const std::vector<Tensor>& in) {
            return ad::mul(ad::add(in[0], in[1]), ad::sub(in[0], ad::scale(in[1], 2.5)));
        });
    check(
        "square/sqrt/add_scalar",
        [&] { return std::vector<Tensor>{testing::random_tensor(rng, {dim(8)}, 0.2, 2.0)}; },
        [](const std::vector<Tensor>& in) { return ad::sqrt(ad::add_scalar(ad::square(in[0]), 0.3)); });
    check(
        "relu",
        [&] { return std::vector<Tensor>{testing::random_away_from_zero(rng, {dim(8), dim(8)})}; },
        [](const std::vector<Tensor>& in) { return ad::relu(in[0]); });
    check(
        "sigmoid",
        [&] { return std::vector<Tensor>{testing::random_tensor(rng, {dim(64)}, -4, 4)}; },
        [](const std::vector<Tensor>& in) { return ad::sigmoid(in[0]); });
    check(
        "sum/sum_last",
        [&] { return std::vector<Tensor>{testing::random_tensor(rng, {dim(4), dim(4), dim(4)})}; },
        [](const std::vector<Tensor>& in) { return ad::concat({ad::sum(in[0]), ad::sum_last(in[0])}); });
    check(
        "norm_last",
        [&] { return std::vector<Tensor>{testing::random_tensor(rng, {dim(6), dim(8)})}; },
        [](const std::vector<Tensor>& in) { return ad::norm_last(in[0], 1e-9); });
    check(
        "reshape/flatten/concat/gather",
        [&] {
            return std::vector<Tensor>{testing::random_tensor(rng, {dim(4), dim(4)}),
                                       testing::random_tensor(rng, {dim(8)})};
        },
        [](const std::vector<Tensor>& in) {
            Tensor c = ad::concat({ad::flatten(in[0]), in[1]});
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < c.numel(); ++i) idx.push_back((i * 7) % c.numel());
            idx.push_back(0);
            const std::size_t n = idx.size();
            return ad::reshape(ad::gather(c, idx, {n}), {n, 1});
        });
    check(
        "softmax",
        [&] { return std::vector<Tensor>{testing::random_tensor(rng, {dim(4), dim(4), dim(4)}, -3, 3)}; },
        [](const std::vector<Tensor>& in) { return ad::softmax(in[0], in[0].shape()[1] % 3); });
    check(
        "dense",
        [&] {
            const std::size_t n = dim(8), m = dim(6);
            return std::vector<Tensor>{testing::random_tensor(rng, {n}), testing::random_tensor(rng, {m, n}),
                                       testing::random_tensor(rng, {m})};
        },
        [](const std::vector<Tensor>& in) { return ad::dense(in[0], in[1], in[2]); });
    check(
        "conv2d",
        [&] {
            const std::size_t cin = dim(2), cout = dim(2), k = dim(3);
            const std::size_t h = k + rng.index(3), w = k + rng.index(3);
            return std::vector<Tensor>{testing::random_tensor(rng, {cin, h, w}),
                                       testing::random_tensor(rng, {cout, cin, k, k})};
        },
        [](const std::vector<Tensor>& in) {
            const std::size_t stride = in[0].shape()[1] % 2 + 1;
            return ad::conv2d(in[0], in[1], stride, stride - 1);
        });
    check(
        "add_channel_bias",
        [&] {
            const std::size_t c = dim(3);
            return std::vector<Tensor>{testing::random_tensor(rng, {c, dim(4), dim(4)}),
                                       testing::random_tensor(rng, {c})};
        },
        [](const std::vector<Tensor>& in) { return ad::add_channel_bias(in[0], in[1]); });
    check(
        "adaptive_avg_pool2d",
        [&] { return std::vector<Tensor>{testing::random_tensor(rng, {dim(2), 2 + rng.index(5), 2 + rng.index(5)})}; },
        [](const std::vector<Tensor>& in) { return ad::adaptive_avg_pool2d(in[0], 2, 3); });
}

TEST_CASE("a small random network passes the finite-difference check")
{
    Rng rng(99);
    std::vector<Tensor> in{testing::random_tensor(rng, {2, 6, 6}), testing::random_tensor(rng, {3, 2, 3, 3}),
                           testing::random_tensor(rng, {3}), testing::random_tensor(rng, {4, 12}),
                           testing::random_tensor(rng, {4})};
    auto net = [](const std::vector<Tensor>& p) {
        Tensor h = ad::sigmoid(ad::add_channel_bias(ad::conv2d(p[0], p[1], 2, 1), p[2]));
        h = ad::flatten(ad::adaptive_avg_pool2d(h, 2, 2));
        return ad::softmax(ad::dense(h, p[3], p[4]), 0);
    };
    CHECK(gradcheck(net, in).max_rel_error < 1e-3);
}

TEST_CASE("adaptive pooling bins")
{
    Tensor x({1, 1, 4}, {1, 2, 3, 4});
    Tensor y = ad::adaptive_avg_pool2d(x, 1, 2);
    CHECK(y.data()[0] == 1.5);
    CHECK(y.data()[1] == 3.5);
    Tensor z = ad::adaptive_avg_pool2d(Tensor({1, 1, 3}, {1, 2, 3}), 1, 2);
    CHECK(z.data()[0] == 1.5);  // bins [0,2) and [1,3)
    CHECK(z.data()[1] == 2.5);
}
