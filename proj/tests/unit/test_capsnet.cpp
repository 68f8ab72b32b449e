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
#include "capsnet/capsnet.hpp"
#include "common/errors.hpp"
#include "support/gradcheck.hpp"
#include "support/routing_oracle.hpp"

using namespace capsyolo;
using ad::Tensor;

namespace {

double norm_of(std::span<const double> v)
{
    double q = 0.0;
    for (double x : v) q += x * x;
    return std::sqrt(q);
}

}  // namespace

TEST_CASE("squash")
{
    SUBCASE("zero vector is a fixed point")
    {
        Tensor v = capsnet::squash(Tensor::zeros({4}));
        for (double x : v.data()) CHECK(x == 0.0);
    }
    SUBCASE("unit input maps to norm one half")
    {
        Tensor v = capsnet::squash(Tensor({2}, {0.6, 0.8}));
        CHECK(norm_of(v.data()) == doctest::Approx(0.5).epsilon(1e-8));
    }
    SUBCASE("norm ten saturates toward one")
    {
        Tensor v = capsnet::squash(Tensor({2}, {6.0, 8.0}));
        CHECK(norm_of(v.data()) == doctest::Approx(100.0 / 101.0).epsilon(1e-9));
    }
    SUBCASE("output is a non-negative multiple of the input and shorter than one")
    {
        Rng rng(3);
        for (int t = 0; t < 200; ++t) {
            const std::size_t d = 1 + rng.index(16);
            Tensor s = testing::random_tensor(rng, {d}, -20, 20);
            Tensor v = capsnet::squash(s);
            const double ns = norm_of(s.data()), nv = norm_of(v.data());
            CHECK(nv < 1.0);
            CHECK(nv == doctest::Approx(ns * ns / (1 + ns * ns)).epsilon(1e-8));
            for (std::size_t i = 0; i < d; ++i) CHECK(v.data()[i] * s.data()[i] >= 0.0);
        }
    }
    SUBCASE("gradient, including at and near zero")
    {
        Rng rng(4);
        for (int t = 0; t < 100; ++t) {
            Tensor s = testing::random_tensor(rng, {1 + rng.index(4), 1 + rng.index(8)}, -3, 3);
            CHECK(testing::gradcheck([](const auto& in) { return capsnet::squash(in[0]); }, {s}, t).max_rel_error <
                  1e-3);
        }
    }
}

TEST_CASE("routing")
{
    SUBCASE("first iteration couples uniformly")
    {
        Rng rng(8);
        Tensor u = testing::random_tensor(rng, {5, 4, 3});
        auto st = capsnet::route(u, 3);
        for (double c : st.coupling_history.front()) CHECK(c == doctest::Approx(0.25).epsilon(1e-15));
    }
    SUBCASE("single higher capsule always gets coupling one")
    {
        Rng rng(9);
        auto st = capsnet::route(testing::random_tensor(rng, {6, 1, 4}), 4);
        for (const auto& it : st.coupling_history)
            for (double c : it) CHECK(c == 1.0);
    }
    SUBCASE("agreement on one higher capsule raises its coupling")
    {
        // Both lower capsules predict (1,0) for capsule 0; for capsule 1 they
        // predict opposite vectors. After iteration 1: s0 = (1,0), s1 = 0, so
        // b_i0 = squash(1) . (1,0) = 0.5 and b_i1 = 0.
        Tensor u({2, 2, 2}, {1, 0, 0, 1, 1, 0, 0, -1});
        auto st = capsnet::route(u, 3);
        const auto oracle = testing::route_oracle(testing::to_nested(u), 3);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(st.coupling.at({i, 0}) > st.coupling.at({i, 1}));
            CHECK(st.coupling.at({i, 0}) == doctest::Approx(oracle.coupling[i][0]).epsilon(1e-12));
        }
        auto st1 = capsnet::route(u, 1);
        CHECK(st1.routing_logits.at({0, 0}) == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(st1.routing_logits.at({0, 1}) == 0.0);
        // Iteration 2 couples with softmax(0.5, 0).
        auto st2 = capsnet::route(u, 2);
        CHECK(st2.coupling.at({1, 0}) == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(1e-8));
    }
    SUBCASE("couplings are distributions at every iteration")
    {
        Rng rng(10);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 1 + rng.index(6), j = 1 + rng.index(5), d = 1 + rng.index(4);
            auto st = capsnet::route(testing::random_tensor(rng, {n, j, d}, -2, 2), 1 + rng.index(5));
            for (const auto& c : st.coupling_history)
                for (std::size_t i = 0; i < n; ++i) {
                    double total = 0.0;
                    for (std::size_t k = 0; k < j; ++k) {
                        CHECK(c[i * j + k] >= 0.0);
                        total += c[i * j + k];
                    }
                    CHECK(std::abs(total - 1.0) <= 1e-6);
                }
            for (std::size_t k = 0; k < j; ++k) CHECK(st.higher_poses.numel() == j * d);
        }
    }
    CHECK_THROWS_AS(capsnet::route(Tensor::zeros({1, 1, 1}), 0), ContractError);
}

TEST_CASE("primary capsules")
{
    SUBCASE("count and grouping")
    {
        std::vector<double> f(8 * 2 * 2);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = 0.01 * static_cast<double>(i + 1);
        Tensor feat({8, 2, 2}, f);
        Tensor caps = capsnet::primary_capsules(feat, 4);
        REQUIRE(caps.shape() == ad::Shape{8, 4});
        // Capsule 0 is group 0 at pixel (0,0): channels 0..3 at offset 0.
        const std::vector<double> raw{f[0], f[4], f[8], f[12]};
        const double n = norm_of(raw);
        const double scale = n * n / (1 + n * n) / n;
        for (std::size_t k = 0; k < 4; ++k) CHECK(caps.at({0, k}) == doctest::Approx(raw[k] * scale).epsilon(1e-7));
    }
    SUBCASE("zero features give zero poses")
    {
        Tensor caps = capsnet::primary_capsules(Tensor::zeros({8, 3, 3}), 8);
        for (double v : caps.data()) CHECK(v == 0.0);
    }
    SUBCASE("every pose is shorter than one")
    {
        Rng rng(12);
        Tensor caps = capsnet::primary_capsules(testing::random_tensor(rng, {16, 3, 3}, -50, 50), 8);
        for (std::size_t i = 0; i < caps.shape()[0]; ++i)
            CHECK(norm_of(caps.data().subspan(i * 8, 8)) < 1.0);
    }
    SUBCASE("indivisible channels")
    {
        CHECK_THROWS_AS(capsnet::primary_capsules(Tensor::zeros({6, 2, 2}), 4), ConfigError);
        capsnet::CapsuleLayerConfig cfg{5, 4, 3};
        CHECK_THROWS_AS(capsnet::primary_capsules(Tensor::zeros({8, 2, 2}), cfg), ConfigError);
    }
}

TEST_CASE("class capsules")
{
    SUBCASE("zero primary poses give zero class poses")
    {
        Rng rng(13);
        Tensor v = capsnet::class_capsules(Tensor::zeros({4, 3}), testing::random_tensor(rng, {4, 2, 5, 3}), 3);
        for (double x : v.data()) CHECK(x == 0.0);
    }
    SUBCASE("identity transform with one capsule on each side")
    {
        Tensor u({1, 3}, {0.3, -0.4, 0.2});
        Tensor w({1, 1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
        Tensor v = capsnet::class_capsules(u, w, 3);
        Tensor expect = capsnet::squash(Tensor({3}, {0.3, -0.4, 0.2}));
        for (std::size_t k = 0; k < 3; ++k) CHECK(v.data()[k] == doctest::Approx(expect.data()[k]).epsilon(1e-15));
    }
    SUBCASE("random 3-low/2-high instance matches the step-by-step oracle")
    {
        Rng rng(14);
        for (int t = 0; t < 20; ++t) {
            Tensor u = testing::random_tensor(rng, {3, 4}, -1, 1);
            Tensor w = testing::random_tensor(rng, {3, 2, 5, 4}, -1, 1);
            Tensor v = capsnet::class_capsules(u, w, 3);
            const auto oracle = testing::route_oracle(testing::predictions_oracle(u, w), 3);
            for (std::size_t j = 0; j < 2; ++j)
                for (std::size_t d = 0; d < 5; ++d) CHECK(std::abs(v.at({j, d}) - oracle.poses[j][d]) <= 1e-9);
        }
    }
    SUBCASE("one iteration is a uniform-coupling weighted sum")
    {
        Rng rng(15);
        Tensor u = testing::random_tensor(rng, {4, 3});
        Tensor w = testing::random_tensor(rng, {4, 3, 2, 3});
        Tensor v = capsnet::class_capsules(u, w, 1);
        const auto uhat = testing::predictions_oracle(u, w);
        for (std::size_t j = 0; j < 3; ++j) {
            std::vector<double> s(2, 0.0);
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t d = 0; d < 2; ++d) s[d] += uhat[i][j][d] / 3.0;
            const double q = s[0] * s[0] + s[1] * s[1];
            const double f = q / ((1 + q) * std::sqrt(q + capsnet::kSquashEps));
            for (std::size_t d = 0; d < 2; ++d) CHECK(v.at({j, d}) == doctest::Approx(f * s[d]).epsilon(1e-12));
        }
    }
    SUBCASE("permuting higher capsules permutes the output")
    {
        Rng rng(16);
        const std::size_t n = 5, j = 4, dh = 3, dl = 2;
        Tensor u = testing::random_tensor(rng, {n, dl});
        Tensor w = testing::random_tensor(rng, {n, j, dh, dl});
        const std::vector<std::size_t> perm{2, 0, 3, 1};
        std::vector<double> wp(w.numel());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < j; ++k)
                for (std::size_t e = 0; e < dh * dl; ++e)
                    wp[(i * j + k) * dh * dl + e] = w.data()[(i * j + perm[k]) * dh * dl + e];
        Tensor v = capsnet::class_capsules(u, w, 3);
        Tensor vp = capsnet::class_capsules(u, Tensor(w.shape(), wp), 3);
        for (std::size_t k = 0; k < j; ++k)
            for (std::size_t d = 0; d < dh; ++d) CHECK(vp.at({k, d}) == doctest::Approx(v.at({perm[k], d})).epsilon(1e-12));
    }
    SUBCASE("unrolled routing passes the finite-difference check")
    {
        Rng rng(17);
        for (int t = 0; t < 100; ++t) {
            std::vector<Tensor> in{testing::random_tensor(rng, {3, 2}), testing::random_tensor(rng, {3, 2, 3, 2})};
            auto r = testing::gradcheck([](const auto& p) { return capsnet::class_capsules(p[0], p[1], 3); }, in, t);
            CHECK(r.max_rel_error < 1e-3);
        }
    }
    CHECK_THROWS_AS(capsnet::class_capsules(Tensor::zeros({4, 3}), Tensor::zeros({4, 2, 5, 2}), 3), DimensionError);
}

TEST_CASE("reconstruction decoder")
{
    Rng rng(18);
    const ad::Shape img{2, 3, 3};
    SUBCASE("masking keeps exactly one pose")
    {
        Tensor poses = testing::random_away_from_zero(rng, {4, 5});
        Tensor m = capsnet::mask_poses(poses, 2);
        std::size_t nonzero = 0;
        for (double v : m.data()) nonzero += v != 0.0;
        CHECK(nonzero == 5);
        CHECK(m.at({2, 3}) == poses.at({2, 3}));
    }
    SUBCASE("outputs lie in [0,1]")
    {
        auto dec = capsnet::make_decoder(4, 5, {7}, img, rng);
        Tensor out = capsnet::reconstruct(testing::random_tensor(rng, {4, 5}, -5, 5), 1, dec);
        REQUIRE(out.shape() == img);
        for (double v : out.data()) CHECK((v >= 0.0 && v <= 1.0));
    }
    SUBCASE("zero poses through a single layer give sigmoid(bias)")
    {
        auto dec = capsnet::make_decoder(4, 5, {}, img, rng);
        std::vector<double> bias(18);
        for (std::size_t i = 0; i < 18; ++i) bias[i] = -1.0 + 0.1 * static_cast<double>(i);
        std::copy(bias.begin(), bias.end(), dec.layers[0].bias.mutable_data().begin());
        Tensor out = capsnet::reconstruct(Tensor::zeros({4, 5}), 0, dec);
        for (std::size_t i = 0; i < 18; ++i)
            CHECK(out.data()[i] == doctest::Approx(1.0 / (1.0 + std::exp(-bias[i]))).epsilon(1e-15));
    }
    SUBCASE("out-of-range class")
    {
        auto dec = capsnet::make_decoder(4, 5, {}, img, rng);
        CHECK_THROWS_AS(capsnet::reconstruct(Tensor::zeros({4, 5}), 4, dec), ContractError);
    }
}
