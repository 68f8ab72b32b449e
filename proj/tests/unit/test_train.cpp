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
#include <limits>

#include "common/errors.hpp"
#include "support/metrics_oracle.hpp"
#include "support/toy_set.hpp"
#include "train/metrics.hpp"
#include "train/trainer.hpp"

using namespace capsyolo;
using train::ConfusionMatrix;

TEST_CASE("confusion matrix")
{
    const std::vector<std::size_t> t{0, 0, 1}, p{0, 1, 1};
    auto cm = train::confusion(t, p, 2);
    CHECK(cm.at(0, 0) == 1);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 0) == 0);
    CHECK(cm.at(1, 1) == 1);
    CHECK(cm.total() == 3);

    const std::vector<std::size_t> y{0, 2, 1, 2, 2};
    auto perfect = train::confusion(y, y, 3);
    CHECK(perfect.at(2, 2) == 3);
    CHECK(perfect.trace() == perfect.total());
    CHECK(perfect.to_csv({"a", "b", "c"}) == "true\\pred,\"a\",\"b\",\"c\"\n\"a\",1,0,0\n\"b\",0,1,0\n\"c\",0,0,3\n");

    const std::vector<std::size_t> bad{0, 3};
    CHECK_THROWS_AS(train::confusion(bad, bad, 3), ContractError);
    CHECK_THROWS_AS(train::confusion(t, bad, 3), ContractError);
}

TEST_CASE("metrics from known counts")
{
    // 2x2 matrix with TP=50, FN=5, FP=5, TN=40 for class 0.
    ConfusionMatrix cm(2);
    for (int i = 0; i < 50; ++i) cm.add(0, 0);
    for (int i = 0; i < 5; ++i) cm.add(0, 1);
    for (int i = 0; i < 5; ++i) cm.add(1, 0);
    for (int i = 0; i < 40; ++i) cm.add(1, 1);
    auto m = train::metrics(cm);
    const auto& c0 = m.per_class[0];
    CHECK(m.counts[0].tp == 50);
    CHECK(m.counts[0].tn == 40);
    CHECK(*c0.accuracy == doctest::Approx(0.90).epsilon(1e-12));
    CHECK(*c0.precision == doctest::Approx(50.0 / 55.0).epsilon(1e-12));
    CHECK(*c0.recall == doctest::Approx(50.0 / 55.0).epsilon(1e-12));
    CHECK(*c0.false_alarm_rate == doctest::Approx(5.0 / 45.0).epsilon(1e-12));
    CHECK(std::abs(*c0.precision - 0.9091) < 1e-4);
    CHECK(std::abs(*c0.false_alarm_rate - 0.1111) < 1e-4);
    CHECK(*c0.f1 == doctest::Approx(2 * *c0.precision * *c0.recall / (*c0.precision + *c0.recall)));
    CHECK(m.accuracy == 0.9);

    SUBCASE("perfect classifier")
    {
        const std::vector<std::size_t> y{0, 1, 1, 0, 1};
        auto pm = train::metrics(train::confusion(y, y, 2));
        CHECK(pm.accuracy == 1.0);
        CHECK(*pm.macro.precision == 1.0);
        CHECK(*pm.macro.recall == 1.0);
        CHECK(*pm.macro.false_alarm_rate == 0.0);
    }
    SUBCASE("absent class has no precision or recall")
    {
        const std::vector<std::size_t> y{0, 1, 0};
        auto am = train::metrics(train::confusion(y, y, 3));
        CHECK(!am.per_class[2].precision.has_value());
        CHECK(!am.per_class[2].recall.has_value());
        CHECK(!am.per_class[2].f1.has_value());
        CHECK(am.per_class[2].false_alarm_rate == 0.0);
        CHECK(am.to_json({"a", "b", "c"}).find("null") != std::string::npos);
    }
    CHECK_THROWS_AS(train::metrics(ConfusionMatrix(3)), ContractError);
}

TEST_CASE("metrics agree with a per-sample counter")
{
    Rng rng(51);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.index(4), n = 1 + rng.index(50);
        std::vector<std::size_t> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng.index(k);
            p[i] = rng.uniform() < 0.6 ? t[i] : rng.index(k);
        }
        auto m = train::metrics(train::confusion(t, p, k));
        REQUIRE(m.accuracy == testing::oracle_accuracy(t, p));
        for (std::size_t c = 0; c < k; ++c) {
            auto o = testing::count_one_vs_rest(t, p, c);
            const auto& r = m.per_class[c];
            CHECK(static_cast<long>(m.counts[c].tp) == o.tp);
            CHECK(static_cast<long>(m.counts[c].fp) == o.fp);
            CHECK(r.accuracy == testing::oracle_ratio(o.tp + o.tn, o.tp + o.tn + o.fp + o.fn));
            CHECK(r.precision == testing::oracle_ratio(o.tp, o.tp + o.fp));
            CHECK(r.recall == testing::oracle_ratio(o.tp, o.tp + o.fn));
            CHECK(r.false_alarm_rate == testing::oracle_ratio(o.fp, o.fp + o.tn));
        }
    }
}

TEST_CASE("early stopping")
{
    const std::vector<double> trace{1.0, 0.9, 0.91, 0.92, 0.93};
    auto r = train::early_stop(trace, 3);
    CHECK(r.stop);
    CHECK(r.stop_epoch == 5);
    CHECK(r.best_epoch == 2);

    const std::vector<double> falling{5, 4, 3, 2, 1, 0.5};
    auto f = train::early_stop(falling, 1);
    CHECK(!f.stop);
    CHECK(f.best_epoch == 6);

    const std::vector<double> tie{1.0, 1.0};
    auto t = train::early_stop(tie, 1);
    CHECK(t.stop);
    CHECK(t.stop_epoch == 2);
    CHECK(t.best_epoch == 1);

    const std::vector<double> tiny{1.0, 1.0 - 1e-7};
    CHECK(train::early_stop(tiny, 1).stop);

    Rng rng(52);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> l(1 + rng.index(20));
        for (auto& v : l) v = rng.uniform(0.0, 2.0);
        auto e = train::early_stop(l, 1 + rng.index(4));
        const std::size_t seen = e.stop ? e.stop_epoch : l.size();
        for (std::size_t i = 0; i < seen; ++i) CHECK(l[e.best_epoch - 1] <= l[i]);
    }
    CHECK_THROWS_AS(train::early_stop(std::vector<double>{}, 3), ContractError);
}

TEST_CASE("train config")
{
    train::TrainConfig c;
    CHECK(c.learning_rate == 1e-4);
    CHECK(c.max_epochs == 40);
    CHECK(c.patience == 5);
    c.apply(KvConfig::parse("train.learning_rate = 0.01\ntrain.max_epochs = 3\nloss.reconstruction = 0\n"));
    CHECK(c.learning_rate == 0.01);
    CHECK(c.max_epochs == 3);
    CHECK(c.weights.reconstruction == 0.0);
    CHECK_THROWS_AS(c.apply(KvConfig::parse("train.patience = 0\n")), ConfigError);
    CHECK_THROWS_AS(c.apply(KvConfig::parse("loss.localization = -1\n")), ConfigError);
}

TEST_CASE("history csv")
{
    std::vector<train::EpochRecord> h{{1, 2.5, 2.75, 0.5, 0.25}, {2, 1.0 / 3.0, std::nan(""), 1.0, 0.0}};
    auto back = train::history_from_csv(train::history_to_csv(h));
    REQUIRE(back.size() == 2);
    CHECK(back[1].train_loss == h[1].train_loss);
    CHECK(std::isnan(back[1].val_loss));
    CHECK(back[0].val_acc == 0.25);
    CHECK_THROWS_AS(train::history_from_csv("bogus\n"), ValidationError);
    const auto svg = train::history_svg(h);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("validation loss") != std::string::npos);
}

TEST_CASE("training on the toy set")
{
    const auto samples = testing::toy_samples(testing::toy_images());

    SUBCASE("overfits 8 images at the default learning rate")
    {
        model::CapsYoloModel m(testing::toy_model_config());
        train::TrainConfig cfg;
        cfg.max_epochs = 200;
        cfg.patience = 200;
        std::size_t first_perfect = 0;
        auto r = train::train(m, samples, {}, cfg, [&](const train::EpochRecord& e) {
            if (!first_perfect && e.train_acc == 1.0) first_perfect = e.epoch;
        });
        REQUIRE(r.history.size() >= 5);
        CHECK(r.history[0].train_loss < r.initial_train_loss);
        for (std::size_t i = 1; i < 5; ++i) CHECK(r.history[i].train_loss < r.history[i - 1].train_loss);
        CHECK(first_perfect > 0);
        CHECK(first_perfect <= 200);
    }
    SUBCASE("zero learning rate leaves the weights alone")
    {
        model::CapsYoloModel m(testing::toy_model_config());
        const auto before = m.version_id();
        train::TrainConfig cfg;
        cfg.learning_rate = 0.0;
        cfg.max_epochs = 3;
        train::train(m, samples, samples, cfg);
        CHECK(m.version_id() == before);
    }
    SUBCASE("same seed gives bitwise-identical weights")
    {
        train::TrainConfig cfg;
        cfg.learning_rate = 1e-3;
        cfg.max_epochs = 3;
        model::CapsYoloModel a(testing::toy_model_config()), b(testing::toy_model_config());
        train::train(a, samples, {}, cfg);
        train::train(b, samples, {}, cfg);
        CHECK(a.version_id() == b.version_id());
    }
    SUBCASE("best validation weights are kept")
    {
        model::CapsYoloModel m(testing::toy_model_config());
        train::TrainConfig cfg;
        cfg.learning_rate = 1e-3;
        cfg.max_epochs = 4;
        std::vector<train::Sample> val(samples.begin(), samples.begin() + 2);
        auto r = train::train(m, samples, val, cfg);
        const double kept = train::evaluate_samples(m, val, cfg.weights).loss;
        CHECK(kept == r.history[r.best_epoch - 1].val_loss);
    }
    SUBCASE("failures")
    {
        model::CapsYoloModel m(testing::toy_model_config());
        train::TrainConfig cfg;
        CHECK_THROWS_AS(train::train(m, {}, samples, cfg), ValidationError);
        auto poisoned = samples;
        auto px = poisoned[0].image.data();
        std::vector<double> v(px.begin(), px.end());
        v[0] = std::numeric_limits<double>::quiet_NaN();
        poisoned[0].image = ad::Tensor(poisoned[0].image.shape(), v);
        CHECK_THROWS_AS(train::train(m, poisoned, {}, cfg), NumericError);
    }
}
