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

#include <chrono>
#include <fstream>
#include <set>

#include "common/errors.hpp"
#include "data/container.hpp"
#include "data/forge.hpp"
#include "support/tomato_corpus.hpp"
#include "support/temp_dir.hpp"

using namespace capsyolo;
namespace fs = std::filesystem;

namespace {

void write_toy_tree(const fs::path& root, const std::vector<std::size_t>& counts, Rng& rng, std::size_t size = 6)
{
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const auto dir = root / ("class" + std::to_string(c));
        fs::create_directories(dir);
        for (std::size_t i = 0; i < counts[c]; ++i)
            data::write_png(testing::class_image(c, size, rng), (dir / ("f" + std::to_string(i) + ".png")).string());
    }
}

std::vector<data::ClassTarget> toy_targets(const std::vector<std::size_t>& counts)
{
    std::vector<data::ClassTarget> t;
    for (std::size_t c = 0; c < counts.size(); ++c) t.push_back({"class" + std::to_string(c), counts[c]});
    return t;
}

}  // namespace

TEST_CASE("image io")
{
    Rng rng(41);
    auto img = testing::class_image(2, 5, rng);
    auto back = data::decode_rgb(data::encode_png(img));
    CHECK(back.height == 5);
    CHECK(back.pixels == img.pixels);
    auto t = data::to_tensor(img);
    CHECK(t.shape() == ad::Shape{3, 5, 5});
    CHECK(t.at({1, 0, 2}) == img.pixels[(0 * 5 + 2) * 3 + 1] / 255.0);
    CHECK(data::resize_rgb(img, 9, 7).pixels.size() == 9 * 7 * 3);

    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    try {
        data::decode_rgb(junk);
        FAIL("expected BadInputError");
    } catch (const BadInputError& e) {
        CHECK(e.reason == "undecodable_image");
    }
}

TEST_CASE("scan_sources")
{
    testing::TempDir tmp("scan");
    Rng rng(42);
    write_toy_tree(tmp.path() / "src", {5, 5, 5}, rng);
    std::ofstream(tmp.path() / "src" / "class1" / "broken.png") << "not an image";

    auto res = data::scan_sources({tmp.file("src")});
    REQUIRE(res.corpora.size() == 1);
    const auto& c = res.corpora[0];
    CHECK(c.name == "src");
    CHECK(c.count("class0") == 5);
    CHECK(c.count("class1") == 5);
    CHECK(c.count("class2") == 5);
    REQUIRE(res.skipped.size() == 1);
    CHECK(res.skipped[0].path.find("broken.png") != std::string::npos);

    CHECK_THROWS_AS(data::scan_sources({tmp.file("missing")}), IoError);
    fs::create_directories(tmp.path() / "empty" / "classX");
    CHECK_THROWS_AS(data::scan_sources({tmp.file("empty")}), ValidationError);
}

TEST_CASE("sidecar box annotations override the whole-image box")
{
    testing::TempDir tmp("box");
    Rng rng(43);
    write_toy_tree(tmp.path() / "s", {2}, rng);
    std::ofstream(tmp.path() / "s" / "class0" / "f1.png.box") << "0.1 0.2 0.6 0.9\n";
    auto res = data::scan_sources({tmp.file("s")});
    auto m = data::balance_merge(res.corpora, {{"class0", 2}}, 1);
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries[0].box.x_max == 1.0);
    CHECK(m.entries[1].box.x_min == 0.1);
    CHECK(m.entries[1].box.y_max == 0.9);
}

TEST_CASE("targets file")
{
    auto t = data::parse_targets("# class = count\nBacterial Spot = 200\nLeaf Mold = 100\n");
    REQUIRE(t.size() == 2);
    CHECK(t[0].name == "Bacterial Spot");
    CHECK(t[1].count == 100);
    CHECK_THROWS_AS(data::parse_targets("A = 0\n"), ConfigError);
    CHECK_THROWS_AS(data::parse_targets("A = x\n"), ConfigError);
    CHECK_THROWS_AS(data::parse_targets(""), ConfigError);
}

TEST_CASE("balance_merge on the full tomato corpus counts")
{
    // Full-scale corpora built in memory: only counts matter here.
    std::vector<data::SourceCorpus> sources(2);
    sources[0].name = "controlled";
    sources[1].name = "field";
    std::vector<data::ClassTarget> targets;
    std::size_t pv = 0, pd = 0, total = 0;
    for (const auto& r : testing::tomato_corpus()) {
        for (std::size_t i = 0; i < r.controlled; ++i)
            sources[0].classes[r.name].push_back({"c/" + std::to_string(i), "c" + std::to_string(i) + ".png", {}});
        for (std::size_t i = 0; i < r.field; ++i)
            sources[1].classes[r.name].push_back({"f/" + std::to_string(i), "f" + std::to_string(i) + ".png", {}});
        targets.push_back({r.name, r.target});
        pv += r.controlled;
        pd += r.field;
        total += r.target;
    }
    CHECK(sources[0].total() == 18160);
    CHECK(sources[1].total() == 600);
    CHECK(pv == 18160);
    CHECK(pd == 600);
    CHECK(total == 1800);

    auto m = data::balance_merge(sources, targets, 7);
    CHECK(m.entries.size() == 1800);
    auto counts = m.class_counts();
    for (std::size_t c = 0; c < targets.size(); ++c) CHECK(counts[c] == targets[c].count);
    CHECK(m.plans[0].from_source.at("controlled") == 100);
    CHECK(m.plans[0].from_source.at("field") == 100);
    CHECK(m.plans[3].from_source.at("field") == 50);
    CHECK(m.plans[5].from_source.at("controlled") == 200);
    CHECK(m.plans[5].from_source.count("field") == 0);

    std::set<std::string> ids;
    for (const auto& e : m.entries) ids.insert(e.file_id);
    CHECK(ids.size() == m.entries.size());

    auto again = data::balance_merge(sources, targets, 7);
    CHECK(data::manifest_to_json(again) == data::manifest_to_json(m));

    auto report = data::validate_balance(m, 2.5);
    REQUIRE(report.ratio.has_value());
    CHECK(*report.ratio == 2.0);
    CHECK(report.ok());
    CHECK(data::validate_balance(m, 1.5).ratio_exceeded);

    data::split(m, 0.8, 9);
    CHECK(m.train_count() == 1440);
    CHECK(m.entries.size() - m.train_count() == 360);
    std::size_t bs_train = 0;
    for (const auto& e : m.entries)
        if (e.label == 0 && e.train) ++bs_train;
    CHECK(bs_train == 160);

    auto m2 = data::balance_merge(sources, targets, 7);
    data::split(m2, 0.8, 9);
    CHECK(data::manifest_to_json(m2) == data::manifest_to_json(m));
    CHECK(data::manifest_to_json(data::manifest_from_json(data::manifest_to_json(m))) == data::manifest_to_json(m));
}

TEST_CASE("balance_merge shortfall names the class")
{
    std::vector<data::SourceCorpus> sources(1);
    sources[0].name = "only";
    for (int i = 0; i < 3; ++i) sources[0].classes["Leaf Mold"].push_back({"p", "f" + std::to_string(i), {}});
    try {
        data::balance_merge(sources, {{"Leaf Mold", 5}}, 1);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("Leaf Mold") != std::string::npos);
        CHECK(msg.find("shortfall 2") != std::string::npos);
    }
}

TEST_CASE("split edge cases and balance report")
{
    std::vector<data::SourceCorpus> sources(1);
    sources[0].name = "s";
    for (int i = 0; i < 4; ++i) sources[0].classes["a"].push_back({"p", "a" + std::to_string(i), {}});
    sources[0].classes["b"].push_back({"p", "b0", {}});
    auto m = data::balance_merge(sources, {{"a", 4}, {"b", 1}}, 1);
    CHECK_THROWS_AS(data::split(m, 0.8, 1), ValidationError);
    CHECK_THROWS_AS(data::split(m, 1.0, 1), ConfigError);

    auto uniform = data::validate_balance({"x", "y"}, {0, 1, 0, 1}, {"s", "s", "s", "s"}, 1.5);
    CHECK(uniform.ratio == 1.0);
    CHECK(uniform.ok());
    auto empty = data::validate_balance({"x", "y"}, {0, 0}, {"s", "s"}, 1.5);
    CHECK(!empty.ratio.has_value());
    CHECK(empty.fatal == std::vector<std::string>{"y"});
    CHECK(!empty.ok());
}

TEST_CASE("container round trip")
{
    testing::TempDir tmp("container");
    Rng rng(44);
    write_toy_tree(tmp.path() / "src", {6, 4}, rng, 9);
    auto scan = data::scan_sources({tmp.file("src")});
    auto m = data::balance_merge(scan.corpora, toy_targets({6, 4}), 3);
    data::split(m, 0.8, 3);
    m.entries[1].severity = "early";
    m.entries[2].plant_part = "leaf";
    auto ds = data::assemble(m, 7, 7);
    REQUIRE(ds.size() == 10);
    data::write_container(ds, tmp.file("d.h5"));
    auto back = data::read_container(tmp.file("d.h5"));

    CHECK(back.size() == 10);
    CHECK(back.height == 7);
    CHECK(back.images == ds.images);
    CHECK(back.labels == ds.labels);
    CHECK(back.boxes == ds.boxes);
    CHECK(back.train_mask == ds.train_mask);
    CHECK(back.class_names == m.classes);
    CHECK(back.file_ids == ds.file_ids);
    CHECK(back.severity[1] == "early");
    CHECK(back.plant_part[2] == "leaf");
    CHECK(back.sources == ds.sources);
    CHECK(back.seed == 3);
    CHECK(back.indices(true).size() == 8);
    auto img = back.image(0);
    CHECK(img.shape() == ad::Shape{3, 7, 7});
    for (double v : img.data()) CHECK((v >= 0.0 && v <= 1.0));

    SUBCASE("bad files")
    {
        CHECK_THROWS_AS(data::read_container(tmp.file("nope.h5")), IoError);
        std::ofstream(tmp.file("junk.h5")) << "junk";
        CHECK_THROWS_AS(data::read_container(tmp.file("junk.h5")), IoError);
        CHECK_THROWS_AS(data::write_container(ds, tmp.file("no/such/dir/d.h5")), IoError);
    }
    SUBCASE("manifest image mismatch")
    {
        auto bad = m;
        bad.entries[0].path = tmp.file("gone.png");
        CHECK_THROWS_AS(data::assemble(bad, 7, 7), ValidationError);
        auto broken = ds;
        broken.train_mask.pop_back();
        CHECK_THROWS_AS(data::write_container(broken, tmp.file("x.h5")), ValidationError);
    }
}

TEST_CASE("tomato corpus at 1/10 scale through the full forge pipeline")
{
    const auto start = std::chrono::steady_clock::now();
    testing::TempDir tmp("corpus");
    auto trees = testing::make_corpus_trees(tmp.path(), 0.1, 45);
    auto scan = data::scan_sources({trees.controlled_root, trees.field_root});
    CHECK(scan.skipped.empty());
    auto targets = data::parse_targets(trees.targets_text);
    auto m = data::balance_merge(scan.corpora, targets, 11);
    data::split(m, 0.8, 11);

    CHECK(m.entries.size() == 180);
    auto counts = m.class_counts();
    CHECK(counts[0] == 20);
    CHECK(counts[3] == 10);
    std::vector<std::size_t> train(targets.size(), 0);
    for (const auto& e : m.entries) train[e.label] += e.train;
    for (std::size_t c = 0; c < targets.size(); ++c) {
        CHECK(counts[c] == targets[c].count);
        CHECK(std::abs(static_cast<double>(train[c]) - 0.8 * static_cast<double>(counts[c])) <= 1.0);
    }

    auto ds = data::assemble(m, 16, 16);
    data::write_container(ds, tmp.file("pdv.h5"));
    auto back = data::read_container(tmp.file("pdv.h5"));
    CHECK(back.images == ds.images);
    CHECK(back.class_names == m.classes);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    MESSAGE("forge pipeline took " << secs << " s");
    CHECK(secs < 60.0);
}
