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

#include "data/forge.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common/errors.hpp"
#include "common/kv_config.hpp"
#include "common/rng.hpp"
#include "data/image_io.hpp"

namespace capsyolo::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kImageExtensions{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"};

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::optional<yolo::BBox> read_sidecar(const fs::path& image)
{
    fs::path side = image;
    side += ".box";
    if (!fs::exists(side)) return std::nullopt;
    std::ifstream in(side);
    yolo::BBox b;
    if (!(in >> b.x_min >> b.y_min >> b.x_max >> b.y_max) || !b.valid() || b.x_min < 0 || b.y_min < 0 ||
        b.x_max > 1 || b.y_max > 1) {
        throw ValidationError("malformed box annotation " + side.string());
    }
    return b;
}

}  // namespace

std::size_t SourceCorpus::count(const std::string& cls) const
{
    auto it = classes.find(cls);
    return it == classes.end() ? 0 : it->second.size();
}

std::size_t SourceCorpus::total() const
{
    std::size_t n = 0;
    for (const auto& [_, imgs] : classes) n += imgs.size();
    return n;
}

ScanResult scan_sources(const std::vector<std::string>& roots)
{
    if (roots.empty()) throw ContractError("scan_sources: no source roots given");
    ScanResult res;
    for (const auto& root : roots) {
        const fs::path rp(root);
        if (!fs::is_directory(rp)) throw IoError("source root not found: " + root);
        SourceCorpus corpus;
        corpus.root = root;
        corpus.name = rp.filename().empty() ? rp.parent_path().filename().string() : rp.filename().string();

        std::vector<fs::path> class_dirs;
        for (const auto& e : fs::directory_iterator(rp))
            if (e.is_directory()) class_dirs.push_back(e.path());
        std::sort(class_dirs.begin(), class_dirs.end());

        for (const auto& dir : class_dirs) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(dir))
                if (e.is_regular_file() && kImageExtensions.count(lower(e.path().extension().string())))
                    files.push_back(e.path());
            std::sort(files.begin(), files.end());
            auto& list = corpus.classes[dir.filename().string()];
            for (const auto& f : files) {
                try {
                    auto img = read_rgb(f.string());
                    (void)img;
                    list.push_back({f.string(), f.filename().string(), read_sidecar(f)});
                } catch (const BadInputError& e) {
                    res.skipped.push_back({f.string(), e.reason});
                } catch (const ValidationError& e) {
                    res.skipped.push_back({f.string(), e.what()});
                }
            }
        }
        if (corpus.total() == 0) throw ValidationError("source " + root + " contains no readable images");
        res.corpora.push_back(std::move(corpus));
    }
    return res;
}

std::vector<ClassTarget> parse_targets(const std::string& text, const std::string& origin)
{
    auto cfg = KvConfig::parse(text, origin);
    std::vector<ClassTarget> out;
    std::set<std::string> seen;
    for (const auto& [name, _] : cfg.entries()) {
        const auto n = cfg.get_int(name, -1);
        if (n <= 0) throw ConfigError(origin + ": target for '" + name + "' must be a positive integer");
        if (!seen.insert(name).second) throw ConfigError(origin + ": duplicate class '" + name + "'");
        out.push_back({name, static_cast<std::size_t>(n)});
    }
    if (out.empty()) throw ConfigError(origin + ": no class targets");
    return out;
}

std::vector<ClassTarget> load_targets(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open targets file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_targets(ss.str(), path);
}

std::vector<std::size_t> DatasetManifest::class_counts() const
{
    std::vector<std::size_t> c(classes.size(), 0);
    for (const auto& e : entries) ++c.at(e.label);
    return c;
}

std::size_t DatasetManifest::train_count() const
{
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.train; }));
}

DatasetManifest balance_merge(const std::vector<SourceCorpus>& sources, const std::vector<ClassTarget>& targets,
                              std::uint64_t seed)
{
    if (targets.empty()) throw ContractError("balance_merge: no targets");
    DatasetManifest m;
    m.seed = seed;
    for (const auto& s : sources) m.sources.push_back(s.name);
    Rng rng(seed);

    for (std::size_t label = 0; label < targets.size(); ++label) {
        const auto& t = targets[label];
        m.classes.push_back(t.name);
        std::vector<std::size_t> holders;
        std::size_t available = 0;
        for (std::size_t s = 0; s < sources.size(); ++s) {
            const std::size_t n = sources[s].count(t.name);
            if (n > 0) holders.push_back(s);
            available += n;
        }
        if (available < t.count) {
            throw ValidationError("class '" + t.name + "': target " + std::to_string(t.count) + " but only " +
                                  std::to_string(available) + " images available (shortfall " +
                                  std::to_string(t.count - available) + ")");
        }

        std::size_t smallest = SIZE_MAX;
        for (auto s : holders) smallest = std::min(smallest, sources[s].count(t.name));
        const std::size_t share = std::min(smallest, t.count / holders.size());
        std::vector<std::size_t> take(sources.size(), 0);
        std::size_t remaining = t.count;
        for (auto s : holders) {
            take[s] = share;
            remaining -= share;
        }
        for (auto s : holders) {
            const std::size_t extra = std::min(remaining, sources[s].count(t.name) - take[s]);
            take[s] += extra;
            remaining -= extra;
        }

        ClassPlan plan{t.name, t.count, {}};
        for (auto s : holders) {
            const auto& imgs = sources[s].classes.at(t.name);
            std::vector<std::size_t> idx(imgs.size());
            std::iota(idx.begin(), idx.end(), 0);
            rng.shuffle(idx);
            idx.resize(take[s]);
            std::sort(idx.begin(), idx.end());
            for (auto i : idx) {
                ManifestEntry e;
                e.file_id = sources[s].name + "/" + t.name + "/" + imgs[i].file_name;
                e.path = imgs[i].path;
                e.source = sources[s].name;
                e.label = label;
                if (imgs[i].box) e.box = *imgs[i].box;
                m.entries.push_back(std::move(e));
            }
            plan.from_source[sources[s].name] = take[s];
        }
        m.plans.push_back(std::move(plan));
    }
    return m;
}

void split(DatasetManifest& manifest, double train_fraction, std::uint64_t seed)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train fraction must lie strictly between 0 and 1");
    }
    Rng rng(seed);
    for (std::size_t c = 0; c < manifest.classes.size(); ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < manifest.entries.size(); ++i)
            if (manifest.entries[i].label == c) idx.push_back(i);
        if (idx.size() < 2) {
            throw ValidationError("class '" + manifest.classes[c] + "' has " + std::to_string(idx.size()) +
                                  " image(s); a split needs at least 2");
        }
        const auto n = static_cast<double>(idx.size());
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        rng.shuffle(idx);
        for (std::size_t k = 0; k < idx.size(); ++k) manifest.entries[idx[k]].train = k < n_train;
    }
    manifest.train_fraction = train_fraction;
    manifest.split_seed = seed;
}

std::string manifest_to_json(const DatasetManifest& m)
{
    json j;
    j["classes"] = m.classes;
    j["sources"] = m.sources;
    j["seed"] = m.seed;
    j["train_fraction"] = m.train_fraction;
    j["split_seed"] = m.split_seed;
    j["plans"] = json::array();
    for (const auto& p : m.plans) j["plans"].push_back({{"class", p.name}, {"target", p.target}, {"from_source", p.from_source}});
    j["images"] = json::array();
    for (const auto& e : m.entries) {
        j["images"].push_back({{"file_id", e.file_id},
                               {"path", e.path},
                               {"source", e.source},
                               {"label", e.label},
                               {"split", e.train ? "train" : "test"},
                               {"box", {e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max}},
                               {"severity", e.severity},
                               {"plant_part", e.plant_part}});
    }
    return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text)
{
    DatasetManifest m;
    try {
        auto j = json::parse(text);
        m.classes = j.at("classes").get<std::vector<std::string>>();
        m.sources = j.at("sources").get<std::vector<std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.train_fraction = j.at("train_fraction").get<double>();
        m.split_seed = j.at("split_seed").get<std::uint64_t>();
        for (const auto& p : j.at("plans"))
            m.plans.push_back({p.at("class").get<std::string>(), p.at("target").get<std::size_t>(),
                               p.at("from_source").get<std::map<std::string, std::size_t>>()});
        for (const auto& im : j.at("images")) {
            ManifestEntry e;
            e.file_id = im.at("file_id").get<std::string>();
            e.path = im.at("path").get<std::string>();
            e.source = im.at("source").get<std::string>();
            e.label = im.at("label").get<std::size_t>();
            e.train = im.at("split").get<std::string>() == "train";
            auto b = im.at("box").get<std::vector<double>>();
            if (b.size() != 4) throw ValidationError("manifest box must have 4 values");
            e.box = {b[0], b[1], b[2], b[3]};
            e.severity = im.value("severity", "unspecified");
            e.plant_part = im.value("plant_part", "unspecified");
            if (e.label >= m.classes.size()) throw ValidationError("manifest label out of range: " + e.file_id);
            m.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

BalanceReport validate_balance(const std::vector<std::string>& classes, const std::vector<std::size_t>& labels,
                               const std::vector<std::string>& sources, double ratio_bound)
{
    BalanceReport r;
    r.classes = classes;
    r.counts.assign(classes.size(), 0);
    r.ratio_bound = ratio_bound;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= classes.size()) continue;
        ++r.counts[labels[i]];
        if (i < sources.size()) {
            auto& hist = r.by_source[sources[i]];
            hist.resize(classes.size(), 0);
            ++hist[labels[i]];
        }
    }
    for (std::size_t c = 0; c < classes.size(); ++c)
        if (r.counts[c] == 0) r.fatal.push_back(classes[c]);
    if (!classes.empty() && r.fatal.empty()) {
        const auto [lo, hi] = std::minmax_element(r.counts.begin(), r.counts.end());
        r.ratio = static_cast<double>(*hi) / static_cast<double>(*lo);
        r.ratio_exceeded = ratio_bound > 0.0 && *r.ratio > ratio_bound;
    }
    return r;
}

BalanceReport validate_balance(const DatasetManifest& m, double ratio_bound)
{
    std::vector<std::size_t> labels;
    std::vector<std::string> sources;
    for (const auto& e : m.entries) {
        labels.push_back(e.label);
        sources.push_back(e.source);
    }
    return validate_balance(m.classes, labels, sources, ratio_bound);
}

std::string BalanceReport::to_json() const
{
    json j;
    j["classes"] = json::array();
    for (std::size_t c = 0; c < classes.size(); ++c) j["classes"].push_back({{"name", classes[c]}, {"count", counts[c]}});
    j["by_source"] = by_source;
    j["max_min_ratio"] = ratio ? json(*ratio) : json(nullptr);
    j["ratio_bound"] = ratio_bound;
    j["ratio_exceeded"] = ratio_exceeded;
    j["fatal_classes"] = fatal;
    j["ok"] = ok();
    return j.dump(2);
}

}  // namespace capsyolo::data
