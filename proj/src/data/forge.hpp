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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "yolo/yolo_head.hpp"

namespace capsyolo::data {

struct SourceImage {
    std::string path;
    std::string file_name;
    // Sidecar "<image>.box" with "x_min y_min x_max y_max" in [0,1].
    std::optional<yolo::BBox> box;
};

struct SkippedFile {
    std::string path;
    std::string reason;
};

struct SourceCorpus {
    std::string name;
    std::string root;
    std::map<std::string, std::vector<SourceImage>> classes;  // sorted by file name

    std::size_t count(const std::string& cls) const;
    std::size_t total() const;
};

struct ScanResult {
    std::vector<SourceCorpus> corpora;
    std::vector<SkippedFile> skipped;
};

// Scans `<root>/<class>/<image>` trees. Each root becomes one corpus named
// after its directory. Files that do not decode are skipped and reported.
ScanResult scan_sources(const std::vector<std::string>& roots);

struct ClassTarget {
    std::string name;
    std::size_t count = 0;
};

// `class name = count` lines; order defines the class index.
std::vector<ClassTarget> parse_targets(const std::string& text, const std::string& origin = "<string>");
std::vector<ClassTarget> load_targets(const std::string& path);

struct ManifestEntry {
    std::string file_id;  // "<source>/<class>/<file>"
    std::string path;
    std::string source;
    std::size_t label = 0;
    bool train = false;
    yolo::BBox box{0.0, 0.0, 1.0, 1.0};
    std::string severity = "unspecified";
    std::string plant_part = "unspecified";
};

struct ClassPlan {
    std::string name;
    std::size_t target = 0;
    std::map<std::string, std::size_t> from_source;
};

struct DatasetManifest {
    std::vector<std::string> classes;
    std::vector<std::string> sources;
    std::vector<ClassPlan> plans;
    std::vector<ManifestEntry> entries;  // grouped by class, sources in scan order
    std::uint64_t seed = 0;
    double train_fraction = 0.0;  // 0 until split() ran
    std::uint64_t split_seed = 0;

    std::vector<std::size_t> class_counts() const;
    std::size_t train_count() const;
};

// Per class: an equal share from every source holding the class, capped by the
// smallest holder, then the remainder from the richer sources in order.
DatasetManifest balance_merge(const std::vector<SourceCorpus>& sources, const std::vector<ClassTarget>& targets,
                              std::uint64_t seed);

// Stratified split; round(fraction * n) training images per class.
void split(DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

struct BalanceReport {
    std::vector<std::string> classes;
    std::vector<std::size_t> counts;
    std::map<std::string, std::vector<std::size_t>> by_source;  // source -> per-class counts
    std::optional<double> ratio;                                // max/min; absent if a class is empty
    double ratio_bound = 0.0;
    bool ratio_exceeded = false;
    std::vector<std::string> fatal;  // classes with zero images

    bool ok() const { return fatal.empty() && !ratio_exceeded; }
    std::string to_json() const;
};

BalanceReport validate_balance(const std::vector<std::string>& classes, const std::vector<std::size_t>& labels,
                               const std::vector<std::string>& sources, double ratio_bound);
BalanceReport validate_balance(const DatasetManifest& m, double ratio_bound);

}  // namespace capsyolo::data
