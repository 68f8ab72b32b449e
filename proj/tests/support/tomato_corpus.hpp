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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "data/image_io.hpp"

namespace capsyolo::testing {

struct CorpusRow {
    const char* name;
    std::size_t controlled;  // 0 = class absent from that corpus
    std::size_t field;
    std::size_t target;
};

inline const std::vector<CorpusRow>& tomato_corpus()
{
    static const std::vector<CorpusRow> rows{
        {"Bacterial Spot", 2127, 100, 200},
        {"Early Blight", 1000, 100, 200},
        {"Late Blight", 1909, 100, 200},
        {"Leaf Mold", 952, 50, 100},
        {"Septoria Leaf Spot", 1771, 100, 200},
        {"Spider Mites", 1676, 0, 200},
        {"Target Spot", 1404, 100, 200},
        {"Tomato Yellow Leaf Curl Virus", 5357, 50, 100},
        {"Tomato Mosaic Virus", 373, 0, 200},
        {"Healthy", 1591, 0, 200},
    };
    return rows;
}

inline std::size_t scaled(std::size_t n, double scale)
{
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale));
}

// Flat-colour image with per-pixel noise; the hue depends on `label`.
inline data::RgbImage class_image(std::size_t label, std::size_t size, Rng& rng)
{
    data::RgbImage img;
    img.height = img.width = size;
    img.pixels.resize(size * size * 3);
    const double hue = static_cast<double>(label) * 0.61803398875;
    const double base[3] = {0.5 + 0.45 * std::sin(6.283 * hue), 0.5 + 0.45 * std::sin(6.283 * (hue + 0.33)),
                            0.5 + 0.45 * std::sin(6.283 * (hue + 0.67))};
    for (std::size_t i = 0; i < size * size; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = std::clamp(base[c] + rng.uniform(-0.08, 0.08), 0.0, 1.0);
            img.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    return img;
}

struct SyntheticTrees {
    std::string controlled_root;
    std::string field_root;
    std::string targets_text;
    std::size_t total_target = 0;
};

// Writes <dir>/controlled and <dir>/field trees with the tomato corpus counts scaled by `scale`.
inline SyntheticTrees make_corpus_trees(const std::filesystem::path& dir, double scale, std::uint64_t seed,
                                        std::size_t image_size = 8)
{
    namespace fs = std::filesystem;
    SyntheticTrees t;
    t.controlled_root = (dir / "controlled").string();
    t.field_root = (dir / "field").string();
    Rng rng(seed);
    const auto& rows = tomato_corpus();
    for (std::size_t label = 0; label < rows.size(); ++label) {
        const auto& r = rows[label];
        for (auto [root, n] : {std::pair{t.controlled_root, r.controlled}, std::pair{t.field_root, r.field}}) {
            const std::size_t count = scaled(n, scale);
            if (count == 0) continue;
            const fs::path cls = fs::path(root) / r.name;
            fs::create_directories(cls);
            for (std::size_t i = 0; i < count; ++i)
                data::write_png(class_image(label, image_size, rng), (cls / ("img_" + std::to_string(i) + ".png")).string());
        }
        t.targets_text += std::string(r.name) + " = " + std::to_string(scaled(r.target, scale)) + "\n";
        t.total_target += scaled(r.target, scale);
    }
    return t;
}

}  // namespace capsyolo::testing
