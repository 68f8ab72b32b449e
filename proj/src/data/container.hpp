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
#include <string>
#include <vector>

#include "ad/tensor.hpp"
#include "data/forge.hpp"
#include "data/image_io.hpp"

namespace capsyolo::data {

inline constexpr std::uint32_t kContainerVersion = 1;

// In-memory image of a container file. Pixels are stored as 8-bit RGB; the
// file records a 1/255 scale so readers recover values in [0,1].
struct Dataset {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> images;  // [N,H,W,3]
    std::vector<std::int32_t> labels;
    std::vector<double> boxes;  // [N,4] x_min,y_min,x_max,y_max
    std::vector<std::uint8_t> train_mask;
    std::vector<std::string> class_names;
    std::vector<std::string> file_ids;
    std::vector<std::string> sources;
    std::vector<std::string> severity;
    std::vector<std::string> plant_part;
    std::uint64_t seed = 0;

    std::size_t size() const { return labels.size(); }
    std::span<const std::uint8_t> pixels(std::size_t i) const;
    ad::Tensor image(std::size_t i) const;
    yolo::BBox box(std::size_t i) const;
    std::vector<std::size_t> indices(bool train) const;

    // Equal leading dimensions and in-range labels; throws ValidationError.
    void check() const;
};

// Decodes every manifest entry into one uint8 block at height x width.
Dataset assemble(const DatasetManifest& manifest, std::size_t height, std::size_t width);

void write_container(const Dataset& ds, const std::string& path);
Dataset read_container(const std::string& path);

}  // namespace capsyolo::data
