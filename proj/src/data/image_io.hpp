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
#include <span>
#include <string>
#include <vector>

#include "ad/tensor.hpp"

namespace capsyolo::data {

// 8-bit RGB, row-major HWC.
struct RgbImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    bool empty() const { return pixels.empty(); }
};

// Throws BadInputError("undecodable_image") when the bytes are not an image.
RgbImage decode_rgb(std::span<const std::uint8_t> bytes);
// Throws IoError if the file is missing, BadInputError if it does not decode.
RgbImage read_rgb(const std::string& path);
void write_png(const RgbImage& img, const std::string& path);
std::vector<std::uint8_t> encode_png(const RgbImage& img);

RgbImage resize_rgb(const RgbImage& img, std::size_t height, std::size_t width);

// [3,H,W] tensor scaled to [0,1].
ad::Tensor to_tensor(const RgbImage& img);
ad::Tensor to_tensor(std::span<const std::uint8_t> hwc, std::size_t height, std::size_t width);

}  // namespace capsyolo::data
