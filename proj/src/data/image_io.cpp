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

#include "data/image_io.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "common/errors.hpp"

namespace capsyolo::data {

namespace {

RgbImage from_bgr(const cv::Mat& bgr)
{
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    RgbImage out;
    out.height = static_cast<std::size_t>(rgb.rows);
    out.width = static_cast<std::size_t>(rgb.cols);
    out.pixels.resize(out.height * out.width * 3);
    for (int r = 0; r < rgb.rows; ++r) {
        const auto* row = rgb.ptr<std::uint8_t>(r);
        std::copy(row, row + rgb.cols * 3, out.pixels.begin() + static_cast<std::ptrdiff_t>(r) * rgb.cols * 3);
    }
    return out;
}

cv::Mat to_mat(const RgbImage& img)
{
    if (img.pixels.size() != img.height * img.width * 3 || img.empty()) {
        throw ContractError("RgbImage: pixel buffer does not match its dimensions");
    }
    cv::Mat rgb(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC3,
                const_cast<std::uint8_t*>(img.pixels.data()));
    return rgb;
}

}  // namespace

RgbImage decode_rgb(std::span<const std::uint8_t> bytes)
{
    if (bytes.empty()) throw BadInputError("undecodable_image", "empty image payload");
    cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr;
    try {
        bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
    } catch (const cv::Exception&) {
        bgr.release();
    }
    if (bgr.empty()) throw BadInputError("undecodable_image", "payload is not a decodable image");
    return from_bgr(bgr);
}

RgbImage read_rgb(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_rgb(bytes);
}

std::vector<std::uint8_t> encode_png(const RgbImage& img)
{
    cv::Mat bgr;
    cv::cvtColor(to_mat(img), bgr, cv::COLOR_RGB2BGR);
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr, out)) throw IoError("png encoding failed");
    return out;
}

void write_png(const RgbImage& img, const std::string& path)
{
    auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + path);
}

RgbImage resize_rgb(const RgbImage& img, std::size_t height, std::size_t width)
{
    if (height == 0 || width == 0) throw ContractError("resize_rgb: target size must be positive");
    if (img.height == height && img.width == width) return img;
    cv::Mat dst;
    const bool shrink = height < img.height && width < img.width;
    cv::resize(to_mat(img), dst, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0,
               shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
    RgbImage out;
    out.height = height;
    out.width = width;
    out.pixels.assign(dst.data, dst.data + height * width * 3);
    return out;
}

ad::Tensor to_tensor(std::span<const std::uint8_t> hwc, std::size_t height, std::size_t width)
{
    if (hwc.size() != height * width * 3) throw DimensionError("to_tensor: buffer is not H*W*3");
    std::vector<double> v(hwc.size());
    const std::size_t plane = height * width;
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) v[c * plane + i] = hwc[i * 3 + c] / 255.0;
    return ad::Tensor({3, height, width}, std::move(v));
}

ad::Tensor to_tensor(const RgbImage& img)
{
    return to_tensor(img.pixels, img.height, img.width);
}

}  // namespace capsyolo::data
