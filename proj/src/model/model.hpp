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
#include <optional>
#include <string>
#include <vector>

#include "ad/tensor.hpp"
#include "capsnet/capsnet.hpp"
#include "common/kv_config.hpp"
#include "yolo/yolo_head.hpp"

namespace capsyolo::model {

using ad::Shape;
using ad::Tensor;

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelConfig {
    std::size_t image_channels = 3;
    std::size_t image_size = 128;  // square inputs

    // Backbone: two 3x3 stride-2 convolutions with ReLU.
    std::size_t conv1_channels = 16;
    std::size_t conv2_channels = 32;

    // Primary capsules come from one more 3x3 stride-2 convolution with
    // primary_types * primary_dim channels.
    std::size_t primary_types = 4;
    std::size_t primary_dim = 8;
    std::size_t class_dim = 16;
    std::size_t routing_iterations = 3;

    std::size_t grid_cells = 7;
    std::size_t boxes_per_cell = 2;
    std::size_t head_hidden = 128;
    std::vector<std::size_t> decoder_hidden{64};

    std::vector<std::string> class_names;
    std::uint64_t init_seed = 1;

    std::size_t num_classes() const { return class_names.size(); }
    yolo::GridSpec grid() const { return {grid_cells, boxes_per_cell, num_classes()}; }
    Shape image_shape() const { return {image_channels, image_size, image_size}; }
    void validate() const;

    // Overrides fields from `model.*` keys of a key=value config.
    void apply(const KvConfig& cfg);
};

std::string to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const std::string& text);

struct NamedParameter {
    std::string name;
    Tensor value;
};

struct ForwardResult {
    Tensor features;         // backbone output [C2, h, w]
    Tensor primary;          // [N_low, D_low]
    capsnet::CapsuleState capsules;
    Tensor class_poses;      // [K, D_high]
    Tensor class_norms;      // [K]
    Tensor head;             // activated [S, S, B*5+K]
    Tensor reconstruction;   // [C, H, W]; undefined when not requested
};

class CapsYoloModel {
public:
    explicit CapsYoloModel(ModelConfig config);

    // Parameters are tensor handles; copying would alias them. Use clone().
    CapsYoloModel(const CapsYoloModel&) = delete;
    CapsYoloModel& operator=(const CapsYoloModel&) = delete;
    CapsYoloModel(CapsYoloModel&&) = default;
    CapsYoloModel& operator=(CapsYoloModel&&) = default;

    const ModelConfig& config() const { return config_; }

    // Runs the full network on one image [C,H,W] in [0,1]. The decoder is fed
    // the pose of `reconstruct_class`; nullopt skips reconstruction.
    ForwardResult forward(const Tensor& image, std::optional<std::size_t> reconstruct_class) const;

    std::vector<NamedParameter>& parameters() { return params_; }
    const std::vector<NamedParameter>& parameters() const { return params_; }
    std::size_t parameter_count() const;
    const Tensor& parameter(const std::string& name) const;

    void zero_grad();

    // Deep copy of all parameter values.
    CapsYoloModel clone() const;
    void copy_values_from(const CapsYoloModel& other);

    // Stable fingerprint of the weights, e.g. "v1-3fa4...".
    std::string version_id() const;

    void save(const std::string& path) const;
    static CapsYoloModel load(const std::string& path);

private:
    void build();
    Tensor& p(const std::string& name);
    const Tensor& p(const std::string& name) const { return parameter(name); }

    ModelConfig config_;
    std::vector<NamedParameter> params_;
    capsnet::Decoder decoder_;
};

}  // namespace capsyolo::model
