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

#include <vector>

#include "ad/tensor.hpp"
#include "loss/composite_loss.hpp"
#include "model/model.hpp"
#include "yolo/yolo_head.hpp"

namespace capsyolo::train {

struct Sample {
    ad::Tensor image;  // [C,H,W] in [0,1]
    std::size_t label = 0;
    std::vector<yolo::LabeledBox> objects;
};

// Forward pass plus the weighted three-part loss for one labelled image.
// `forward_out`, when given, receives the network outputs.
loss::LossBreakdown sample_objective(const model::CapsYoloModel& model, const Sample& sample,
                                     const loss::LossWeights& weights, model::ForwardResult* forward_out = nullptr);

// Predicted class from the class-capsule lengths (lowest index on ties).
std::size_t argmax(std::span<const double> values);

}  // namespace capsyolo::train
