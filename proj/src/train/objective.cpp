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

#include "train/objective.hpp"

#include <algorithm>

namespace capsyolo::train {

loss::LossBreakdown sample_objective(const model::CapsYoloModel& model, const Sample& sample,
                                     const loss::LossWeights& weights, model::ForwardResult* forward_out)
{
    const auto grid = model.config().grid();
    auto out = model.forward(sample.image, sample.label);
    auto target = yolo::encode_targets(sample.objects, grid).target;
    auto parts = loss::composite_loss(loss::localization_loss(out.head, target, grid, weights),
                                      loss::classification_loss(out.class_norms, sample.label, weights),
                                      loss::reconstruction_loss(out.reconstruction, sample.image), weights);
    if (forward_out) *forward_out = std::move(out);
    return parts;
}

std::size_t argmax(std::span<const double> values)
{
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace capsyolo::train
