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

#include <cstddef>

#include "ad/tensor.hpp"
#include "yolo/yolo_head.hpp"

namespace capsyolo::loss {

using ad::Tensor;

struct LossWeights {
    // Localization (sum-squared YOLO form).
    double lambda_coord = 5.0;
    double lambda_noobj = 0.5;
    // Margin loss on class-capsule lengths.
    double m_plus = 0.9;
    double m_minus = 0.1;
    double margin_lambda = 0.5;
    // Mixing weights of the three components.
    double localization = 1.0;
    double classification = 1.0;
    double reconstruction = 0.0005;

    // Mixing weights must be finite and >= 0; margin parameters must satisfy
    // 0 <= m_minus < m_plus <= 1.
    void validate() const;
};

struct LossBreakdown {
    double localization = 0.0;
    double classification = 0.0;
    double reconstruction = 0.0;
    double total = 0.0;
    double w_localization = 1.0;
    double w_classification = 1.0;
    double w_reconstruction = 1.0;
    Tensor total_tensor;  // differentiable total
};

// Sum-squared YOLO objective over an activated head tensor and its encoded
// target. Each target record in a cell is matched to the unclaimed predicted
// box with the highest IoU (ties: lower slot). Matched boxes contribute
// lambda_coord * [(x)^2 + (y)^2 + (sqrt w)^2 + (sqrt h)^2 errors] plus the
// objectness error; unmatched boxes contribute lambda_noobj * objectness^2.
// Cells holding an object also contribute the squared class-probability error.
Tensor localization_loss(const Tensor& pred, const Tensor& target, const yolo::GridSpec& grid,
                         const LossWeights& w = {});

// sum_k T_k max(0, m+ - |v_k|)^2 + lambda (1 - T_k) max(0, |v_k| - m-)^2.
Tensor classification_loss(const Tensor& class_norms, std::size_t true_class, const LossWeights& w = {});

// Sum of squared pixel differences.
Tensor reconstruction_loss(const Tensor& reconstructed, const Tensor& original);

LossBreakdown composite_loss(const Tensor& localization, const Tensor& classification,
                             const Tensor& reconstruction, const LossWeights& w = {});

}  // namespace capsyolo::loss
