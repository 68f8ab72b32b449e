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
#include <string>
#include <utility>
#include <vector>

#include "ad/tensor.hpp"

namespace capsyolo::yolo {

using ad::Tensor;

// Normalized image coordinates.
struct BBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_min <= x_max && y_min <= y_max; }
};

struct Detection {
    BBox box;
    double objectness = 0.0;
    std::vector<double> class_probs;
    std::size_t class_id = 0;

    // Ranking score: objectness times the probability of the chosen class.
    double score() const { return objectness * class_probs.at(class_id); }
};

// S x S cells, B boxes per cell, K classes. Each cell carries B records of
// (x, y, w, h, objectness) followed by K class probabilities.
struct GridSpec {
    std::size_t cells = 7;
    std::size_t boxes = 2;
    std::size_t classes = 10;

    std::size_t cell_width() const { return boxes * 5 + classes; }
    std::size_t box_offset(std::size_t b) const { return b * 5; }
    std::size_t class_offset() const { return boxes * 5; }
    ad::Shape shape() const { return {cells, cells, cell_width()}; }
    void validate() const;
};

struct LabeledBox {
    BBox box;
    std::size_t class_id = 0;
};

struct EncodedTargets {
    Tensor target;
    std::vector<std::string> warnings;
};

double iou(const BBox& a, const BBox& b);

// Responsible cell is the one containing the box centre; a centre on a cell
// boundary goes to the higher-index cell. Within a cell, objects fill box
// slots in order; once all slots are taken the last slot is overwritten.
EncodedTargets encode_targets(const std::vector<LabeledBox>& objects, const GridSpec& grid);

// Applies sigmoid to every box record and softmax to each cell's class logits.
Tensor activate(const Tensor& raw, const GridSpec& grid);

// Turns an activated head tensor into detections whose objectness is at
// least `conf_threshold`. Boxes are clipped to the unit square.
std::vector<Detection> decode_predictions(const Tensor& activated, const GridSpec& grid, double conf_threshold);

// Greedy per-class suppression ordered by score (ties: lower input index).
// A detection is dropped when it overlaps an already kept detection of the
// same class with IoU >= iou_threshold; boxes that do not overlap at all never
// suppress each other.
std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold);

}  // namespace capsyolo::yolo
