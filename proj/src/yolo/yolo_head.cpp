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

#include "yolo/yolo_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/errors.hpp"

namespace capsyolo::yolo {

void GridSpec::validate() const
{
    if (cells < 1 || boxes < 1 || classes < 1) throw ConfigError("grid needs S >= 1, B >= 1, K >= 1");
}

double iou(const BBox& a, const BBox& b)
{
    const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

std::size_t cell_of(double centre, std::size_t cells)
{
    const double scaled = centre * static_cast<double>(cells);
    auto idx = static_cast<std::size_t>(std::max(0.0, std::floor(scaled)));
    return std::min(idx, cells - 1);
}

}  // namespace

EncodedTargets encode_targets(const std::vector<LabeledBox>& objects, const GridSpec& grid)
{
    grid.validate();
    const std::size_t s = grid.cells, width = grid.cell_width();
    std::vector<double> t(s * s * width, 0.0);
    std::vector<std::string> warnings;

    for (std::size_t n = 0; n < objects.size(); ++n) {
        const auto& obj = objects[n];
        const BBox& box = obj.box;
        if (!box.valid() || box.x_min < 0.0 || box.y_min < 0.0 || box.x_max > 1.0 || box.y_max > 1.0) {
            throw ContractError("encode_targets: object " + std::to_string(n) + " has an invalid box");
        }
        if (obj.class_id >= grid.classes) {
            throw ContractError("encode_targets: class " + std::to_string(obj.class_id) + " out of range");
        }
        const double cx = 0.5 * (box.x_min + box.x_max);
        const double cy = 0.5 * (box.y_min + box.y_max);
        const std::size_t col = cell_of(cx, s);
        const std::size_t row = cell_of(cy, s);
        double* cell = t.data() + (row * s + col) * width;

        std::size_t slot = grid.boxes;
        for (std::size_t b = 0; b < grid.boxes; ++b) {
            if (cell[grid.box_offset(b) + 4] == 0.0) {
                slot = b;
                break;
            }
        }
        if (slot == grid.boxes) {
            slot = grid.boxes - 1;
            warnings.push_back("cell (" + std::to_string(row) + "," + std::to_string(col) +
                               ") already full; object " + std::to_string(n) + " overwrites box slot " +
                               std::to_string(slot));
        }
        double* rec = cell + grid.box_offset(slot);
        rec[0] = cx * static_cast<double>(s) - static_cast<double>(col);
        rec[1] = cy * static_cast<double>(s) - static_cast<double>(row);
        rec[2] = box.width();
        rec[3] = box.height();
        rec[4] = 1.0;

        double* cls = cell + grid.class_offset();
        for (std::size_t k = 0; k < grid.classes; ++k) {
            if (cls[k] != 0.0 && k != obj.class_id) {
                warnings.push_back("cell (" + std::to_string(row) + "," + std::to_string(col) +
                                   ") class " + std::to_string(k) + " replaced by " +
                                   std::to_string(obj.class_id));
            }
            cls[k] = (k == obj.class_id) ? 1.0 : 0.0;
        }
    }
    return {Tensor(grid.shape(), std::move(t)), std::move(warnings)};
}

Tensor activate(const Tensor& raw, const GridSpec& grid)
{
    if (raw.shape() != grid.shape()) {
        throw DimensionError("activate: head tensor " + ad::shape_str(raw.shape()) + " does not match grid " +
                             ad::shape_str(grid.shape()));
    }
    const std::size_t cells = grid.cells * grid.cells, width = grid.cell_width();
    const std::size_t nbox = grid.boxes * 5, k = grid.classes;
    auto x = raw.data();
    std::vector<double> y(x.size());
    for (std::size_t c = 0; c < cells; ++c) {
        const double* in = x.data() + c * width;
        double* out = y.data() + c * width;
        for (std::size_t i = 0; i < nbox; ++i) {
            out[i] = in[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-in[i])) : std::exp(in[i]) / (1.0 + std::exp(in[i]));
        }
        const double m = *std::max_element(in + nbox, in + width);
        double z = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            out[nbox + i] = std::exp(in[nbox + i] - m);
            z += out[nbox + i];
        }
        for (std::size_t i = 0; i < k; ++i) out[nbox + i] /= z;
    }
    auto yc = y;
    return Tensor::make_result(raw.shape(), std::move(y), {raw},
                               [yc = std::move(yc), cells, width, nbox, k](auto g, auto gin) {
                                   for (std::size_t c = 0; c < cells; ++c) {
                                       const std::size_t base = c * width;
                                       for (std::size_t i = 0; i < nbox; ++i) {
                                           const double v = yc[base + i];
                                           gin[0][base + i] += g[base + i] * v * (1.0 - v);
                                       }
                                       double dot = 0.0;
                                       for (std::size_t i = 0; i < k; ++i) dot += g[base + nbox + i] * yc[base + nbox + i];
                                       for (std::size_t i = 0; i < k; ++i) {
                                           const std::size_t j = base + nbox + i;
                                           gin[0][j] += yc[j] * (g[j] - dot);
                                       }
                                   }
                               });
}

std::vector<Detection> decode_predictions(const Tensor& activated, const GridSpec& grid, double conf_threshold)
{
    if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0)) {
        throw ContractError("decode_predictions: confidence threshold must lie in [0,1]");
    }
    if (activated.shape() != grid.shape()) {
        throw DimensionError("decode_predictions: head tensor " + ad::shape_str(activated.shape()) +
                             " does not match grid " + ad::shape_str(grid.shape()));
    }
    const std::size_t s = grid.cells, width = grid.cell_width();
    const double sd = static_cast<double>(s);
    auto v = activated.data();
    std::vector<Detection> out;
    for (std::size_t row = 0; row < s; ++row) {
        for (std::size_t col = 0; col < s; ++col) {
            const double* cell = v.data() + (row * s + col) * width;
            for (std::size_t b = 0; b < grid.boxes; ++b) {
                const double* rec = cell + grid.box_offset(b);
                const double obj = std::clamp(rec[4], 0.0, 1.0);
                if (obj < conf_threshold) continue;
                const double cx = (static_cast<double>(col) + rec[0]) / sd;
                const double cy = (static_cast<double>(row) + rec[1]) / sd;
                const double w = std::max(0.0, rec[2]);
                const double h = std::max(0.0, rec[3]);
                Detection d;
                d.box = {std::clamp(cx - w / 2, 0.0, 1.0), std::clamp(cy - h / 2, 0.0, 1.0),
                         std::clamp(cx + w / 2, 0.0, 1.0), std::clamp(cy + h / 2, 0.0, 1.0)};
                d.objectness = obj;
                d.class_probs.assign(cell + grid.class_offset(), cell + width);
                d.class_id = static_cast<std::size_t>(
                    std::max_element(d.class_probs.begin(), d.class_probs.end()) - d.class_probs.begin());
                out.push_back(std::move(d));
            }
        }
    }
    return out;
}

std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold)
{
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
        throw ContractError("nms: IoU threshold must lie in [0,1]");
    }
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].score() > detections[b].score();
    });

    std::vector<Detection> kept;
    for (std::size_t idx : order) {
        const auto& cand = detections[idx];
        bool suppressed = false;
        for (const auto& k : kept) {
            if (k.class_id != cand.class_id) continue;
            const double o = iou(k.box, cand.box);
            if (o > 0.0 && o >= iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

}  // namespace capsyolo::yolo
