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

#include "loss/composite_loss.hpp"

#include <cmath>

#include "ad/ops.hpp"
#include "common/errors.hpp"

namespace capsyolo::loss {

void LossWeights::validate() const
{
    for (double v : {lambda_coord, lambda_noobj, margin_lambda, localization, classification, reconstruction}) {
        if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and non-negative");
    }
    if (!(m_minus >= 0.0 && m_minus < m_plus && m_plus <= 1.0)) {
        throw ConfigError("margin loss needs 0 <= m_minus < m_plus <= 1");
    }
}

Tensor localization_loss(const Tensor& pred, const Tensor& target, const yolo::GridSpec& grid,
                         const LossWeights& w)
{
    if (pred.shape() != target.shape()) {
        throw DimensionError("localization_loss: prediction " + ad::shape_str(pred.shape()) + " vs target " +
                             ad::shape_str(target.shape()));
    }
    if (pred.shape() != grid.shape()) {
        throw DimensionError("localization_loss: tensors do not match grid " + ad::shape_str(grid.shape()));
    }
    const std::size_t s = grid.cells, width = grid.cell_width(), nb = grid.boxes;
    const double sd = static_cast<double>(s);
    auto p = pred.data();
    auto t = target.data();

    std::vector<double> aligned(p.size(), 0.0);
    std::vector<double> sq_weight(p.size(), 0.0);
    std::vector<std::size_t> wh_index;
    std::vector<double> wh_target;

    auto box_of = [&](const double* rec, std::size_t row, std::size_t col) {
        const double cx = (static_cast<double>(col) + rec[0]) / sd;
        const double cy = (static_cast<double>(row) + rec[1]) / sd;
        return yolo::BBox{cx - rec[2] / 2, cy - rec[3] / 2, cx + rec[2] / 2, cy + rec[3] / 2};
    };

    for (std::size_t row = 0; row < s; ++row) {
        for (std::size_t col = 0; col < s; ++col) {
            const std::size_t base = (row * s + col) * width;
            std::vector<bool> claimed(nb, false);
            bool has_object = false;
            for (std::size_t tb = 0; tb < nb; ++tb) {
                const double* trec = t.data() + base + grid.box_offset(tb);
                if (trec[4] <= 0.0) continue;
                has_object = true;
                const auto tbox = box_of(trec, row, col);
                std::size_t best = nb;
                double best_iou = -1.0;
                for (std::size_t pb = 0; pb < nb; ++pb) {
                    if (claimed[pb]) continue;
                    const double o = yolo::iou(box_of(p.data() + base + grid.box_offset(pb), row, col), tbox);
                    if (o > best_iou) {
                        best_iou = o;
                        best = pb;
                    }
                }
                if (best == nb) continue;
                claimed[best] = true;
                const std::size_t pi = base + grid.box_offset(best);
                for (std::size_t k = 0; k < 5; ++k) aligned[pi + k] = trec[k];
                sq_weight[pi + 0] = w.lambda_coord;
                sq_weight[pi + 1] = w.lambda_coord;
                sq_weight[pi + 4] = 1.0;
                for (std::size_t k = 2; k < 4; ++k) {
                    wh_index.push_back(pi + k);
                    wh_target.push_back(std::sqrt(std::max(0.0, trec[k])));
                }
            }
            for (std::size_t pb = 0; pb < nb; ++pb) {
                if (!claimed[pb]) sq_weight[base + grid.box_offset(pb) + 4] = w.lambda_noobj;
            }
            if (has_object) {
                for (std::size_t k = 0; k < grid.classes; ++k) {
                    const std::size_t i = base + grid.class_offset() + k;
                    aligned[i] = t[i];
                    sq_weight[i] = 1.0;
                }
            }
        }
    }

    const auto shape = pred.shape();
    Tensor sq = ad::square(ad::sub(pred, Tensor(shape, std::move(aligned))));
    Tensor total = ad::sum(ad::mul(sq, Tensor(shape, std::move(sq_weight))));
    if (!wh_index.empty()) {
        const std::size_t n = wh_index.size();
        Tensor roots = ad::sqrt(ad::gather(pred, wh_index, {n}));
        Tensor wh = ad::sum(ad::square(ad::sub(roots, Tensor({n}, std::move(wh_target)))));
        total = ad::add(total, ad::scale(wh, w.lambda_coord));
    }
    return total;
}

Tensor classification_loss(const Tensor& class_norms, std::size_t true_class, const LossWeights& w)
{
    if (class_norms.dim() != 1) throw DimensionError("classification_loss: norms must be rank 1");
    const std::size_t k = class_norms.shape()[0];
    if (true_class >= k) {
        throw ContractError("classification_loss: class " + std::to_string(true_class) + " out of range [0, " +
                            std::to_string(k) + ")");
    }
    for (double v : class_norms.data()) {
        if (!(v >= 0.0 && v <= 1.0)) throw ContractError("classification_loss: capsule norms must lie in [0,1)");
    }
    std::vector<double> present(k, 0.0);
    std::vector<double> absent(k, w.margin_lambda);
    present[true_class] = 1.0;
    absent[true_class] = 0.0;
    Tensor pos = ad::square(ad::relu(ad::add_scalar(ad::scale(class_norms, -1.0), w.m_plus)));
    Tensor neg = ad::square(ad::relu(ad::add_scalar(class_norms, -w.m_minus)));
    return ad::add(ad::sum(ad::mul(pos, Tensor({k}, std::move(present)))),
                   ad::sum(ad::mul(neg, Tensor({k}, std::move(absent)))));
}

Tensor reconstruction_loss(const Tensor& reconstructed, const Tensor& original)
{
    if (reconstructed.shape() != original.shape()) {
        throw DimensionError("reconstruction_loss: " + ad::shape_str(reconstructed.shape()) + " vs " +
                             ad::shape_str(original.shape()));
    }
    return ad::sum(ad::square(ad::sub(reconstructed, original)));
}

LossBreakdown composite_loss(const Tensor& localization, const Tensor& classification,
                             const Tensor& reconstruction, const LossWeights& w)
{
    w.validate();
    LossBreakdown out;
    out.localization = localization.item();
    out.classification = classification.item();
    out.reconstruction = reconstruction.item();
    out.w_localization = w.localization;
    out.w_classification = w.classification;
    out.w_reconstruction = w.reconstruction;
    out.total_tensor = ad::add(ad::add(ad::scale(localization, w.localization),
                                       ad::scale(classification, w.classification)),
                               ad::scale(reconstruction, w.reconstruction));
    out.total = out.total_tensor.item();
    return out;
}

}  // namespace capsyolo::loss
