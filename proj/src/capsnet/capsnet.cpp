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

#include "capsnet/capsnet.hpp"

#include <cmath>

#include "ad/ops.hpp"
#include "common/errors.hpp"

namespace capsyolo::capsnet {

namespace {

std::vector<double> copy_of(const Tensor& t)
{
    auto d = t.data();
    return {d.begin(), d.end()};
}

}  // namespace

void CapsuleLayerConfig::validate() const
{
    if (capsule_dim == 0) throw ConfigError("capsule_dim must be positive");
    if (routing_iterations < 1) throw ConfigError("routing_iterations must be >= 1");
}

Tensor squash(const Tensor& s)
{
    const std::size_t d = s.shape().back();
    const std::size_t rows = s.numel() / d;
    auto x = copy_of(s);
    std::vector<double> out(x.size());
    std::vector<double> q(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < d; ++k) q[r] += x[r * d + k] * x[r * d + k];
        const double n = std::sqrt(q[r] + kSquashEps);
        const double f = q[r] / ((1.0 + q[r]) * n);
        for (std::size_t k = 0; k < d; ++k) out[r * d + k] = f * x[r * d + k];
    }
    return Tensor::make_result(s.shape(), std::move(out), {s},
                               [x = std::move(x), q = std::move(q), d, rows](auto g, auto gin) {
                                   // out = f(q) s with q = |s|^2, so
                                   // ds = f g + 2 f'(q) (g . s) s.
                                   for (std::size_t r = 0; r < rows; ++r) {
                                       const double qe = q[r] + kSquashEps;
                                       const double n = std::sqrt(qe);
                                       const double f = q[r] / ((1.0 + q[r]) * n);
                                       const double fp =
                                           (n - q[r] * (1.0 + q[r]) / (2.0 * n)) / ((1.0 + q[r]) * (1.0 + q[r]) * qe);
                                       double gs = 0.0;
                                       for (std::size_t k = 0; k < d; ++k) gs += g[r * d + k] * x[r * d + k];
                                       for (std::size_t k = 0; k < d; ++k)
                                           gin[0][r * d + k] += f * g[r * d + k] + 2.0 * fp * gs * x[r * d + k];
                                   }
                               });
}

Tensor capsule_predictions(const Tensor& poses, const Tensor& transforms)
{
    if (poses.dim() != 2 || transforms.dim() != 4 || transforms.shape()[0] != poses.shape()[0] ||
        transforms.shape()[3] != poses.shape()[1]) {
        throw DimensionError("capsule_predictions: poses " + ad::shape_str(poses.shape()) + " vs transforms " +
                             ad::shape_str(transforms.shape()));
    }
    const std::size_t n = transforms.shape()[0], j = transforms.shape()[1];
    const std::size_t dh = transforms.shape()[2], dl = transforms.shape()[3];
    auto u = copy_of(poses);
    auto w = copy_of(transforms);
    std::vector<double> out(n * j * dh, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = 0; jj < j; ++jj)
            for (std::size_t a = 0; a < dh; ++a) {
                const double* row = w.data() + ((i * j + jj) * dh + a) * dl;
                double acc = 0.0;
                for (std::size_t b = 0; b < dl; ++b) acc += row[b] * u[i * dl + b];
                out[(i * j + jj) * dh + a] = acc;
            }
    return Tensor::make_result({n, j, dh}, std::move(out), {poses, transforms},
                               [u = std::move(u), w = std::move(w), n, j, dh, dl](auto g, auto gin) {
                                   for (std::size_t i = 0; i < n; ++i)
                                       for (std::size_t jj = 0; jj < j; ++jj)
                                           for (std::size_t a = 0; a < dh; ++a) {
                                               const double go = g[(i * j + jj) * dh + a];
                                               const std::size_t wrow = ((i * j + jj) * dh + a) * dl;
                                               if (!gin[0].empty())
                                                   for (std::size_t b = 0; b < dl; ++b)
                                                       gin[0][i * dl + b] += w[wrow + b] * go;
                                               if (!gin[1].empty())
                                                   for (std::size_t b = 0; b < dl; ++b)
                                                       gin[1][wrow + b] += u[i * dl + b] * go;
                                           }
                               });
}

Tensor route_weighted_sum(const Tensor& coupling, const Tensor& predictions)
{
    if (coupling.dim() != 2 || predictions.dim() != 3 || coupling.shape()[0] != predictions.shape()[0] ||
        coupling.shape()[1] != predictions.shape()[1]) {
        throw DimensionError("route_weighted_sum: coupling " + ad::shape_str(coupling.shape()) +
                             " vs predictions " + ad::shape_str(predictions.shape()));
    }
    const std::size_t n = predictions.shape()[0], j = predictions.shape()[1], d = predictions.shape()[2];
    auto c = copy_of(coupling);
    auto u = copy_of(predictions);
    std::vector<double> out(j * d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = 0; jj < j; ++jj)
            for (std::size_t k = 0; k < d; ++k) out[jj * d + k] += c[i * j + jj] * u[(i * j + jj) * d + k];
    return Tensor::make_result({j, d}, std::move(out), {coupling, predictions},
                               [c = std::move(c), u = std::move(u), n, j, d](auto g, auto gin) {
                                   for (std::size_t i = 0; i < n; ++i)
                                       for (std::size_t jj = 0; jj < j; ++jj)
                                           for (std::size_t k = 0; k < d; ++k) {
                                               const std::size_t ui = (i * j + jj) * d + k;
                                               if (!gin[0].empty()) gin[0][i * j + jj] += g[jj * d + k] * u[ui];
                                               if (!gin[1].empty()) gin[1][ui] += c[i * j + jj] * g[jj * d + k];
                                           }
                               });
}

Tensor route_agreement(const Tensor& predictions, const Tensor& poses)
{
    if (predictions.dim() != 3 || poses.dim() != 2 || predictions.shape()[1] != poses.shape()[0] ||
        predictions.shape()[2] != poses.shape()[1]) {
        throw DimensionError("route_agreement: predictions " + ad::shape_str(predictions.shape()) + " vs poses " +
                             ad::shape_str(poses.shape()));
    }
    const std::size_t n = predictions.shape()[0], j = predictions.shape()[1], d = predictions.shape()[2];
    auto u = copy_of(predictions);
    auto v = copy_of(poses);
    std::vector<double> out(n * j, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = 0; jj < j; ++jj)
            for (std::size_t k = 0; k < d; ++k) out[i * j + jj] += u[(i * j + jj) * d + k] * v[jj * d + k];
    return Tensor::make_result({n, j}, std::move(out), {predictions, poses},
                               [u = std::move(u), v = std::move(v), n, j, d](auto g, auto gin) {
                                   for (std::size_t i = 0; i < n; ++i)
                                       for (std::size_t jj = 0; jj < j; ++jj)
                                           for (std::size_t k = 0; k < d; ++k) {
                                               const std::size_t ui = (i * j + jj) * d + k;
                                               if (!gin[0].empty()) gin[0][ui] += g[i * j + jj] * v[jj * d + k];
                                               if (!gin[1].empty()) gin[1][jj * d + k] += g[i * j + jj] * u[ui];
                                           }
                               });
}

CapsuleState route(const Tensor& predictions, std::size_t iterations)
{
    if (iterations < 1) throw ContractError("route: iterations must be >= 1");
    if (predictions.dim() != 3) throw DimensionError("route: predictions must be [N_low, N_high, D]");
    const std::size_t n = predictions.shape()[0], j = predictions.shape()[1];

    CapsuleState state;
    state.predictions = predictions;
    Tensor logits = Tensor::zeros({n, j});
    for (std::size_t it = 0; it < iterations; ++it) {
        Tensor c = ad::softmax(logits, 1);
        Tensor v = squash(route_weighted_sum(c, predictions));
        logits = ad::add(logits, route_agreement(predictions, v));
        state.coupling_history.emplace_back(c.data().begin(), c.data().end());
        state.coupling = c;
        state.higher_poses = v;
    }
    state.routing_logits = logits;
    return state;
}

Tensor primary_capsules(const Tensor& features, std::size_t capsule_dim)
{
    if (features.dim() != 3) throw DimensionError("primary_capsules: features must be [C,H,W]");
    if (capsule_dim == 0) throw ConfigError("primary_capsules: capsule_dim must be positive");
    const std::size_t c = features.shape()[0], h = features.shape()[1], w = features.shape()[2];
    if (c % capsule_dim != 0) {
        throw ConfigError("primary_capsules: " + std::to_string(c) + " channels not divisible by capsule_dim " +
                          std::to_string(capsule_dim));
    }
    const std::size_t groups = c / capsule_dim;
    const std::size_t count = groups * h * w;
    std::vector<std::size_t> index(count * capsule_dim);
    for (std::size_t g = 0; g < groups; ++g)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t cap = (g * h + y) * w + x;
                for (std::size_t k = 0; k < capsule_dim; ++k)
                    index[cap * capsule_dim + k] = ((g * capsule_dim + k) * h + y) * w + x;
            }
    return squash(ad::gather(features, index, {count, capsule_dim}));
}

Tensor primary_capsules(const Tensor& features, const CapsuleLayerConfig& config)
{
    config.validate();
    Tensor out = primary_capsules(features, config.capsule_dim);
    if (config.num_capsules != 0 && config.num_capsules != out.shape()[0]) {
        throw ConfigError("primary_capsules: features yield " + std::to_string(out.shape()[0]) +
                          " capsules, config expects " + std::to_string(config.num_capsules));
    }
    return out;
}

CapsuleState class_capsules_state(const Tensor& primary, const Tensor& transforms, std::size_t iterations)
{
    CapsuleState state = route(capsule_predictions(primary, transforms), iterations);
    state.lower_poses = primary;
    return state;
}

Tensor class_capsules(const Tensor& primary, const Tensor& transforms, std::size_t iterations)
{
    return class_capsules_state(primary, transforms, iterations).higher_poses;
}

Decoder make_decoder(std::size_t num_classes, std::size_t pose_dim, const std::vector<std::size_t>& hidden,
                     const Shape& image_shape, Rng& rng)
{
    if (image_shape.size() != 3) throw ConfigError("decoder image shape must be [C,H,W]");
    Decoder dec;
    dec.image_shape = image_shape;
    std::vector<std::size_t> widths{num_classes * pose_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(ad::numel(image_shape));
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        const double sd = std::sqrt(2.0 / static_cast<double>(in));
        std::vector<double> w(in * out);
        for (auto& v : w) v = rng.normal() * sd;
        dec.layers.push_back({Tensor({out, in}, std::move(w), true), Tensor::zeros({out}, true)});
    }
    return dec;
}

Tensor mask_poses(const Tensor& class_poses, std::size_t target_class)
{
    if (class_poses.dim() != 2) throw DimensionError("mask_poses: class poses must be [N_high, D_high]");
    const std::size_t k = class_poses.shape()[0], d = class_poses.shape()[1];
    if (target_class >= k) {
        throw ContractError("target class " + std::to_string(target_class) + " out of range [0, " +
                            std::to_string(k) + ")");
    }
    std::vector<double> mask(k * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) mask[target_class * d + i] = 1.0;
    return ad::mul(class_poses, Tensor({k, d}, std::move(mask)));
}

Tensor reconstruct(const Tensor& class_poses, std::size_t target_class, const Decoder& decoder)
{
    if (decoder.layers.empty()) throw ConfigError("decoder has no layers");
    Tensor h = ad::flatten(mask_poses(class_poses, target_class));
    for (std::size_t l = 0; l < decoder.layers.size(); ++l) {
        h = ad::dense(h, decoder.layers[l].weights, decoder.layers[l].bias);
        h = (l + 1 < decoder.layers.size()) ? ad::relu(h) : ad::sigmoid(h);
    }
    return ad::reshape(h, decoder.image_shape);
}

}  // namespace capsyolo::capsnet
