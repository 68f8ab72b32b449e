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
#include <vector>

#include "ad/tensor.hpp"
#include "common/rng.hpp"

namespace capsyolo::capsnet {

using ad::Shape;
using ad::Tensor;

// Added under the square root when normalizing, so squash(0) = 0.
inline constexpr double kSquashEps = 1e-9;

struct CapsuleLayerConfig {
    std::size_t num_capsules = 0;
    std::size_t capsule_dim = 8;
    std::size_t routing_iterations = 3;

    void validate() const;
};

// Snapshot of one routing pass. Index conventions: i runs over lower
// capsules, j over higher capsules.
struct CapsuleState {
    Tensor lower_poses;           // [N_low, D_low], undefined when routing was called directly
    Tensor predictions;           // u_hat [N_low, N_high, D_high]
    Tensor routing_logits;        // b [N_low, N_high] after the last update
    Tensor coupling;              // c [N_low, N_high] used in the last iteration
    Tensor higher_poses;          // v [N_high, D_high]
    std::vector<std::vector<double>> coupling_history;  // c values of every iteration
};

// v = (|s|^2 / (1 + |s|^2)) * s / |s|, applied along the last axis.
Tensor squash(const Tensor& s);

// u_hat[i,j,:] = W[i,j] * u[i]. u [N,Dl], W [N,J,Dh,Dl] -> [N,J,Dh].
Tensor capsule_predictions(const Tensor& poses, const Tensor& transforms);

// s[j,:] = sum_i c[i,j] * u_hat[i,j,:]. c [N,J], u_hat [N,J,D] -> [J,D].
Tensor route_weighted_sum(const Tensor& coupling, const Tensor& predictions);

// a[i,j] = <u_hat[i,j,:], v[j,:]>. u_hat [N,J,D], v [J,D] -> [N,J].
Tensor route_agreement(const Tensor& predictions, const Tensor& poses);

// Routing by agreement with logits starting at zero. Differentiable through
// every iteration.
CapsuleState route(const Tensor& predictions, std::size_t iterations);

// Regroups backbone channels into pose vectors and squashes them. Capsule
// (g, y, x) takes channels [g*D, (g+1)*D) at pixel (y, x), so
// N_low = C*H*W / D.
Tensor primary_capsules(const Tensor& features, std::size_t capsule_dim);
Tensor primary_capsules(const Tensor& features, const CapsuleLayerConfig& config);

CapsuleState class_capsules_state(const Tensor& primary, const Tensor& transforms, std::size_t iterations);
Tensor class_capsules(const Tensor& primary, const Tensor& transforms, std::size_t iterations);

struct DenseLayer {
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]
};

// Fully connected decoder: ReLU between layers, sigmoid at the end, output
// reshaped to `image_shape`.
struct Decoder {
    std::vector<DenseLayer> layers;
    Shape image_shape;  // [C,H,W]
};

Decoder make_decoder(std::size_t num_classes, std::size_t pose_dim, const std::vector<std::size_t>& hidden,
                     const Shape& image_shape, Rng& rng);

// Zeroes every pose except `target_class`.
Tensor mask_poses(const Tensor& class_poses, std::size_t target_class);

Tensor reconstruct(const Tensor& class_poses, std::size_t target_class, const Decoder& decoder);

}  // namespace capsyolo::capsnet
