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

// Differentiable primitives. Every function records its backward rule when
// gradient recording is enabled and any input requires a gradient.
namespace capsyolo::ad {

// Elementwise, shapes must match exactly (no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

// Sum of all elements, shape [1].
Tensor sum(const Tensor& a);
// Sums the last axis away: [..., K] -> [...].
Tensor sum_last(const Tensor& a);
// Euclidean norm over the last axis with eps inside the root:
// sqrt(sum(x^2) + eps). [..., K] -> [...].
Tensor norm_last(const Tensor& a, double eps);

Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);
// Joins flattened inputs into one rank-1 tensor.
Tensor concat(const std::vector<Tensor>& parts);
// out[i] = a[index[i]]; gradient scatters back with accumulation.
Tensor gather(const Tensor& a, const std::vector<std::size_t>& index, Shape shape);

// Numerically stable softmax along `axis`.
Tensor softmax(const Tensor& a, std::size_t axis);

// input [N], weights [M,N], bias [M] -> [M].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

// Cross-correlation. input [Cin,H,W], kernels [Cout,Cin,kH,kW] -> [Cout,H',W'].
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t padding);

// Adds bias[c] to every element of channel c. input [C,H,W], bias [C].
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);

// Average pooling to a fixed output grid; bin edges are floor(i*H/out) and
// ceil((i+1)*H/out). input [C,H,W] -> [C,out_h,out_w].
Tensor adaptive_avg_pool2d(const Tensor& input, std::size_t out_h, std::size_t out_w);

}  // namespace capsyolo::ad
