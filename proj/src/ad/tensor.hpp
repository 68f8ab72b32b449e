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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace capsyolo::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {
struct Node;

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a backward pass reaches this tensor
    bool requires_grad = false;
    std::shared_ptr<Node> grad_fn;
};
}  // namespace detail

// Backward rule of a recorded primitive: receives d(loss)/d(output) and one
// gradient buffer per input. Buffers for inputs that do not require a
// gradient are left empty and must be skipped.
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<std::vector<double>> grad_in)>;

// Dense row-major array of doubles with reverse-mode gradient support.
//
// Tensor is a cheap handle: copies share storage. Values are treated as
// immutable once a tensor has been used as an input of a recorded primitive;
// the only sanctioned in-place write is a parameter update on a leaf via
// mutable_data().
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim() const { return shape().size(); }
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool is_leaf() const;

    // Gradient accumulated by backward(). Empty span when none was recorded.
    std::span<const double> grad() const;
    bool has_grad() const;
    void zero_grad();

    // Copy of the values with no graph attached.
    Tensor detach() const;

    // Runs reverse-mode differentiation from this scalar. Gradients accumulate
    // into leaf tensors; the recorded graph is consumed, so a second call
    // through the same graph throws ContractError.
    void backward() const;

    // Identity of the underlying storage (two handles to the same tensor
    // compare equal).
    const void* id() const { return impl_.get(); }

    // Builds the output of a primitive. When gradient recording is enabled and
    // any input requires a gradient, the output records `backward`.
    static Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                              BackwardFn backward);

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
    detail::TensorImpl& impl() const;

    std::shared_ptr<detail::TensorImpl> impl_;
    friend struct detail::Node;
};

namespace detail {
struct Node {
    std::vector<Tensor> inputs;
    BackwardFn backward;
    bool consumed = false;
};
}  // namespace detail

// Disables graph recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

}  // namespace capsyolo::ad
