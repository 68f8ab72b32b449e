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

#include "ad/tensor.hpp"

#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "common/errors.hpp"

namespace capsyolo::ad {

namespace {
thread_local bool t_grad_enabled = true;
}

bool grad_enabled()
{
    return t_grad_enabled;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled)
{
    t_grad_enabled = false;
}

NoGradGuard::~NoGradGuard()
{
    t_grad_enabled = previous_;
}

std::size_t numel(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>())
{
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
    if (ad::numel(shape) != data.size()) {
        throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(ad::numel(shape)) +
                             " values, got " + std::to_string(data.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
    auto n = ad::numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
    auto n = ad::numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
    return Tensor({1}, {value}, requires_grad);
}

detail::TensorImpl& Tensor::impl() const
{
    if (!impl_) throw ContractError("use of an undefined tensor");
    return *impl_;
}

const Shape& Tensor::shape() const
{
    return impl().shape;
}

std::size_t Tensor::numel() const
{
    return impl().data.size();
}

std::span<const double> Tensor::data() const
{
    return impl().data;
}

std::span<double> Tensor::mutable_data()
{
    auto& im = impl();
    if (im.grad_fn) throw ContractError("in-place write to a non-leaf tensor");
    return im.data;
}

double Tensor::item() const
{
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return impl().data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const
{
    const auto& s = shape();
    if (index.size() != s.size()) throw DimensionError("index rank mismatch for " + shape_str(s));
    std::size_t flat = 0;
    std::size_t k = 0;
    for (auto i : index) {
        if (i >= s[k]) throw DimensionError("index out of range for " + shape_str(s));
        flat = flat * s[k] + i;
        ++k;
    }
    return impl().data[flat];
}

bool Tensor::requires_grad() const
{
    return impl().requires_grad;
}

void Tensor::set_requires_grad(bool on)
{
    auto& im = impl();
    if (im.grad_fn && !on) throw ContractError("cannot clear requires_grad on a recorded result");
    im.requires_grad = on;
}

bool Tensor::is_leaf() const
{
    return impl().grad_fn == nullptr;
}

std::span<const double> Tensor::grad() const
{
    return impl().grad;
}

bool Tensor::has_grad() const
{
    return !impl().grad.empty();
}

void Tensor::zero_grad()
{
    impl().grad.clear();
}

Tensor Tensor::detach() const
{
    return Tensor(shape(), impl().data, false);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                           BackwardFn backward)
{
    Tensor out(std::move(shape), std::move(data), false);
    if (!t_grad_enabled) return out;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) return out;
    auto node = std::make_shared<detail::Node>();
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    out.impl_->requires_grad = true;
    out.impl_->grad_fn = std::move(node);
    return out;
}

void Tensor::backward() const
{
    auto& root = impl();
    if (root.data.size() != 1) {
        throw ContractError("backward() requires a scalar, got shape " + shape_str(root.shape));
    }
    if (!root.requires_grad) throw ContractError("backward() on a tensor that does not require grad");

    if (!root.grad_fn) {
        if (root.grad.empty()) root.grad.assign(1, 0.0);
        root.grad[0] += 1.0;
        return;
    }

    // Iterative post-order DFS gives a topological order of recorded results.
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> visited;
    std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
    stack.emplace_back(&root, 0);
    visited.insert(&root);
    while (!stack.empty()) {
        auto& [t, next] = stack.back();
        auto& node = *t->grad_fn;
        if (node.consumed) {
            throw ContractError("backward() through a graph that was already consumed; "
                                "re-run the forward pass before differentiating again");
        }
        if (next < node.inputs.size()) {
            auto* child = node.inputs[next].impl_.get();
            ++next;
            if (child->grad_fn && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(t);
            stack.pop_back();
        }
    }

    std::unordered_map<detail::TensorImpl*, std::vector<double>> pending;
    pending[&root] = {1.0};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorImpl* t = *it;
        auto& node = *t->grad_fn;
        auto found = pending.find(t);
        if (found == pending.end()) continue;
        std::vector<double> grad_out = std::move(found->second);
        pending.erase(found);

        std::vector<std::vector<double>> grad_in(node.inputs.size());
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            const auto& in = *node.inputs[k].impl_;
            if (in.requires_grad) grad_in[k].assign(in.data.size(), 0.0);
        }
        node.backward(grad_out, grad_in);

        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            if (grad_in[k].empty()) continue;
            auto* in = node.inputs[k].impl_.get();
            std::vector<double>& dst = in->grad_fn ? pending[in] : in->grad;
            if (dst.empty()) {
                dst = std::move(grad_in[k]);
            } else {
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += grad_in[k][i];
            }
        }
    }

    for (auto* t : order) {
        t->grad_fn->consumed = true;
        t->grad_fn->backward = nullptr;
        t->grad_fn->inputs.clear();
    }
}

}  // namespace capsyolo::ad
