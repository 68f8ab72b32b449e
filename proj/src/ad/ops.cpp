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

#include "ad/ops.hpp"

#include <algorithm>
#include <cmath>

#include "common/errors.hpp"

namespace capsyolo::ad {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

std::vector<double> copy_of(const Tensor& t)
{
    auto d = t.data();
    return {d.begin(), d.end()};
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df)
{
    auto x = copy_of(a);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    auto yc = y;
    return Tensor::make_result(a.shape(), std::move(y), {a},
                               [x = std::move(x), yc = std::move(yc), df](auto g, auto gin) {
                                   for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * df(x[i], yc[i]);
                               });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "add");
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](auto g, auto gin) {
        for (auto& buf : gin) {
            if (buf.empty()) continue;
            for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "sub");
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](auto g, auto gin) {
        if (!gin[0].empty())
            for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
        if (!gin[1].empty())
            for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] -= g[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "mul");
    auto xa = copy_of(a);
    auto xb = copy_of(b);
    std::vector<double> out(xa.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] * xb[i];
    return Tensor::make_result(a.shape(), std::move(out), {a, b},
                               [xa = std::move(xa), xb = std::move(xb)](auto g, auto gin) {
                                   if (!gin[0].empty())
                                       for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * xb[i];
                                   if (!gin[1].empty())
                                       for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] += g[i] * xa[i];
                               });
}

Tensor scale(const Tensor& a, double factor)
{
    auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](auto g, auto gin) {
        for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * factor;
    });
}

Tensor add_scalar(const Tensor& a, double value)
{
    auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + value;
    return Tensor::make_result(a.shape(), std::move(out), {a}, [](auto g, auto gin) {
        for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
    });
}

Tensor square(const Tensor& a)
{
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a)
{
    for (double v : a.data()) {
        if (v < 0.0) throw ContractError("sqrt of a negative value");
    }
    return unary(
        a, [](double x) { return std::sqrt(x); },
        [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor relu(const Tensor& a)
{
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a)
{
    return unary(
        a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor sum(const Tensor& a)
{
    double s = 0.0;
    for (double v : a.data()) s += v;
    return Tensor::make_result({1}, {s}, {a}, [](auto g, auto gin) {
        for (auto& v : gin[0]) v += g[0];
    });
}

Tensor sum_last(const Tensor& a)
{
    const auto& s = a.shape();
    const std::size_t k = s.back();
    Shape out_shape(s.begin(), s.end() - 1);
    if (out_shape.empty()) out_shape = {1};
    const std::size_t rows = a.numel() / k;
    auto x = a.data();
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < k; ++j) out[r] += x[r * k + j];
    return Tensor::make_result(std::move(out_shape), std::move(out), {a}, [k, rows](auto g, auto gin) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < k; ++j) gin[0][r * k + j] += g[r];
    });
}

Tensor norm_last(const Tensor& a, double eps)
{
    const auto& s = a.shape();
    const std::size_t k = s.back();
    Shape out_shape(s.begin(), s.end() - 1);
    if (out_shape.empty()) out_shape = {1};
    const std::size_t rows = a.numel() / k;
    auto x = copy_of(a);
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double q = 0.0;
        for (std::size_t j = 0; j < k; ++j) q += x[r * k + j] * x[r * k + j];
        out[r] = std::sqrt(q + eps);
    }
    auto norms = out;
    return Tensor::make_result(std::move(out_shape), std::move(out), {a},
                               [k, rows, x = std::move(x), norms = std::move(norms)](auto g, auto gin) {
                                   for (std::size_t r = 0; r < rows; ++r) {
                                       if (norms[r] <= 0.0) continue;
                                       const double f = g[r] / norms[r];
                                       for (std::size_t j = 0; j < k; ++j) gin[0][r * k + j] += f * x[r * k + j];
                                   }
                               });
}

Tensor reshape(const Tensor& a, Shape shape)
{
    if (ad::numel(shape) != a.numel()) {
        throw DimensionError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    return Tensor::make_result(std::move(shape), copy_of(a), {a}, [](auto g, auto gin) {
        for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
    });
}

Tensor flatten(const Tensor& a)
{
    return reshape(a, {a.numel()});
}

Tensor concat(const std::vector<Tensor>& parts)
{
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    std::vector<double> out;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
        auto d = p.data();
        out.insert(out.end(), d.begin(), d.end());
        sizes.push_back(d.size());
    }
    const std::size_t n = out.size();
    return Tensor::make_result({n}, std::move(out), parts, [sizes = std::move(sizes)](auto g, auto gin) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            if (!gin[k].empty())
                for (std::size_t i = 0; i < sizes[k]; ++i) gin[k][i] += g[off + i];
            off += sizes[k];
        }
    });
}

Tensor gather(const Tensor& a, const std::vector<std::size_t>& index, Shape shape)
{
    if (ad::numel(shape) != index.size()) {
        throw DimensionError("gather: index count does not match shape " + shape_str(shape));
    }
    auto x = a.data();
    std::vector<double> out(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= x.size()) throw DimensionError("gather: index out of range");
        out[i] = x[index[i]];
    }
    return Tensor::make_result(std::move(shape), std::move(out), {a}, [index](auto g, auto gin) {
        for (std::size_t i = 0; i < index.size(); ++i) gin[0][index[i]] += g[i];
    });
}

Tensor softmax(const Tensor& a, std::size_t axis)
{
    const auto& s = a.shape();
    if (axis >= s.size()) throw DimensionError("softmax: axis out of range for " + shape_str(s));
    const std::size_t len = s[axis];
    std::size_t outer = 1;
    std::size_t inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];

    auto x = a.data();
    std::vector<double> y(x.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double m = x[base];
            for (std::size_t j = 1; j < len; ++j) m = std::max(m, x[base + j * inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                y[base + j * inner] = std::exp(x[base + j * inner] - m);
                z += y[base + j * inner];
            }
            for (std::size_t j = 0; j < len; ++j) y[base + j * inner] /= z;
        }
    }
    auto yc = y;
    return Tensor::make_result(s, std::move(y), {a}, [yc = std::move(yc), len, outer, inner](auto g, auto gin) {
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                double dot = 0.0;
                for (std::size_t j = 0; j < len; ++j) dot += g[base + j * inner] * yc[base + j * inner];
                for (std::size_t j = 0; j < len; ++j) {
                    const std::size_t i = base + j * inner;
                    gin[0][i] += yc[i] * (g[i] - dot);
                }
            }
        }
    });
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias)
{
    if (input.dim() != 1 || weights.dim() != 2 || bias.dim() != 1) {
        throw DimensionError("dense: expects input [N], weights [M,N], bias [M]");
    }
    const std::size_t m = weights.shape()[0];
    const std::size_t n = weights.shape()[1];
    if (input.shape()[0] != n || bias.shape()[0] != m) {
        throw DimensionError("dense: input " + shape_str(input.shape()) + ", weights " +
                             shape_str(weights.shape()) + ", bias " + shape_str(bias.shape()));
    }
    auto x = copy_of(input);
    auto w = copy_of(weights);
    auto b = bias.data();
    std::vector<double> out(m);
    for (std::size_t r = 0; r < m; ++r) {
        double acc = b[r];
        const double* row = w.data() + r * n;
        for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
    return Tensor::make_result({m}, std::move(out), {input, weights, bias},
                               [x = std::move(x), w = std::move(w), m, n](auto g, auto gin) {
                                   if (!gin[0].empty()) {
                                       for (std::size_t r = 0; r < m; ++r) {
                                           const double* row = w.data() + r * n;
                                           for (std::size_t c = 0; c < n; ++c) gin[0][c] += g[r] * row[c];
                                       }
                                   }
                                   if (!gin[1].empty()) {
                                       for (std::size_t r = 0; r < m; ++r) {
                                           double* row = gin[1].data() + r * n;
                                           for (std::size_t c = 0; c < n; ++c) row[c] += g[r] * x[c];
                                       }
                                   }
                                   if (!gin[2].empty())
                                       for (std::size_t r = 0; r < m; ++r) gin[2][r] += g[r];
                               });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride, std::size_t padding)
{
    if (input.dim() != 3 || kernels.dim() != 4) {
        throw DimensionError("conv2d: expects input [C,H,W] and kernels [O,C,kH,kW]");
    }
    if (stride == 0) throw ContractError("conv2d: stride must be positive");
    const std::size_t cin = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
    const std::size_t cout = kernels.shape()[0], kh = kernels.shape()[2], kw = kernels.shape()[3];
    if (kernels.shape()[1] != cin) {
        throw DimensionError("conv2d: input has " + std::to_string(cin) + " channels, kernels expect " +
                             std::to_string(kernels.shape()[1]));
    }
    if (kh > h + 2 * padding || kw > w + 2 * padding) {
        throw DimensionError("conv2d: kernel larger than padded input");
    }
    const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
    const std::size_t ow = (w + 2 * padding - kw) / stride + 1;
    const auto pad = static_cast<std::ptrdiff_t>(padding);

    auto x = copy_of(input);
    auto k = copy_of(kernels);
    std::vector<double> out(cout * oh * ow, 0.0);

    // Visits every (output, input, weight) triple once; shared by forward and
    // both backward products.
    auto for_each_tap = [=](auto&& fn) {
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t c = 0; c < cin; ++c)
                for (std::size_t ky = 0; ky < kh; ++ky)
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::size_t widx = ((o * cin + c) * kh + ky) * kw + kx;
                        for (std::size_t y = 0; y < oh; ++y) {
                            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) - pad;
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                            const std::size_t obase = (o * oh + y) * ow;
                            const std::size_t ibase = (c * h + static_cast<std::size_t>(iy)) * w;
                            for (std::size_t xo = 0; xo < ow; ++xo) {
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(xo * stride + kx) - pad;
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                fn(obase + xo, ibase + static_cast<std::size_t>(ix), widx);
                            }
                        }
                    }
    };

    for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) { out[oi] += k[wi] * x[ii]; });

    return Tensor::make_result({cout, oh, ow}, std::move(out), {input, kernels},
                               [x = std::move(x), k = std::move(k), for_each_tap](auto g, auto gin) {
                                   auto& gx = gin[0];
                                   auto& gk = gin[1];
                                   if (!gx.empty() && !gk.empty()) {
                                       for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) {
                                           gx[ii] += k[wi] * g[oi];
                                           gk[wi] += x[ii] * g[oi];
                                       });
                                   } else if (!gx.empty()) {
                                       for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) {
                                           gx[ii] += k[wi] * g[oi];
                                       });
                                   } else if (!gk.empty()) {
                                       for_each_tap([&](std::size_t oi, std::size_t ii, std::size_t wi) {
                                           gk[wi] += x[ii] * g[oi];
                                       });
                                   }
                               });
}

Tensor add_channel_bias(const Tensor& input, const Tensor& bias)
{
    if (input.dim() != 3 || bias.dim() != 1 || bias.shape()[0] != input.shape()[0]) {
        throw DimensionError("add_channel_bias: input " + shape_str(input.shape()) + ", bias " +
                             shape_str(bias.shape()));
    }
    const std::size_t c = input.shape()[0];
    const std::size_t plane = input.shape()[1] * input.shape()[2];
    auto x = input.data();
    auto b = bias.data();
    std::vector<double> out(x.size());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = x[ch * plane + i] + b[ch];
    return Tensor::make_result(input.shape(), std::move(out), {input, bias}, [c, plane](auto g, auto gin) {
        if (!gin[0].empty())
            for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
        if (!gin[1].empty())
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < plane; ++i) gin[1][ch] += g[ch * plane + i];
    });
}

Tensor adaptive_avg_pool2d(const Tensor& input, std::size_t out_h, std::size_t out_w)
{
    if (input.dim() != 3) throw DimensionError("adaptive_avg_pool2d: expects [C,H,W]");
    if (out_h == 0 || out_w == 0) throw DimensionError("adaptive_avg_pool2d: empty output grid");
    const std::size_t c = input.shape()[0], h = input.shape()[1], w = input.shape()[2];

    struct Bin {
        std::size_t begin, end;
    };
    auto bins = [](std::size_t in, std::size_t out) {
        std::vector<Bin> b(out);
        for (std::size_t i = 0; i < out; ++i) b[i] = {i * in / out, ((i + 1) * in + out - 1) / out};
        return b;
    };
    auto rows = bins(h, out_h);
    auto cols = bins(w, out_w);

    auto x = input.data();
    std::vector<double> out(c * out_h * out_w, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < out_h; ++i)
            for (std::size_t j = 0; j < out_w; ++j) {
                double acc = 0.0;
                for (std::size_t y = rows[i].begin; y < rows[i].end; ++y)
                    for (std::size_t xx = cols[j].begin; xx < cols[j].end; ++xx) acc += x[(ch * h + y) * w + xx];
                const double area =
                    static_cast<double>((rows[i].end - rows[i].begin) * (cols[j].end - cols[j].begin));
                out[(ch * out_h + i) * out_w + j] = acc / area;
            }
    return Tensor::make_result({c, out_h, out_w}, std::move(out), {input},
                               [=, rows = std::move(rows), cols = std::move(cols)](auto g, auto gin) {
                                   for (std::size_t ch = 0; ch < c; ++ch)
                                       for (std::size_t i = 0; i < out_h; ++i)
                                           for (std::size_t j = 0; j < out_w; ++j) {
                                               const double area = static_cast<double>(
                                                   (rows[i].end - rows[i].begin) * (cols[j].end - cols[j].begin));
                                               const double gv = g[(ch * out_h + i) * out_w + j] / area;
                                               for (std::size_t y = rows[i].begin; y < rows[i].end; ++y)
                                                   for (std::size_t xx = cols[j].begin; xx < cols[j].end; ++xx)
                                                       gin[0][(ch * h + y) * w + xx] += gv;
                                           }
                               });
}

}  // namespace capsyolo::ad
