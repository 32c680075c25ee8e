// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace uapforge::autodiff {

const char* op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::add_broadcast: return "add_broadcast";
        case Op::matmul: return "matmul";
        case Op::conv2d: return "conv2d";
        case Op::bias_add: return "bias_add";
        case Op::relu: return "relu";
        case Op::maxpool2: return "maxpool2";
        case Op::flatten: return "flatten";
        case Op::normalize: return "normalize";
        case Op::softmax_ce: return "softmax_cross_entropy";
        case Op::weighted_sum: return "weighted_sum";
    }
    return "unknown";
}

namespace {

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
    throw ShapeError(std::string(op) + ": " + detail);
}

struct ConvGeom {
    std::size_t n, c, h, w, o, k, pad, oh, ow;
};

template <Real T>
ConvGeom conv_geom(const Tensor<T>& x, const Tensor<T>& w, std::size_t pad) {
    if (x.rank() != 4) shape_fail("conv2d", "input must be [N,C,H,W], got " + shape_str(x.shape()));
    if (w.rank() != 4 || w.dim(2) != w.dim(3)) {
        shape_fail("conv2d", "weight must be [O,C,k,k], got " + shape_str(w.shape()));
    }
    if (w.dim(1) != x.dim(1)) {
        shape_fail("conv2d", "channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    }
    ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), pad, 0, 0};
    if (g.h + 2 * pad < g.k || g.w + 2 * pad < g.k) {
        shape_fail("conv2d", "kernel larger than padded input");
    }
    g.oh = g.h + 2 * pad - g.k + 1;
    g.ow = g.w + 2 * pad - g.k + 1;
    return g;
}

// For kernel offset `kk`, output positions `o` with 0 <= o + kk - pad < extent.
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t kk, std::size_t pad, std::size_t extent,
                                                       std::size_t out_extent) {
    const std::size_t lo = pad > kk ? pad - kk : 0;
    const std::size_t hi = std::min(out_extent, extent + pad - kk);
    return {lo, std::max(lo, hi)};
}

template <Real T>
void conv_forward(const ConvGeom& g, const T* x, const T* w, T* y) {
    const std::size_t in_plane = g.h * g.w;
    const std::size_t out_plane = g.oh * g.ow;
    for (std::size_t n = 0; n < g.n; ++n) {
        for (std::size_t o = 0; o < g.o; ++o) {
            T* yp = y + (n * g.o + o) * out_plane;
            for (std::size_t c = 0; c < g.c; ++c) {
                const T* xp = x + (n * g.c + c) * in_plane;
                const T* wp = w + (o * g.c + c) * g.k * g.k;
                for (std::size_t ki = 0; ki < g.k; ++ki) {
                    const auto [y0, y1] = valid_range(ki, g.pad, g.h, g.oh);
                    for (std::size_t kj = 0; kj < g.k; ++kj) {
                        const T wv = wp[ki * g.k + kj];
                        const auto [x0, x1] = valid_range(kj, g.pad, g.w, g.ow);
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            const T* xr = xp + (oy + ki - g.pad) * g.w;
                            T* yr = yp + oy * g.ow;
                            for (std::size_t ox = x0; ox < x1; ++ox) yr[ox] += wv * xr[ox + kj - g.pad];
                        }
                    }
                }
            }
        }
    }
}

template <Real T>
void conv_backward_input(const ConvGeom& g, const T* gy, const T* w, T* gx) {
    const std::size_t in_plane = g.h * g.w;
    const std::size_t out_plane = g.oh * g.ow;
    for (std::size_t n = 0; n < g.n; ++n) {
        for (std::size_t o = 0; o < g.o; ++o) {
            const T* gp = gy + (n * g.o + o) * out_plane;
            for (std::size_t c = 0; c < g.c; ++c) {
                T* gxp = gx + (n * g.c + c) * in_plane;
                const T* wp = w + (o * g.c + c) * g.k * g.k;
                for (std::size_t ki = 0; ki < g.k; ++ki) {
                    const auto [y0, y1] = valid_range(ki, g.pad, g.h, g.oh);
                    for (std::size_t kj = 0; kj < g.k; ++kj) {
                        const T wv = wp[ki * g.k + kj];
                        const auto [x0, x1] = valid_range(kj, g.pad, g.w, g.ow);
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            T* xr = gxp + (oy + ki - g.pad) * g.w;
                            const T* gr = gp + oy * g.ow;
                            for (std::size_t ox = x0; ox < x1; ++ox) xr[ox + kj - g.pad] += wv * gr[ox];
                        }
                    }
                }
            }
        }
    }
}

template <Real T>
void conv_backward_weight(const ConvGeom& g, const T* gy, const T* x, T* gw) {
    const std::size_t in_plane = g.h * g.w;
    const std::size_t out_plane = g.oh * g.ow;
    for (std::size_t n = 0; n < g.n; ++n) {
        for (std::size_t o = 0; o < g.o; ++o) {
            const T* gp = gy + (n * g.o + o) * out_plane;
            for (std::size_t c = 0; c < g.c; ++c) {
                const T* xp = x + (n * g.c + c) * in_plane;
                T* wp = gw + (o * g.c + c) * g.k * g.k;
                for (std::size_t ki = 0; ki < g.k; ++ki) {
                    const auto [y0, y1] = valid_range(ki, g.pad, g.h, g.oh);
                    for (std::size_t kj = 0; kj < g.k; ++kj) {
                        const auto [x0, x1] = valid_range(kj, g.pad, g.w, g.ow);
                        T acc = 0;
                        for (std::size_t oy = y0; oy < y1; ++oy) {
                            const T* xr = xp + (oy + ki - g.pad) * g.w;
                            const T* gr = gp + oy * g.ow;
                            for (std::size_t ox = x0; ox < x1; ++ox) acc += gr[ox] * xr[ox + kj - g.pad];
                        }
                        wp[ki * g.k + kj] += acc;
                    }
                }
            }
        }
    }
}

// Elements per channel slice for axis-1 broadcasting ops.
template <Real T>
std::size_t inner_extent(const Tensor<T>& x) {
    std::size_t inner = 1;
    for (std::size_t i = 2; i < x.rank(); ++i) inner *= x.dim(i);
    return inner;
}

}  // namespace

template <Real T>
const typename Graph<T>::Node& Graph<T>::node(NodeId id) const {
    if (id.index >= nodes_.size()) throw Error("graph: node id out of range");
    return nodes_[id.index];
}

template <Real T>
NodeId Graph<T>::push(Node n) {
    if (!n.value.all_finite()) {
        throw NumericError(std::string("non-finite output of ") + op_name(n.op));
    }
    nodes_.push_back(std::move(n));
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <Real T>
bool Graph<T>::any_requires_grad(std::initializer_list<NodeId> ids) const {
    for (NodeId id : ids) {
        if (node(id).requires_grad) return true;
    }
    return false;
}

template <Real T>
NodeId Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
    if (value.empty()) throw ShapeError("leaf: empty tensor");
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::add_broadcast(NodeId x, NodeId delta) {
    const auto& xv = value(x);
    const auto& dv = value(delta);
    if (xv.rank() != dv.rank() + 1 || !std::equal(dv.shape().begin(), dv.shape().end(), xv.shape().begin() + 1)) {
        shape_fail("add_broadcast", shape_str(xv.shape()) + " + " + shape_str(dv.shape()));
    }
    Node n;
    n.op = Op::add_broadcast;
    n.inputs = {x.index, delta.index};
    n.requires_grad = any_requires_grad({x, delta});
    n.value = xv;
    const std::size_t per = dv.numel();
    auto out = n.value.data();
    const auto d = dv.data();
    for (std::size_t b = 0; b < xv.dim(0); ++b) {
        for (std::size_t i = 0; i < per; ++i) out[b * per + i] += d[i];
    }
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::matmul(NodeId x, NodeId w) {
    const auto& xv = value(x);
    const auto& wv = value(w);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0)) {
        shape_fail("matmul", shape_str(xv.shape()) + " x " + shape_str(wv.shape()));
    }
    const std::size_t rows = xv.dim(0), in = xv.dim(1), out = wv.dim(1);
    Node n;
    n.op = Op::matmul;
    n.inputs = {x.index, w.index};
    n.requires_grad = any_requires_grad({x, w});
    n.value = Tensor<T>({rows, out});
    T* y = n.value.data().data();
    const T* xp = xv.data().data();
    const T* wp = wv.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        T* yr = y + r * out;
        for (std::size_t i = 0; i < in; ++i) {
            const T a = xp[r * in + i];
            const T* wr = wp + i * out;
            for (std::size_t o = 0; o < out; ++o) yr[o] += a * wr[o];
        }
    }
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::conv2d(NodeId x, NodeId w, std::size_t pad) {
    const auto& xv = value(x);
    const auto& wv = value(w);
    const ConvGeom g = conv_geom(xv, wv, pad);
    Node n;
    n.op = Op::conv2d;
    n.inputs = {x.index, w.index};
    n.requires_grad = any_requires_grad({x, w});
    n.pad = pad;
    n.value = Tensor<T>({g.n, g.o, g.oh, g.ow});
    conv_forward(g, xv.data().data(), wv.data().data(), n.value.data().data());
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::bias_add(NodeId x, NodeId b) {
    const auto& xv = value(x);
    const auto& bv = value(b);
    if (xv.rank() < 2 || bv.rank() != 1 || bv.dim(0) != xv.dim(1)) {
        shape_fail("bias_add", shape_str(xv.shape()) + " + " + shape_str(bv.shape()));
    }
    Node n;
    n.op = Op::bias_add;
    n.inputs = {x.index, b.index};
    n.requires_grad = any_requires_grad({x, b});
    n.value = xv;
    const std::size_t inner = inner_extent(xv);
    const std::size_t f = xv.dim(1);
    auto out = n.value.data();
    for (std::size_t r = 0; r < xv.dim(0); ++r) {
        for (std::size_t c = 0; c < f; ++c) {
            T* p = out.data() + (r * f + c) * inner;
            const T bias = bv[c];
            for (std::size_t i = 0; i < inner; ++i) p[i] += bias;
        }
    }
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::relu(NodeId x) {
    Node n;
    n.op = Op::relu;
    n.inputs = {x.index};
    n.requires_grad = any_requires_grad({x});
    n.value = value(x);
    for (T& v : n.value.data()) v = v > T(0) ? v : T(0);
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::maxpool2(NodeId x) {
    const auto& xv = value(x);
    if (xv.rank() != 4 || xv.dim(2) < 2 || xv.dim(3) < 2) {
        shape_fail("maxpool2", "input must be [N,C,H>=2,W>=2], got " + shape_str(xv.shape()));
    }
    const std::size_t planes = xv.dim(0) * xv.dim(1);
    const std::size_t h = xv.dim(2), w = xv.dim(3), oh = h / 2, ow = w / 2;
    Node n;
    n.op = Op::maxpool2;
    n.inputs = {x.index};
    n.requires_grad = any_requires_grad({x});
    n.value = Tensor<T>({xv.dim(0), xv.dim(1), oh, ow});
    n.argmax.resize(n.value.numel());
    const T* src = xv.data().data();
    T* dst = n.value.data().data();
    for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = p * h * w + (2 * oy) * w + 2 * ox;
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = p * h * w + (2 * oy + dy) * w + 2 * ox + dx;
                        if (src[idx] > src[best]) best = idx;
                    }
                }
                const std::size_t o = (p * oh + oy) * ow + ox;
                dst[o] = src[best];
                n.argmax[o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::flatten(NodeId x) {
    const auto& xv = value(x);
    if (xv.rank() < 2) shape_fail("flatten", "input must have a batch axis, got " + shape_str(xv.shape()));
    Node n;
    n.op = Op::flatten;
    n.inputs = {x.index};
    n.requires_grad = any_requires_grad({x});
    n.value = xv.reshaped({xv.dim(0), xv.numel() / xv.dim(0)});
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::normalize(NodeId x, std::vector<T> mean, std::vector<T> stddev) {
    const auto& xv = value(x);
    if (xv.rank() < 2 || mean.size() != xv.dim(1) || stddev.size() != xv.dim(1)) {
        shape_fail("normalize", "per-channel constants do not match " + shape_str(xv.shape()));
    }
    for (T s : stddev) {
        if (!(s > T(0))) throw ShapeError("normalize: stddev must be positive");
    }
    Node n;
    n.op = Op::normalize;
    n.inputs = {x.index};
    n.requires_grad = any_requires_grad({x});
    n.value = xv;
    const std::size_t inner = inner_extent(xv);
    const std::size_t c = xv.dim(1);
    auto out = n.value.data();
    for (std::size_t r = 0; r < xv.dim(0); ++r) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            T* p = out.data() + (r * c + ch) * inner;
            for (std::size_t i = 0; i < inner; ++i) p[i] = (p[i] - mean[ch]) / stddev[ch];
        }
    }
    n.coeffs = std::move(mean);
    n.coeffs2 = std::move(stddev);
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::softmax_cross_entropy(NodeId logits, std::span<const std::int32_t> labels, Reduction reduction) {
    const auto& z = value(logits);
    if (z.rank() != 2) shape_fail("softmax_cross_entropy", "logits must be [N,K], got " + shape_str(z.shape()));
    const std::size_t rows = z.dim(0), k = z.dim(1);
    if (labels.size() != rows) {
        shape_fail("softmax_cross_entropy", "batch " + std::to_string(rows) + " vs " +
                                                std::to_string(labels.size()) + " labels");
    }
    for (std::int32_t y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= k) {
            throw ShapeError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0," +
                             std::to_string(k) + ")");
        }
    }
    Node n;
    n.op = Op::softmax_ce;
    n.inputs = {logits.index};
    n.requires_grad = any_requires_grad({logits});
    n.labels.assign(labels.begin(), labels.end());
    n.reduction = reduction;
    n.probs = Tensor<T>({rows, k});
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const T* zr = z.data().data() + r * k;
        T* pr = n.probs.data().data() + r * k;
        T m = zr[0];
        for (std::size_t j = 1; j < k; ++j) m = std::max(m, zr[j]);
        T s = 0;
        for (std::size_t j = 0; j < k; ++j) {
            pr[j] = std::exp(zr[j] - m);
            s += pr[j];
        }
        for (std::size_t j = 0; j < k; ++j) pr[j] /= s;
        const T log_sum_exp = m + std::log(s);
        total += static_cast<double>(log_sum_exp - zr[labels[r]]);
    }
    if (reduction == Reduction::mean) total /= static_cast<double>(rows);
    n.value = Tensor<T>({1}, {static_cast<T>(total)});
    return push(std::move(n));
}

template <Real T>
NodeId Graph<T>::weighted_sum(std::span<const NodeId> terms, std::span<const T> weights) {
    if (terms.empty() || terms.size() != weights.size()) {
        shape_fail("weighted_sum", "need one weight per term and at least one term");
    }
    Node n;
    n.op = Op::weighted_sum;
    n.value = Tensor<T>(value(terms[0]).shape());
    for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto& v = value(terms[t]);
        if (v.shape() != n.value.shape()) shape_fail("weighted_sum", "term shapes differ");
        n.inputs.push_back(terms[t].index);
        n.requires_grad = n.requires_grad || node(terms[t]).requires_grad;
        auto out = n.value.data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[t] * v[i];
    }
    n.coeffs.assign(weights.begin(), weights.end());
    return push(std::move(n));
}

template <Real T>
void Graph<T>::accumulate(std::uint32_t target, const Tensor<T>& g) {
    if (!nodes_[target].requires_grad) return;
    Tensor<T>& dst = grads_[target];
    if (dst.empty()) {
        dst = g;
        return;
    }
    auto d = dst.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
}

template <Real T>
void Graph<T>::backward(NodeId output) {
    if (node(output).value.numel() != 1) throw ShapeError("backward: output must be a scalar node");
    grads_.assign(nodes_.size(), Tensor<T>());
    visits_ = 0;
    if (!nodes_[output.index].requires_grad) return;
    grads_[output.index] = Tensor<T>::filled(nodes_[output.index].value.shape(), T(1));
    for (std::uint32_t i = output.index + 1; i-- > 0;) {
        if (grads_[i].empty()) continue;
        ++visits_;
        if (!grads_[i].all_finite()) {
            throw NumericError(std::string("non-finite gradient at ") + op_name(nodes_[i].op));
        }
        backprop_node(i);
    }
}

template <Real T>
void Graph<T>::backprop_node(std::uint32_t index) {
    const Node& n = nodes_[index];
    const Tensor<T>& gy = grads_[index];
    auto wants = [&](std::size_t slot) { return nodes_[n.inputs[slot]].requires_grad; };

    switch (n.op) {
        case Op::leaf:
            break;
        case Op::add_broadcast: {
            if (wants(0)) accumulate(n.inputs[0], gy);
            if (wants(1)) {
                const auto& dv = nodes_[n.inputs[1]].value;
                Tensor<T> gd(dv.shape());
                const std::size_t per = dv.numel();
                const std::size_t batch = gy.numel() / per;
                auto gdp = gd.data();
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t i = 0; i < per; ++i) gdp[i] += gy[b * per + i];
                }
                accumulate(n.inputs[1], gd);
            }
            break;
        }
        case Op::matmul: {
            const auto& xv = nodes_[n.inputs[0]].value;
            const auto& wv = nodes_[n.inputs[1]].value;
            const std::size_t rows = xv.dim(0), in = xv.dim(1), out = wv.dim(1);
            const T* g = gy.data().data();
            if (wants(0)) {
                Tensor<T> gx(xv.shape());
                T* gxp = gx.data().data();
                const T* wp = wv.data().data();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t i = 0; i < in; ++i) {
                        T acc = 0;
                        const T* wr = wp + i * out;
                        for (std::size_t o = 0; o < out; ++o) acc += g[r * out + o] * wr[o];
                        gxp[r * in + i] = acc;
                    }
                }
                accumulate(n.inputs[0], gx);
            }
            if (wants(1)) {
                Tensor<T> gw(wv.shape());
                T* gwp = gw.data().data();
                const T* xp = xv.data().data();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t i = 0; i < in; ++i) {
                        const T a = xp[r * in + i];
                        T* gr = gwp + i * out;
                        for (std::size_t o = 0; o < out; ++o) gr[o] += a * g[r * out + o];
                    }
                }
                accumulate(n.inputs[1], gw);
            }
            break;
        }
        case Op::conv2d: {
            const auto& xv = nodes_[n.inputs[0]].value;
            const auto& wv = nodes_[n.inputs[1]].value;
            const ConvGeom g = conv_geom(xv, wv, n.pad);
            if (wants(0)) {
                Tensor<T> gx(xv.shape());
                conv_backward_input(g, gy.data().data(), wv.data().data(), gx.data().data());
                accumulate(n.inputs[0], gx);
            }
            if (wants(1)) {
                Tensor<T> gw(wv.shape());
                conv_backward_weight(g, gy.data().data(), xv.data().data(), gw.data().data());
                accumulate(n.inputs[1], gw);
            }
            break;
        }
        case Op::bias_add: {
            if (wants(0)) accumulate(n.inputs[0], gy);
            if (wants(1)) {
                const auto& bv = nodes_[n.inputs[1]].value;
                Tensor<T> gb(bv.shape());
                const std::size_t inner = inner_extent(gy);
                const std::size_t f = gy.dim(1);
                for (std::size_t r = 0; r < gy.dim(0); ++r) {
                    for (std::size_t c = 0; c < f; ++c) {
                        const T* p = gy.data().data() + (r * f + c) * inner;
                        T acc = 0;
                        for (std::size_t i = 0; i < inner; ++i) acc += p[i];
                        gb[c] += acc;
                    }
                }
                accumulate(n.inputs[1], gb);
            }
            break;
        }
        case Op::relu: {
            if (!wants(0)) break;
            const auto& xv = nodes_[n.inputs[0]].value;
            Tensor<T> gx(xv.shape());
            for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = xv[i] > T(0) ? gy[i] : T(0);
            accumulate(n.inputs[0], gx);
            break;
        }
        case Op::maxpool2: {
            if (!wants(0)) break;
            Tensor<T> gx(nodes_[n.inputs[0]].value.shape());
            for (std::size_t o = 0; o < n.argmax.size(); ++o) gx[n.argmax[o]] += gy[o];
            accumulate(n.inputs[0], gx);
            break;
        }
        case Op::flatten: {
            if (!wants(0)) break;
            accumulate(n.inputs[0], gy.reshaped(nodes_[n.inputs[0]].value.shape()));
            break;
        }
        case Op::normalize: {
            if (!wants(0)) break;
            Tensor<T> gx = gy;
            const std::size_t inner = inner_extent(gx);
            const std::size_t c = gx.dim(1);
            for (std::size_t r = 0; r < gx.dim(0); ++r) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    T* p = gx.data().data() + (r * c + ch) * inner;
                    for (std::size_t i = 0; i < inner; ++i) p[i] /= n.coeffs2[ch];
                }
            }
            accumulate(n.inputs[0], gx);
            break;
        }
        case Op::softmax_ce: {
            if (!wants(0)) break;
            const std::size_t rows = n.probs.dim(0), k = n.probs.dim(1);
            T scale = gy[0];
            if (n.reduction == Reduction::mean) scale /= static_cast<T>(rows);
            Tensor<T> gz = n.probs;
            for (std::size_t r = 0; r < rows; ++r) {
                T* p = gz.data().data() + r * k;
                p[n.labels[r]] -= T(1);
                for (std::size_t j = 0; j < k; ++j) p[j] *= scale;
            }
            accumulate(n.inputs[0], gz);
            break;
        }
        case Op::weighted_sum: {
            for (std::size_t t = 0; t < n.inputs.size(); ++t) {
                if (!wants(t)) continue;
                Tensor<T> gt = gy;
                for (T& v : gt.data()) v *= n.coeffs[t];
                accumulate(n.inputs[t], gt);
            }
            break;
        }
    }
}

template <Real T>
const Tensor<T>& Graph<T>::grad(NodeId id) const {
    const Node& n = node(id);
    if (grads_.size() != nodes_.size()) grads_.resize(nodes_.size());
    if (grads_[id.index].empty()) grads_[id.index] = Tensor<T>(n.value.shape());
    return grads_[id.index];
}

template class Graph<float>;
template class Graph<double>;

}  // namespace uapforge::autodiff
