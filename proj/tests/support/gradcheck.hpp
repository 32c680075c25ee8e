// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

// Analytic-vs-finite-difference gradient checks in double precision.
//
// Each primitive is checked inside a small scalar pipeline:
//   leaves -> primitive -> flatten -> fixed projection to 3 logits -> mean CE.
// Draws whose ReLU inputs or max-pool runner-up gaps sit within kKinkMargin
// of a non-differentiable point are redrawn from the next sub-seed.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "uapforge/finite_diff.hpp"
#include "uapforge/graph.hpp"
#include "uapforge/model.hpp"
#include "uapforge/rng.hpp"

namespace gradcheck {

using uapforge::Rng;
using uapforge::Shape;
using uapforge::Tensor;
using Graph = uapforge::autodiff::Graph<double>;
using NodeId = uapforge::autodiff::NodeId;

inline constexpr double kStep = 1e-5;
inline constexpr double kKinkMargin = 1e-3;
// Central differences at kStep carry a few 1e-10 of roundoff, so components
// below this floor are compared in absolute terms.
inline constexpr double kRelFloor = 1e-5;
inline constexpr int kMaxRedraws = 64;

struct CaseResult {
    std::string name;
    double max_rel_error = 0.0;
    int redraws = 0;
};

/// A primitive under test: random leaves, and the op applied to their nodes.
struct Primitive {
    std::string name;
    std::function<std::vector<Tensor<double>>(Rng&)> make_leaves;
    std::function<NodeId(Graph&, const std::vector<NodeId>&)> apply;
};

inline double min_abs(const Tensor<double>& t) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : t.data()) m = std::min(m, std::abs(v));
    return m;
}

inline double min_pool_gap(const Tensor<double>& x) {
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < N * C; ++n)
        for (std::size_t i = 0; i + 1 < H; i += 2)
            for (std::size_t j = 0; j + 1 < W; j += 2) {
                const double* p = x.data().data() + n * H * W;
                std::vector<double> w{p[i * W + j], p[i * W + j + 1], p[(i + 1) * W + j], p[(i + 1) * W + j + 1]};
                std::sort(w.begin(), w.end());
                gap = std::min(gap, w[3] - w[2]);
            }
    return gap;
}

inline std::vector<Primitive> primitives() {
    auto leaves = [](std::vector<Shape> shapes) {
        return [shapes](Rng& rng) {
            std::vector<Tensor<double>> out;
            for (const auto& s : shapes) out.push_back(oracle::random_tensor<double>(rng, s, -1.0, 1.0));
            return out;
        };
    };
    std::vector<Primitive> p;
    p.push_back({"matmul", leaves({{3, 4}, {4, 5}}), [](Graph& g, const auto& n) { return g.matmul(n[0], n[1]); }});
    p.push_back({"conv2d(pad=0)", leaves({{2, 2, 5, 5}, {3, 2, 3, 3}}),
                 [](Graph& g, const auto& n) { return g.conv2d(n[0], n[1], 0); }});
    p.push_back({"conv2d(pad=1)", leaves({{2, 2, 4, 5}, {2, 2, 3, 3}}),
                 [](Graph& g, const auto& n) { return g.conv2d(n[0], n[1], 1); }});
    p.push_back({"bias_add(dense)", leaves({{3, 4}, {4}}), [](Graph& g, const auto& n) { return g.bias_add(n[0], n[1]); }});
    p.push_back({"bias_add(conv)", leaves({{2, 3, 2, 2}, {3}}),
                 [](Graph& g, const auto& n) { return g.bias_add(n[0], n[1]); }});
    p.push_back({"relu", leaves({{3, 6}}), [](Graph& g, const auto& n) { return g.relu(n[0]); }});
    p.push_back({"maxpool2", leaves({{2, 2, 4, 5}}), [](Graph& g, const auto& n) { return g.maxpool2(n[0]); }});
    p.push_back({"flatten", leaves({{2, 2, 2, 3}}), [](Graph& g, const auto& n) { return g.flatten(n[0]); }});
    p.push_back({"normalize", leaves({{2, 3, 2, 2}}), [](Graph& g, const auto& n) {
                     return g.normalize(n[0], {0.1, -0.2, 0.3}, {0.5, 1.5, 2.0});
                 }});
    p.push_back({"add_broadcast", leaves({{3, 2, 2, 2}, {2, 2, 2}}),
                 [](Graph& g, const auto& n) { return g.add_broadcast(n[0], n[1]); }});
    p.push_back({"weighted_sum", leaves({{2, 5}, {2, 5}}), [](Graph& g, const auto& n) {
                     const std::vector<NodeId> terms{n[0], n[1]};
                     const std::vector<double> w{0.7, -1.3};
                     return g.weighted_sum(terms, w);
                 }});
    p.push_back({"softmax_ce", leaves({{4, 3}}), [](Graph& g, const auto& n) { return n[0]; }});
    return p;
}

/// Scalar loss of the pipeline around `prim`, optionally with gradients of every leaf.
inline double pipeline(const Primitive& prim, const std::vector<Tensor<double>>& values, const Tensor<double>& proj,
                       std::vector<Tensor<double>>* grads, Tensor<double>* op_input_out = nullptr,
                       Tensor<double>* op_output_out = nullptr) {
    Graph g;
    std::vector<NodeId> ids;
    for (const auto& v : values) ids.push_back(g.leaf(v, true));
    const NodeId y = prim.apply(g, ids);
    if (op_input_out) *op_input_out = g.value(ids[0]);
    if (op_output_out) *op_output_out = g.value(y);
    const NodeId flat = g.flatten(y);
    const std::size_t features = g.value(flat).dim(1);
    Tensor<double> p = proj.reshaped({proj.numel() / 3, 3});
    if (p.dim(0) != features) throw std::logic_error("projection size mismatch");
    const NodeId logits = g.matmul(flat, g.leaf(p));
    std::vector<std::int32_t> labels(g.value(logits).dim(0));
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int32_t>(i % 3);
    const NodeId loss = g.softmax_cross_entropy(logits, labels);
    if (grads) {
        g.backward(loss);
        grads->clear();
        for (const auto id : ids) grads->push_back(g.grad(id));
    }
    return g.value(loss)[0];
}

inline CaseResult check_primitive(const Primitive& prim, std::uint64_t seed) {
    CaseResult res{prim.name};
    for (int attempt = 0;; ++attempt) {
        Rng rng(uapforge::splitmix64(seed + static_cast<std::uint64_t>(attempt) * 0x9e37));
        std::vector<Tensor<double>> values = prim.make_leaves(rng);
        Tensor<double> in, out;
        {
            Graph g;
            std::vector<NodeId> ids;
            for (const auto& v : values) ids.push_back(g.leaf(v));
            const NodeId y = prim.apply(g, ids);
            out = g.value(y);
        }
        bool kink = false;
        if (prim.name == "relu") kink = min_abs(values[0]) < kKinkMargin;
        if (prim.name == "maxpool2") kink = min_pool_gap(values[0]) < kKinkMargin;
        if (kink) {
            if (attempt + 1 >= kMaxRedraws) throw std::runtime_error("gradcheck: no kink-free draw for " + prim.name);
            ++res.redraws;
            continue;
        }
        const std::size_t features = out.numel() / out.dim(0);
        const Tensor<double> proj = oracle::random_tensor<double>(rng, {features * 3}, -1.0, 1.0);
        std::vector<Tensor<double>> grads;
        pipeline(prim, values, proj, &grads);
        for (std::size_t k = 0; k < values.size(); ++k) {
            const auto fd = uapforge::finite_difference_gradient<double>(
                [&](const Tensor<double>& probe) {
                    auto v = values;
                    v[k] = probe;
                    return pipeline(prim, v, proj, nullptr);
                },
                values[k], kStep);
            res.max_rel_error = std::max(res.max_rel_error, oracle::max_rel_error(grads[k].data(), fd.data(), kRelFloor));
        }
        return res;
    }
}

/// 2-conv + 2-dense CNN with a leading normalize layer and a padded conv.
inline uapforge::ModelSpec full_cnn_spec() {
    using uapforge::LayerSpec;
    uapforge::ModelSpec spec;
    spec.input_shape = {1, 9, 9};
    spec.num_classes = 3;
    spec.layers = {LayerSpec::normalize({0.5}, {0.25}), LayerSpec::conv2d(1, 2, 3, 1), LayerSpec::relu(),
                   LayerSpec::maxpool2(),                LayerSpec::conv2d(2, 3, 3),    LayerSpec::relu(),
                   LayerSpec::maxpool2(),                LayerSpec::flatten(),          LayerSpec::dense(3, 6),
                   LayerSpec::relu(),                    LayerSpec::dense(6, 3)};
    return spec;
}

/// Full-network check of parameter, input and perturbation gradients.
inline CaseResult check_model(const uapforge::ModelSpec& spec, std::uint64_t seed, std::size_t batch = 2) {
    using uapforge::GradTarget;
    CaseResult res{"model"};
    for (int attempt = 0;; ++attempt) {
        const std::uint64_t s = uapforge::splitmix64(seed + static_cast<std::uint64_t>(attempt) * 0x51ed);
        auto model = uapforge::build_model<double>(spec, s);
        Rng rng(s ^ 0xabcdef);
        Shape xs{batch};
        xs.insert(xs.end(), spec.input_shape.begin(), spec.input_shape.end());
        const Tensor<double> X = oracle::random_tensor<double>(rng, xs, 0.0, 1.0);
        const Tensor<double> delta = oracle::random_tensor<double>(rng, spec.input_shape, -0.1, 0.1);
        const auto Y = oracle::random_labels(rng, batch, spec.num_classes);

        Tensor<double> Xd = X;
        for (std::size_t i = 0; i < Xd.numel(); ++i) Xd[i] += delta[i % delta.numel()];
        bool kink = false;
        for (const Tensor<double>* batch_x : {&X, static_cast<const Tensor<double>*>(&Xd)}) {
            for (std::size_t i = 0; i < batch; ++i) {
                const auto tr = oracle::naive_forward(model, oracle::sample_row(*batch_x, i));
                kink = kink || tr.min_relu_margin < kKinkMargin || tr.min_pool_gap < kKinkMargin;
            }
        }
        if (kink) {
            if (attempt + 1 >= kMaxRedraws) throw std::runtime_error("gradcheck: no kink-free model draw");
            ++res.redraws;
            continue;
        }
        auto loss_params = [&](const Tensor<double>& theta) {
            return uapforge::forward_cross_entropy(uapforge::make_model<double>(spec, theta), X, Y);
        };
        auto loss_input = [&](const Tensor<double>& x) { return uapforge::forward_cross_entropy(model, x, Y); };
        auto loss_delta = [&](const Tensor<double>& d) {
            Tensor<double> shifted = X;
            for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += d[i % d.numel()];
            return uapforge::forward_cross_entropy(model, shifted, Y);
        };
        const auto gp = uapforge::backward(model, X, Y, GradTarget::parameters);
        const auto gi = uapforge::backward(model, X, Y, GradTarget::input);
        const auto gd = uapforge::backward(model, X, Y, GradTarget::perturbation, &delta);
        const auto fp = uapforge::finite_difference_gradient<double>(loss_params, model.params, kStep);
        const auto fi = uapforge::finite_difference_gradient<double>(loss_input, X, kStep);
        const auto fdl = uapforge::finite_difference_gradient<double>(loss_delta, delta, kStep);
        res.max_rel_error = std::max({oracle::max_rel_error(gp.grad.data(), fp.data(), kRelFloor),
                                      oracle::max_rel_error(gi.grad.data(), fi.data(), kRelFloor),
                                      oracle::max_rel_error(gd.grad.data(), fdl.data(), kRelFloor)});
        return res;
    }
}

}  // namespace gradcheck
