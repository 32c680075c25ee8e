// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "uapforge/tensor.hpp"

namespace uapforge::autodiff {

struct NodeId {
    std::uint32_t index = 0;
};

enum class Op : std::uint8_t {
    leaf,
    add_broadcast,
    matmul,
    conv2d,
    bias_add,
    relu,
    maxpool2,
    flatten,
    normalize,
    softmax_ce,
    weighted_sum,
};

const char* op_name(Op op);

enum class Reduction : std::uint8_t { mean, sum };

/// Reverse-mode tape over a fixed set of primitives.
///
/// Nodes are appended in execution order, so the insertion order is a valid
/// topological order: every node's inputs precede it. Forward values are
/// computed eagerly and cached on the node. backward() walks the tape once in
/// reverse, skipping nodes that no gradient-requiring leaf feeds into.
///
/// All reductions run in a fixed sequential order, so repeated runs on the
/// same inputs are bit-identical.
template <Real T>
class Graph {
public:
    /// Leaf value. Only leaves created with requires_grad receive gradients.
    NodeId leaf(Tensor<T> value, bool requires_grad = false);

    /// x [N, S...] + delta [S...], broadcast over the leading axis.
    NodeId add_broadcast(NodeId x, NodeId delta);

    /// x [N, in] times w [in, out] -> [N, out].
    NodeId matmul(NodeId x, NodeId w);

    /// Stride-1 convolution with `pad` zero rows/cols on each border.
    /// x [N, C, H, W], w [O, C, k, k] -> [N, O, H + 2pad - k + 1, W + 2pad - k + 1].
    NodeId conv2d(NodeId x, NodeId w, std::size_t pad);

    /// Adds b [F] along axis 1 of x ([N, F] or [N, F, H, W]).
    NodeId bias_add(NodeId x, NodeId b);

    NodeId relu(NodeId x);

    /// 2x2 window, stride 2, trailing odd row/col dropped. Ties go to the
    /// first element in row-major window order.
    NodeId maxpool2(NodeId x);

    /// [N, ...] -> [N, prod(...)].
    NodeId flatten(NodeId x);

    /// Per-channel (x - mean[c]) / stddev[c] along axis 1. Constants, not parameters.
    NodeId normalize(NodeId x, std::vector<T> mean, std::vector<T> stddev);

    /// Fused, max-shifted softmax cross-entropy of logits [N, K]. Output is a
    /// scalar (shape [1]): the batch mean or the batch sum.
    NodeId softmax_cross_entropy(NodeId logits, std::span<const std::int32_t> labels,
                                 Reduction reduction = Reduction::mean);

    /// sum_i weights[i] * terms[i]; all terms share one shape.
    NodeId weighted_sum(std::span<const NodeId> terms, std::span<const T> weights);

    const Tensor<T>& value(NodeId id) const { return node(id).value; }
    Op op(NodeId id) const { return node(id).op; }
    bool requires_grad(NodeId id) const { return node(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse sweep seeded with d(output)/d(output) = 1. `output` must be a
    /// single-element node. May be called again; gradients are recomputed.
    void backward(NodeId output);

    /// Gradient of the last backward() output w.r.t. a node. Zero tensor when
    /// no path connects them.
    const Tensor<T>& grad(NodeId id) const;

    /// Nodes processed by the last backward() (each at most once).
    std::size_t last_backward_visits() const noexcept { return visits_; }

private:
    struct Node {
        Op op = Op::leaf;
        std::vector<std::uint32_t> inputs;
        Tensor<T> value;
        bool requires_grad = false;
        std::size_t pad = 0;
        std::vector<T> coeffs;   // weighted_sum weights; normalize mean
        std::vector<T> coeffs2;  // normalize stddev
        std::vector<std::int32_t> labels;
        std::vector<std::uint32_t> argmax;
        Tensor<T> probs;
        Reduction reduction = Reduction::mean;
    };

    const Node& node(NodeId id) const;
    NodeId push(Node n);
    bool any_requires_grad(std::initializer_list<NodeId> ids) const;
    void accumulate(std::uint32_t target, const Tensor<T>& g);
    void backprop_node(std::uint32_t index);

    std::vector<Node> nodes_;
    mutable std::vector<Tensor<T>> grads_;
    std::size_t visits_ = 0;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace uapforge::autodiff
