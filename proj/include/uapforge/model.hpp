// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uapforge/graph.hpp"
#include "uapforge/tensor.hpp"

namespace uapforge {

using Labels = std::vector<std::int32_t>;

enum class LayerKind : std::uint8_t { dense, conv2d, relu, maxpool2, flatten, normalize };

const char* layer_kind_name(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

/// One layer of a sequential classifier. Only the fields relevant to `kind`
/// are meaningful: dense uses in/out features, conv2d uses in/out channels
/// plus kernel and pad, normalize uses the per-channel constants.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t kernel = 0;
    std::size_t pad = 0;
    std::vector<double> mean;
    std::vector<double> stddev;

    static LayerSpec dense(std::size_t in, std::size_t out);
    static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            std::size_t pad = 0);
    static LayerSpec relu();
    static LayerSpec maxpool2();
    static LayerSpec flatten();
    static LayerSpec normalize(std::vector<double> mean, std::vector<double> stddev);

    std::size_t weight_count() const;
    std::size_t bias_count() const;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Where a layer's weights and bias live inside the flat parameter vector,
/// and the per-sample shape it produces.
struct LayerPlan {
    Shape out_shape;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

struct ModelSpec {
    Shape input_shape;  // per sample, e.g. [C, H, W]
    std::size_t num_classes = 0;
    std::vector<LayerSpec> layers;

    /// Shape inference. Throws ShapeError when adjacent layers do not compose
    /// or the final output is not [num_classes].
    std::vector<LayerPlan> plan() const;
    std::size_t param_count() const;
    std::size_t input_numel() const { return shape_numel(input_shape); }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// Named architectures. `input_shape` is [C, H, W] (or [D] for "logistic"/"mlp").
///   logistic : flatten, dense
///   mlp      : flatten, dense(hidden), relu, dense
///   cnn      : conv3x3, relu, pool, conv3x3, relu, pool, flatten, dense, relu, dense
ModelSpec named_architecture(const std::string& name, const Shape& input_shape, std::size_t num_classes,
                             std::size_t width = 0);

template <Real T>
struct ModelState {
    ModelSpec spec;
    Tensor<T> params;

    std::size_t num_classes() const { return spec.num_classes; }
};

/// Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// drawn layer by layer from one seeded stream.
template <Real T>
ModelState<T> build_model(const ModelSpec& spec, std::uint64_t seed);

/// Wraps existing parameters; validates the count.
template <Real T>
ModelState<T> make_model(ModelSpec spec, Tensor<T> params);

template <Real To, Real From>
ModelState<To> model_cast(const ModelState<From>& m) {
    return ModelState<To>{m.spec, tensor_cast<To>(m.params)};
}

enum class GradTarget : std::uint8_t { parameters, input, perturbation };

template <Real T>
struct GradResult {
    GradTarget wrt = GradTarget::parameters;
    T loss = 0;
    Tensor<T> grad;
};

/// Tape handles for one network application.
struct NetworkNodes {
    autodiff::NodeId input;
    autodiff::NodeId logits;
    std::vector<autodiff::NodeId> param_leaves;
    std::vector<std::size_t> param_offsets;
};

/// Appends the network to `graph`, reading from node `input` ([N, input_shape...]).
template <Real T>
NetworkNodes append_network(autodiff::Graph<T>& graph, const ModelState<T>& model, autodiff::NodeId input,
                            bool params_require_grad);

/// Throws ShapeError unless X is [N, input_shape...] with N >= 1.
template <Real T>
void check_batch(const ModelState<T>& model, const Tensor<T>& X);

template <Real T>
Tensor<T> forward_logits(const ModelState<T>& model, const Tensor<T>& X);

/// Mean softmax cross-entropy of the batch.
template <Real T>
T forward_cross_entropy(const ModelState<T>& model, const Tensor<T>& X, std::span<const std::int32_t> Y);

/// Exact reverse-mode gradient of the batch loss (mean unless `reduction`
/// says sum). With GradTarget::perturbation the network sees X + delta and the
/// gradient has delta's shape; `delta` is required for that target only.
template <Real T>
GradResult<T> backward(const ModelState<T>& model, const Tensor<T>& X, std::span<const std::int32_t> Y,
                       GradTarget wrt, const Tensor<T>* delta = nullptr,
                       autodiff::Reduction reduction = autodiff::Reduction::mean);

/// Row-wise argmax; ties resolve to the lowest class index.
template <Real T>
Labels argmax_rows(const Tensor<T>& logits);

template <Real T>
Labels predict(const ModelState<T>& model, const Tensor<T>& X);

/// Euclidean distance between parameter vectors of same-spec models.
template <Real T>
double param_distance(const ModelState<T>& a, const ModelState<T>& b);

/// Mean of per-model cross-entropies.
template <Real T>
T ensemble_loss(std::span<const ModelState<T>> models, const Tensor<T>& X, std::span<const std::int32_t> Y);

/// Mean of per-model gradients w.r.t. the input or a shared perturbation.
template <Real T>
GradResult<T> ensemble_backward(std::span<const ModelState<T>> models, const Tensor<T>& X,
                                std::span<const std::int32_t> Y, GradTarget wrt, const Tensor<T>* delta = nullptr,
                                autodiff::Reduction reduction = autodiff::Reduction::mean);

/// Argmax of the mean logits; equals predict() for a single model.
template <Real T>
Labels ensemble_predict(std::span<const ModelState<T>> models, const Tensor<T>& X);

/// FNV-1a over spec JSON and raw parameter bytes.
template <Real T>
std::uint64_t model_fingerprint(const ModelState<T>& model);

}  // namespace uapforge
