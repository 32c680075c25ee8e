// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/model.hpp"

#include <algorithm>
#include <cmath>

#include "uapforge/hash.hpp"
#include "uapforge/rng.hpp"

namespace uapforge {

using autodiff::Graph;
using autodiff::NodeId;
using autodiff::Reduction;

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2: return "maxpool2";
        case LayerKind::flatten: return "flatten";
        case LayerKind::normalize: return "normalize";
    }
    return "unknown";
}

LayerKind parse_layer_kind(const std::string& name) {
    for (LayerKind k : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2,
                        LayerKind::flatten, LayerKind::normalize}) {
        if (name == layer_kind_name(k)) return k;
    }
    throw ConfigError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.in = in;
    l.out = out;
    return l;
}

LayerSpec LayerSpec::conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            std::size_t pad) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.in = in_channels;
    l.out = out_channels;
    l.kernel = kernel;
    l.pad = pad;
    return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool2() {
    LayerSpec l;
    l.kind = LayerKind::maxpool2;
    return l;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
}

LayerSpec LayerSpec::normalize(std::vector<double> mean, std::vector<double> stddev) {
    LayerSpec l;
    l.kind = LayerKind::normalize;
    l.mean = std::move(mean);
    l.stddev = std::move(stddev);
    return l;
}

std::size_t LayerSpec::weight_count() const {
    switch (kind) {
        case LayerKind::dense: return in * out;
        case LayerKind::conv2d: return out * in * kernel * kernel;
        default: return 0;
    }
}

std::size_t LayerSpec::bias_count() const {
    return kind == LayerKind::dense || kind == LayerKind::conv2d ? out : 0;
}

std::vector<LayerPlan> ModelSpec::plan() const {
    if (input_shape.empty() || shape_numel(input_shape) == 0) throw ShapeError("model input shape is empty");
    if (num_classes < 1) throw ShapeError("model needs at least one class");
    std::vector<LayerPlan> plans;
    Shape cur = input_shape;
    std::size_t offset = 0;
    auto fail = [&](std::size_t i, const std::string& why) {
        throw ShapeError("layer " + std::to_string(i) + " (" + layer_kind_name(layers[i].kind) + "): " + why +
                         ", incoming shape " + shape_str(cur));
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        LayerPlan p;
        switch (l.kind) {
            case LayerKind::dense:
                if (cur.size() != 1 || cur[0] != l.in || l.out == 0) fail(i, "expects [" + std::to_string(l.in) + "]");
                cur = {l.out};
                break;
            case LayerKind::conv2d: {
                if (cur.size() != 3 || cur[0] != l.in || l.out == 0 || l.kernel == 0) {
                    fail(i, "expects [" + std::to_string(l.in) + ",H,W]");
                }
                if (cur[1] + 2 * l.pad < l.kernel || cur[2] + 2 * l.pad < l.kernel) fail(i, "kernel exceeds input");
                cur = {l.out, cur[1] + 2 * l.pad - l.kernel + 1, cur[2] + 2 * l.pad - l.kernel + 1};
                break;
            }
            case LayerKind::relu:
                break;
            case LayerKind::maxpool2:
                if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2) fail(i, "expects [C,H>=2,W>=2]");
                cur = {cur[0], cur[1] / 2, cur[2] / 2};
                break;
            case LayerKind::flatten:
                cur = {shape_numel(cur)};
                break;
            case LayerKind::normalize:
                if (l.mean.size() != cur[0] || l.stddev.size() != cur[0]) fail(i, "needs one mean/std per channel");
                for (double s : l.stddev) {
                    if (!(s > 0.0)) fail(i, "std must be positive");
                }
                break;
        }
        p.weight_offset = offset;
        offset += l.weight_count();
        p.bias_offset = offset;
        offset += l.bias_count();
        p.out_shape = cur;
        plans.push_back(std::move(p));
    }
    if (cur != Shape{num_classes}) {
        throw ShapeError("model output " + shape_str(cur) + " does not match num_classes " +
                         std::to_string(num_classes));
    }
    return plans;
}

std::size_t ModelSpec::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight_count() + l.bias_count();
    return n;
}

nlohmann::json to_json(const ModelSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : spec.layers) {
        nlohmann::json j{{"kind", layer_kind_name(l.kind)}};
        switch (l.kind) {
            case LayerKind::dense:
                j["in"] = l.in;
                j["out"] = l.out;
                break;
            case LayerKind::conv2d:
                j["in"] = l.in;
                j["out"] = l.out;
                j["kernel"] = l.kernel;
                j["pad"] = l.pad;
                break;
            case LayerKind::normalize:
                j["mean"] = l.mean;
                j["std"] = l.stddev;
                break;
            default:
                break;
        }
        layers.push_back(std::move(j));
    }
    return {{"input_shape", spec.input_shape}, {"num_classes", spec.num_classes}, {"layers", std::move(layers)}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    try {
        ModelSpec spec;
        spec.input_shape = j.at("input_shape").get<Shape>();
        spec.num_classes = j.at("num_classes").get<std::size_t>();
        for (const auto& lj : j.at("layers")) {
            LayerSpec l;
            l.kind = parse_layer_kind(lj.at("kind").get<std::string>());
            l.in = lj.value("in", std::size_t{0});
            l.out = lj.value("out", std::size_t{0});
            l.kernel = lj.value("kernel", std::size_t{0});
            l.pad = lj.value("pad", std::size_t{0});
            if (l.kind == LayerKind::normalize) {
                l.mean = lj.at("mean").get<std::vector<double>>();
                l.stddev = lj.at("std").get<std::vector<double>>();
            }
            spec.layers.push_back(std::move(l));
        }
        spec.plan();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model spec: ") + e.what());
    }
}

ModelSpec named_architecture(const std::string& name, const Shape& input_shape, std::size_t num_classes,
                             std::size_t width) {
    ModelSpec spec;
    spec.input_shape = input_shape;
    spec.num_classes = num_classes;
    const std::size_t d = shape_numel(input_shape);
    if (name == "logistic") {
        spec.layers = {LayerSpec::flatten(), LayerSpec::dense(d, num_classes)};
    } else if (name == "mlp") {
        const std::size_t hidden = width ? width : 32;
        spec.layers = {LayerSpec::flatten(), LayerSpec::dense(d, hidden), LayerSpec::relu(),
                       LayerSpec::dense(hidden, num_classes)};
    } else if (name == "cnn") {
        if (input_shape.size() != 3) throw ConfigError("cnn architecture needs a [C,H,W] input shape");
        const std::size_t w = width ? width : 8;
        const std::size_t c = input_shape[0];
        std::size_t h = input_shape[1], ww = input_shape[2];
        h = (h - 2) / 2;
        ww = (ww - 2) / 2;
        if (h < 4 || ww < 4) throw ConfigError("cnn architecture needs inputs of at least 10x10");
        h = (h - 2) / 2;
        ww = (ww - 2) / 2;
        spec.layers = {LayerSpec::conv2d(c, w, 3),     LayerSpec::relu(), LayerSpec::maxpool2(),
                       LayerSpec::conv2d(w, 2 * w, 3), LayerSpec::relu(), LayerSpec::maxpool2(),
                       LayerSpec::flatten(),           LayerSpec::dense(2 * w * h * ww, 4 * w),
                       LayerSpec::relu(),              LayerSpec::dense(4 * w, num_classes)};
    } else {
        throw ConfigError("unknown architecture '" + name + "' (expected logistic, mlp or cnn)");
    }
    spec.plan();
    return spec;
}

template <Real T>
ModelState<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
    const auto plans = spec.plan();
    Rng rng(seed);
    std::vector<T> params(spec.param_count());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.weight_count() == 0) continue;
        const std::size_t fan_in = l.kind == LayerKind::dense ? l.in : l.in * l.kernel * l.kernel;
        const double wb = std::sqrt(6.0 / static_cast<double>(fan_in));
        const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t k = 0; k < l.weight_count(); ++k) {
            params[plans[i].weight_offset + k] = static_cast<T>(rng.uniform(-wb, wb));
        }
        for (std::size_t k = 0; k < l.bias_count(); ++k) {
            params[plans[i].bias_offset + k] = static_cast<T>(rng.uniform(-bb, bb));
        }
    }
    const std::size_t n = params.size();
    return ModelState<T>{spec, n ? Tensor<T>({n}, std::move(params)) : Tensor<T>()};
}

template <Real T>
ModelState<T> make_model(ModelSpec spec, Tensor<T> params) {
    spec.plan();
    if (params.numel() != spec.param_count()) {
        throw ShapeError("parameter vector has " + std::to_string(params.numel()) + " entries, spec needs " +
                         std::to_string(spec.param_count()));
    }
    return ModelState<T>{std::move(spec), std::move(params)};
}

template <Real T>
void check_batch(const ModelState<T>& model, const Tensor<T>& X) {
    const Shape& in = model.spec.input_shape;
    if (X.rank() != in.size() + 1 || !std::equal(in.begin(), in.end(), X.shape().begin() + 1)) {
        throw ShapeError("batch shape " + shape_str(X.shape()) + " does not match model input " + shape_str(in));
    }
}

namespace {

template <Real T>
Tensor<T> param_slice(const Tensor<T>& params, std::size_t offset, Shape shape) {
    const std::size_t n = shape_numel(shape);
    std::vector<T> v(params.data().begin() + static_cast<std::ptrdiff_t>(offset),
                     params.data().begin() + static_cast<std::ptrdiff_t>(offset + n));
    return Tensor<T>(std::move(shape), std::move(v));
}

}  // namespace

template <Real T>
NetworkNodes append_network(Graph<T>& g, const ModelState<T>& model, NodeId input, bool params_require_grad) {
    const auto plans = model.spec.plan();
    if (model.params.numel() != model.spec.param_count()) throw ShapeError("model parameter count mismatch");
    NetworkNodes nodes;
    nodes.input = input;
    NodeId cur = input;
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        const LayerSpec& l = model.spec.layers[i];
        const LayerPlan& p = plans[i];
        switch (l.kind) {
            case LayerKind::dense:
            case LayerKind::conv2d: {
                Shape wshape = l.kind == LayerKind::dense ? Shape{l.in, l.out} : Shape{l.out, l.in, l.kernel, l.kernel};
                NodeId w = g.leaf(param_slice(model.params, p.weight_offset, std::move(wshape)), params_require_grad);
                NodeId b = g.leaf(param_slice(model.params, p.bias_offset, {l.out}), params_require_grad);
                nodes.param_leaves.push_back(w);
                nodes.param_offsets.push_back(p.weight_offset);
                nodes.param_leaves.push_back(b);
                nodes.param_offsets.push_back(p.bias_offset);
                cur = l.kind == LayerKind::dense ? g.matmul(cur, w) : g.conv2d(cur, w, l.pad);
                cur = g.bias_add(cur, b);
                break;
            }
            case LayerKind::relu:
                cur = g.relu(cur);
                break;
            case LayerKind::maxpool2:
                cur = g.maxpool2(cur);
                break;
            case LayerKind::flatten:
                cur = g.flatten(cur);
                break;
            case LayerKind::normalize:
                cur = g.normalize(cur, std::vector<T>(l.mean.begin(), l.mean.end()),
                                  std::vector<T>(l.stddev.begin(), l.stddev.end()));
                break;
        }
    }
    nodes.logits = cur;
    return nodes;
}

template <Real T>
Tensor<T> forward_logits(const ModelState<T>& model, const Tensor<T>& X) {
    check_batch(model, X);
    Graph<T> g;
    const NodeId in = g.leaf(X);
    const auto net = append_network(g, model, in, false);
    return g.value(net.logits);
}

template <Real T>
T forward_cross_entropy(const ModelState<T>& model, const Tensor<T>& X, std::span<const std::int32_t> Y) {
    check_batch(model, X);
    Graph<T> g;
    const NodeId in = g.leaf(X);
    const auto net = append_network(g, model, in, false);
    return g.value(g.softmax_cross_entropy(net.logits, Y))[0];
}

template <Real T>
GradResult<T> backward(const ModelState<T>& model, const Tensor<T>& X, std::span<const std::int32_t> Y,
                       GradTarget wrt, const Tensor<T>* delta, Reduction reduction) {
    check_batch(model, X);
    Graph<T> g;
    NodeId in;
    NodeId delta_node{};
    switch (wrt) {
        case GradTarget::parameters:
            in = g.leaf(X, false);
            break;
        case GradTarget::input:
            in = g.leaf(X, true);
            break;
        case GradTarget::perturbation:
            if (delta == nullptr) throw Error("backward: perturbation target needs a delta tensor");
            delta_node = g.leaf(*delta, true);
            in = g.add_broadcast(g.leaf(X, false), delta_node);
            break;
        default:
            throw Error("backward: unsupported gradient target");
    }
    const auto net = append_network(g, model, in, wrt == GradTarget::parameters);
    const NodeId loss = g.softmax_cross_entropy(net.logits, Y, reduction);
    g.backward(loss);

    GradResult<T> result;
    result.wrt = wrt;
    result.loss = g.value(loss)[0];
    switch (wrt) {
        case GradTarget::parameters: {
            result.grad = Tensor<T>(model.params.shape());
            auto dst = result.grad.data();
            for (std::size_t i = 0; i < net.param_leaves.size(); ++i) {
                const auto& gp = g.grad(net.param_leaves[i]);
                std::copy(gp.data().begin(), gp.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(net.param_offsets[i]));
            }
            break;
        }
        case GradTarget::input:
            result.grad = g.grad(in);
            break;
        case GradTarget::perturbation:
            result.grad = g.grad(delta_node);
            break;
    }
    result.grad.check_finite("gradient");
    return result;
}

template <Real T>
Labels argmax_rows(const Tensor<T>& logits) {
    if (logits.rank() != 2) throw ShapeError("argmax_rows: expected [N,K], got " + shape_str(logits.shape()));
    const std::size_t rows = logits.dim(0), k = logits.dim(1);
    Labels out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* z = logits.data().data() + r * k;
        std::size_t best = 0;
        for (std::size_t j = 1; j < k; ++j) {
            if (z[j] > z[best]) best = j;
        }
        out[r] = static_cast<std::int32_t>(best);
    }
    return out;
}

template <Real T>
Labels predict(const ModelState<T>& model, const Tensor<T>& X) {
    return argmax_rows(forward_logits(model, X));
}

template <Real T>
double param_distance(const ModelState<T>& a, const ModelState<T>& b) {
    if (!(a.spec == b.spec)) throw ShapeError("param_distance: models have different specs");
    return l2_distance(a.params.data(), b.params.data());
}

namespace {

template <Real T>
void check_ensemble(std::span<const ModelState<T>> models) {
    if (models.empty()) throw Error("ensemble: empty model list");
    for (const auto& m : models) {
        if (m.spec.input_shape != models[0].spec.input_shape || m.spec.num_classes != models[0].spec.num_classes) {
            throw ShapeError("ensemble: members disagree on input shape or class count");
        }
    }
}

}  // namespace

template <Real T>
T ensemble_loss(std::span<const ModelState<T>> models, const Tensor<T>& X, std::span<const std::int32_t> Y) {
    check_ensemble(models);
    double acc = 0.0;
    for (const auto& m : models) acc += static_cast<double>(forward_cross_entropy(m, X, Y));
    return static_cast<T>(acc / static_cast<double>(models.size()));
}

template <Real T>
GradResult<T> ensemble_backward(std::span<const ModelState<T>> models, const Tensor<T>& X,
                                std::span<const std::int32_t> Y, GradTarget wrt, const Tensor<T>* delta,
                                Reduction reduction) {
    check_ensemble(models);
    if (wrt == GradTarget::parameters) throw Error("ensemble_backward: parameter gradients are per member");
    if (models.size() == 1) return backward(models[0], X, Y, wrt, delta, reduction);
    GradResult<T> total;
    total.wrt = wrt;
    double loss = 0.0;
    const T inv = T(1) / static_cast<T>(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
        GradResult<T> r = backward(models[i], X, Y, wrt, delta, reduction);
        loss += static_cast<double>(r.loss);
        if (i == 0) {
            total.grad = Tensor<T>(r.grad.shape());
        }
        auto dst = total.grad.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += r.grad[k] * inv;
    }
    total.loss = static_cast<T>(loss / static_cast<double>(models.size()));
    return total;
}

template <Real T>
Labels ensemble_predict(std::span<const ModelState<T>> models, const Tensor<T>& X) {
    check_ensemble(models);
    if (models.size() == 1) return predict(models[0], X);
    Tensor<T> sum = forward_logits(models[0], X);
    for (std::size_t i = 1; i < models.size(); ++i) {
        const Tensor<T> z = forward_logits(models[i], X);
        for (std::size_t k = 0; k < sum.numel(); ++k) sum[k] += z[k];
    }
    return argmax_rows(sum);
}

template <Real T>
std::uint64_t model_fingerprint(const ModelState<T>& model) {
    std::uint64_t h = fnv1a64(to_json(model.spec).dump());
    const auto* raw = reinterpret_cast<const std::uint8_t*>(model.params.data().data());
    return fnv1a64(std::span<const std::uint8_t>(raw, model.params.numel() * sizeof(T)), h);
}

#define UAPFORGE_INSTANTIATE(T)                                                                                    \
    template ModelState<T> build_model<T>(const ModelSpec&, std::uint64_t);                                        \
    template ModelState<T> make_model<T>(ModelSpec, Tensor<T>);                                                    \
    template void check_batch<T>(const ModelState<T>&, const Tensor<T>&);                                          \
    template NetworkNodes append_network<T>(Graph<T>&, const ModelState<T>&, NodeId, bool);                        \
    template Tensor<T> forward_logits<T>(const ModelState<T>&, const Tensor<T>&);                                  \
    template T forward_cross_entropy<T>(const ModelState<T>&, const Tensor<T>&, std::span<const std::int32_t>);   \
    template GradResult<T> backward<T>(const ModelState<T>&, const Tensor<T>&, std::span<const std::int32_t>,      \
                                       GradTarget, const Tensor<T>*, Reduction);                                   \
    template Labels argmax_rows<T>(const Tensor<T>&);                                                              \
    template Labels predict<T>(const ModelState<T>&, const Tensor<T>&);                                            \
    template double param_distance<T>(const ModelState<T>&, const ModelState<T>&);                                 \
    template T ensemble_loss<T>(std::span<const ModelState<T>>, const Tensor<T>&, std::span<const std::int32_t>); \
    template GradResult<T> ensemble_backward<T>(std::span<const ModelState<T>>, const Tensor<T>&,                  \
                                                std::span<const std::int32_t>, GradTarget, const Tensor<T>*,       \
                                                Reduction);                                                        \
    template Labels ensemble_predict<T>(std::span<const ModelState<T>>, const Tensor<T>&);                         \
    template std::uint64_t model_fingerprint<T>(const ModelState<T>&);

UAPFORGE_INSTANTIATE(float)
UAPFORGE_INSTANTIATE(double)
#undef UAPFORGE_INSTANTIATE

}  // namespace uapforge
