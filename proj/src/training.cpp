// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/training.hpp"

#include <cmath>
#include <string>

#include "uapforge/pseudo_labels.hpp"
#include "uapforge/rng.hpp"

namespace uapforge {

template <Real T>
TrainResult<T> train_erm(ModelState<T> model, const Dataset& dataset, const TrainConfig& config) {
    if (!dataset.labels) throw ConfigError("train_erm: dataset has no labels");
    if (!(config.lr > 0.0)) throw ConfigError("train_erm: learning rate must be positive");
    if (config.epochs < 0 || config.batch == 0) throw ConfigError("train_erm: invalid epochs or batch size");
    if (dataset.num_classes > model.num_classes()) {
        throw ShapeError("train_erm: dataset has " + std::to_string(dataset.num_classes) + " classes, model " +
                         std::to_string(model.num_classes()));
    }
    TrainResult<T> result;
    std::vector<double> velocity(model.params.numel(), 0.0);
    const std::uint64_t shuffle_seed = derive_seed(config.seed, "shuffle");
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t correct = 0;
        try {
            for (auto& batch : minibatches<T>(dataset, *dataset.labels, config.batch,
                                              shuffle_seed ^ static_cast<std::uint64_t>(epoch))) {
                const Labels pred = predict(model, batch.X);
                for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.Y[i];
                const GradResult<T> g = backward(model, batch.X, batch.Y, GradTarget::parameters);
                if (!std::isfinite(static_cast<double>(g.loss))) throw NumericError("loss is not finite");
                loss_sum += static_cast<double>(g.loss) * static_cast<double>(batch.Y.size());
                auto p = model.params.data();
                for (std::size_t k = 0; k < p.size(); ++k) {
                    velocity[k] = config.momentum * velocity[k] + static_cast<double>(g.grad[k]);
                    p[k] = static_cast<T>(static_cast<double>(p[k]) - config.lr * velocity[k]);
                }
                if (!model.params.all_finite()) throw NumericError("parameters are not finite");
            }
        } catch (const NumericError& e) {
            throw DivergenceError(epoch, "training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const double n = static_cast<double>(dataset.size());
        result.history.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n});
    }
    result.model = std::move(model);
    return result;
}

template <Real T>
double accuracy(const ModelState<T>& model, const Dataset& dataset) {
    if (!dataset.labels) throw ConfigError("accuracy: dataset has no labels");
    const Labels pred = predict_dataset(model, dataset);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == (*dataset.labels)[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

template TrainResult<float> train_erm<float>(ModelState<float>, const Dataset&, const TrainConfig&);
template TrainResult<double> train_erm<double>(ModelState<double>, const Dataset&, const TrainConfig&);
template double accuracy<float>(const ModelState<float>&, const Dataset&);
template double accuracy<double>(const ModelState<double>&, const Dataset&);

}  // namespace uapforge
