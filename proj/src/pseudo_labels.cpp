// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/pseudo_labels.hpp"

#include <algorithm>
#include <numeric>

namespace uapforge {

template <Real T>
Labels predict_dataset(std::span<const ModelState<T>> models, const Dataset& dataset, std::size_t chunk) {
    if (models.empty()) throw Error("predict_dataset: no models");
    if (dataset.sample_shape() != models[0].spec.input_shape) {
        throw ShapeError("dataset sample shape " + shape_str(dataset.sample_shape()) + " does not match model input " +
                         shape_str(models[0].spec.input_shape));
    }
    Labels out;
    out.reserve(dataset.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < dataset.size(); start += chunk) {
        const std::size_t end = std::min(dataset.size(), start + chunk);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Labels part = ensemble_predict(models, gather_images<T>(dataset, idx));
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

template Labels predict_dataset<float>(std::span<const ModelState<float>>, const Dataset&, std::size_t);
template Labels predict_dataset<double>(std::span<const ModelState<double>>, const Dataset&, std::size_t);

}  // namespace uapforge
