// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>

#include "uapforge/data.hpp"
#include "uapforge/model.hpp"
#include "uapforge/rng.hpp"

namespace uapforge {

/// Predictions of the (mean-logit) ensemble over a whole dataset, in chunks.
template <Real T>
Labels predict_dataset(std::span<const ModelState<T>> models, const Dataset& dataset, std::size_t chunk = 256);

template <Real T>
Labels predict_dataset(const ModelState<T>& model, const Dataset& dataset, std::size_t chunk = 256) {
    return predict_dataset(std::span<const ModelState<T>>(&model, 1), dataset, chunk);
}

/// Labels assigned by the clean surrogate(s), computed once per
/// (models, dataset) pair and served from the cache afterwards.
template <Real T>
class PseudoLabelCache {
public:
    const Labels& get(std::span<const ModelState<T>> models, const Dataset& dataset) {
        std::uint64_t key = kFnvOffset;
        for (const auto& m : models) key = splitmix64(key ^ model_fingerprint(m));
        auto [it, inserted] = cache_.try_emplace({key, dataset.fingerprint});
        if (inserted) {
            it->second = predict_dataset(models, dataset);
            ++computations_;
        }
        return it->second;
    }

    const Labels& get(const ModelState<T>& model, const Dataset& dataset) {
        return get(std::span<const ModelState<T>>(&model, 1), dataset);
    }

    /// Number of cache misses so far.
    std::size_t computations() const noexcept { return computations_; }

private:
    std::map<std::pair<std::uint64_t, std::uint64_t>, Labels> cache_;
    std::size_t computations_ = 0;
};

}  // namespace uapforge
