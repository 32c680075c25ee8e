// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "uapforge/data.hpp"
#include "uapforge/model.hpp"

namespace uapforge {

struct TrainConfig {
    int epochs = 10;
    double lr = 0.05;
    std::size_t batch = 64;
    double momentum = 0.9;  // 0 gives plain mini-batch SGD
    std::uint64_t seed = 0;
};

/// Per-epoch running statistics, measured on each batch before its update.
struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

template <Real T>
struct TrainResult {
    ModelState<T> model;
    std::vector<EpochStats> history;
};

/// Empirical risk minimization of the mean cross-entropy on the dataset's
/// ground-truth labels with seeded mini-batch SGD. Throws DivergenceError
/// naming the epoch when the loss stops being finite.
template <Real T>
TrainResult<T> train_erm(ModelState<T> model, const Dataset& dataset, const TrainConfig& config);

/// Fraction of samples whose prediction matches the ground truth.
template <Real T>
double accuracy(const ModelState<T>& model, const Dataset& dataset);

}  // namespace uapforge
