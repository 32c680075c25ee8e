// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uapforge/model.hpp"
#include "uapforge/tensor.hpp"
#include "uapforge/training.hpp"

namespace uapforge {

/// A model checkpoint is `<stem>.uapt` (flat parameter tensor) next to
/// `<stem>.json` (spec, seed, training config, dataset fingerprint, history).
struct CheckpointMeta {
    std::uint64_t seed = 0;
    TrainConfig train;
    std::uint64_t dataset_fp = 0;
    std::string dataset_name;
    std::vector<EpochStats> history;
    nlohmann::json extra = nlohmann::json::object();
};

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

template <Real T>
nlohmann::json checkpoint_sidecar(const ModelState<T>& model, const CheckpointMeta& meta);

/// Writes both files; returns the git blob hash of the tensor file.
template <Real T>
std::string save_checkpoint(const std::filesystem::path& tensor_path, const ModelState<T>& model,
                            const CheckpointMeta& meta);

template <Real T>
struct LoadedCheckpoint {
    ModelState<T> model;
    nlohmann::json sidecar;
};

/// Reads a checkpoint in either stored precision and converts to T. Throws
/// IoError when a file is missing and FormatError when they disagree.
template <Real T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& tensor_path);

/// Perturbation artifact: `<stem>.uapt` plus `<stem>.json` metadata. The
/// metadata gains "content_hash" (git blob hash of the tensor file).
template <Real T>
std::string save_delta_artifact(const std::filesystem::path& tensor_path, const Tensor<T>& delta,
                                nlohmann::json metadata);

template <Real T>
struct LoadedDelta {
    Tensor<T> delta;
    nlohmann::json metadata;  // empty object when no sidecar exists
};

template <Real T>
LoadedDelta<T> load_delta_artifact(const std::filesystem::path& tensor_path);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace uapforge
