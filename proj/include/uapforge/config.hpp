// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uapforge/attack.hpp"
#include "uapforge/data.hpp"
#include "uapforge/training.hpp"

namespace uapforge {

struct DatasetConfig {
    std::string source = "glyphs";  // glyphs | blobs | idx
    std::string images;             // idx only
    std::string labels;
    std::string test_images;        // optional held-out idx pair
    std::string test_labels;
    std::size_t n = 2000;           // synthetic training samples
    std::size_t test_size = 1000;   // synthetic held-out samples, or idx tail split when no test pair
    std::size_t num_classes = 10;
    std::size_t size = 16;          // glyph side length
    std::size_t strokes = 3;
    double thickness = 1.2;
    double jitter = 0.8;
    double shift = 1.5;
    double noise = 0.05;
    Shape shape{2};                 // blob sample shape
    double spread = 0.1;
    std::size_t subset_size = 500;  // crafting subset, 0 = whole training split
    std::uint64_t seed = 0;
};

struct ModelConfig {
    std::string name = "model";
    std::string arch = "cnn";  // logistic | mlp | cnn
    std::size_t width = 0;     // 0 = architecture default
    TrainConfig train;
    std::string checkpoint;    // explicit path; otherwise resolved through out/checkpoints/<name>.ref
};

struct EvalConfig {
    std::vector<std::string> targets;  // model names; empty = all models
    std::vector<std::string> deltas;   // artifact names or .uapt paths; empty = this run's perturbation
    std::string split = "test";        // test | train | craft
    unsigned threads = 1;
};

struct OutputConfig {
    std::string directory = "out";
    std::vector<std::string> formats{"json", "csv"};
};

struct AblateConfig {
    std::string axis;                   // order | rho | r | curriculum
    std::vector<nlohmann::json> values;
    std::vector<std::uint64_t> seeds;   // empty = the run seed
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string precision = "f32";
    DatasetConfig dataset;
    std::vector<ModelConfig> models{ModelConfig{}};
    AttackConfig attack;
    std::vector<std::string> surrogates;  // empty = first model
    std::string delta_name;               // empty = variant
    EvalConfig eval;
    OutputConfig output;
    std::optional<AblateConfig> ablate;
};

/// Dotted-path assignments ("attack.rho" -> 2) applied over the file.
using Overrides = std::vector<std::pair<std::string, nlohmann::json>>;

/// Parses a "section.key=value" flag. The value is read as JSON when it
/// parses, otherwise as a string.
std::pair<std::string, nlohmann::json> parse_override(const std::string& text);

/// Overrides from UAPFORGE_<SECTION>_<KEY> variables (UAPFORGE_SEED and
/// UAPFORGE_PRECISION for top-level keys). "__" inside KEY separates nested keys.
Overrides env_overrides(const std::map<std::string, std::string>& env);
Overrides env_overrides_from_process();

/// Precedence: flags > env > file > defaults. Unknown keys and out-of-range
/// values throw ConfigError naming the key.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const Overrides& env,
                          const Overrides& flags);

RunConfig run_config_from_json(const nlohmann::json& doc);

/// Fully resolved document (every key, defaults included).
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const AttackConfig& config);

/// Checks numeric ranges and that referenced input files exist.
void validate(const RunConfig& config);

struct DatasetSplits {
    Dataset train;
    Dataset test;   // may be empty when no held-out data is configured
    Dataset craft;  // seeded subset of train used for crafting
};

DatasetSplits resolve_datasets(const DatasetConfig& config);

}  // namespace uapforge
