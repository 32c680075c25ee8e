// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uapforge/data.hpp"
#include "uapforge/model.hpp"
#include "uapforge/tensor.hpp"

namespace uapforge {

struct FoolingReport {
    std::string model_id;
    std::string delta_id;
    std::uint64_t dataset_fp = 0;
    std::string delta_hash;
    std::size_t n_evaluated = 0;
    std::size_t n_changed = 0;
    double fooling_ratio = 0.0;
    // Auxiliary, filled only when the dataset has labels.
    std::optional<std::size_t> clean_correct;
    std::optional<std::size_t> perturbed_correct;
    std::optional<std::size_t> correct_to_wrong;
    double delta_linf = 0.0;
    bool budget_exceeded = false;

    std::optional<double> clean_accuracy() const;
    std::optional<double> perturbed_accuracy() const;
};

struct EvalOptions {
    unsigned threads = 1;
    std::size_t chunk = 256;
    std::optional<double> epsilon;  // budget the perturbation claims to respect
    std::string model_id;           // defaults to the model fingerprint
    std::string delta_id;           // defaults to the content hash
};

/// Fraction of samples whose prediction changes under x -> clamp(x + delta, 0, 1).
/// Work is split into fixed chunks whose counts are merged in chunk order,
/// so the result does not depend on `threads`.
template <Real T>
FoolingReport fooling_ratio(const ModelState<T>& model, const Dataset& dataset, const Tensor<T>& delta,
                            const EvalOptions& options = {});

/// Content hash identifying a perturbation: git blob SHA-1 of its UAPT encoding.
template <Real T>
std::string delta_content_hash(const Tensor<T>& delta);

template <Real T>
struct NamedModel {
    std::string id;
    ModelState<T> model;
};

template <Real T>
struct NamedDelta {
    std::string surrogate;  // id of the model(s) the perturbation was crafted on
    Tensor<T> delta;
};

struct TransferMatrix {
    std::vector<std::string> surrogates;
    std::vector<std::string> targets;
    std::vector<std::vector<FoolingReport>> cells;  // [surrogate][target]
    std::vector<double> row_average;

    double ratio(std::size_t row, std::size_t col) const { return cells.at(row).at(col).fooling_ratio; }
};

template <Real T>
TransferMatrix transfer_matrix(std::span<const NamedModel<T>> targets, std::span<const NamedDelta<T>> deltas,
                               const Dataset& dataset, const EvalOptions& options = {});

enum class ReportFormat { json, csv };

ReportFormat parse_report_format(const std::string& name);

/// Rounds to 4 decimal places, the precision every report carries.
double round4(double value);

/// Deterministic JSON: sorted keys, reals rounded to 4 decimals, `config`
/// echoed verbatim under "config".
nlohmann::json report_to_json(const TransferMatrix& matrix, const nlohmann::json& config = nlohmann::json::object());
TransferMatrix report_from_json(const nlohmann::json& doc);

/// One row per cell: surrogate,target,fooling_ratio,n,dataset_fp,delta_hash.
std::string report_to_csv(const TransferMatrix& matrix);

void report_write(const TransferMatrix& matrix, const std::filesystem::path& path, ReportFormat format,
                  const nlohmann::json& config = nlohmann::json::object());

/// JSON text with a trailing newline, indented two spaces.
std::string dump_json(const nlohmann::json& doc);

}  // namespace uapforge
