// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uapforge/data.hpp"
#include "uapforge/model.hpp"
#include "uapforge/optim.hpp"
#include "uapforge/pseudo_labels.hpp"
#include "uapforge/tensor.hpp"

namespace uapforge {

/// Sequencing of the two inner minimizations inside a mini-batch.
enum class Order : std::uint8_t {
    model_first,  // parameters on clean data, then data against the moved model
    data_first,   // data against the clean model, then parameters on the moved data
    alternating,  // one parameter step, one data step, repeated
    none,         // no inner minimization: plain averaged-loss ascent
};

const char* order_name(Order order);
Order parse_order(const std::string& name);

/// Input dimensionality the default data radius refers to (3 x 224 x 224).
inline constexpr double kReferenceInputDim = 3.0 * 224.0 * 224.0;

struct AttackConfig {
    double epsilon = 10.0 / 255.0;  // l-inf budget of the perturbation, pixel scale
    int epochs = 20;
    std::size_t batch_size = 125;
    int model_steps = 10;
    int data_steps = 10;
    double rho = 1.0;      // max l2 parameter neighborhood
    double radius = 32.0;  // max l2 per-sample data neighborhood
    double gamma = 0.01;   // Adam learning rate of the perturbation
    Order order = Order::model_first;
    bool curriculum = true;
    bool clamp_data_box = false;
    bool rescale_radius = true;  // scale `radius` by sqrt(D / kReferenceInputDim)
    bool strict_budgets = false; // throw on the first budget violation
    std::uint64_t seed = 0;
    std::string variant = "dm-uap";
    AdamParams adam;
};

/// Throws ConfigError when a field is out of range.
void validate(const AttackConfig& config);

/// Presets: "dm-uap" (as given), "spgd" (rho = r = 0, order none),
/// "data-maximin" (rho = 0), "param-maximin" (r = 0).
AttackConfig apply_variant(AttackConfig config, const std::string& variant);

/// Radius actually used for inputs of `input_dim` values per sample.
double effective_radius(const AttackConfig& config, std::size_t input_dim);

struct ScheduleStep {
    double rho = 0.0;
    double radius = 0.0;
    double alpha_model = 0.0;
    double alpha_data = 0.0;
};

/// Neighborhood sizes and step sizes of epoch t (1-based). With the
/// curriculum on, rho_t = t*rho/T and r_t = t*r/T; off, the maxima are used
/// throughout. alpha_m = rho_t / K_m, alpha_d = 1.25 * r_t / K_d. Uses
/// config.radius as is (no rescaling).
ScheduleStep schedule(const AttackConfig& config, int t);

/// Perturbation with its Adam moments. The master copy is double; what the
/// models see is realize<T>(), rounded toward zero so |delta| <= epsilon
/// survives the narrowing.
struct UapState {
    Tensor<double> delta;
    AdamState adam;
    double epsilon = 0.0;
};

/// delta ~ U(-epsilon, epsilon) from `seed`.
UapState init_uap(const Shape& shape, double epsilon, std::uint64_t seed, AdamParams adam = {});

template <Real T>
Tensor<T> realize(const UapState& uap) {
    return round_toward_zero<T>(uap.delta);
}

/// theta* <- theta, then K_m normalized descent steps of size rho_t / K_m on
/// the batch's mean cross-entropy. The input model is not modified.
template <Real T>
ModelState<T> inner_model_opt(const ModelState<T>& model, const Tensor<T>& X, std::span<const std::int32_t> Y,
                              double rho_t, int steps);

/// X* <- X, then K_d per-sample l2-PGD steps of size 1.25 * r_t / K_d toward
/// lower loss under `models` (their mean loss for an ensemble). Samples are
/// processed independently.
template <Real T>
Tensor<T> inner_data_opt(std::span<const ModelState<T>> models, const Tensor<T>& X,
                         std::span<const std::int32_t> Y, double r_t, int steps, bool clamp_box = false);

template <Real T>
Tensor<T> inner_data_opt(const ModelState<T>& model, const Tensor<T>& X, std::span<const std::int32_t> Y,
                         double r_t, int steps, bool clamp_box = false) {
    return inner_data_opt(std::span<const ModelState<T>>(&model, 1), X, Y, r_t, steps, clamp_box);
}

struct UapUpdate {
    UapState state;
    double loss = 0.0;  // mean loss at the pre-update perturbation
};

/// One ascent step: Adam on the negated gradient of the mean cross-entropy
/// of models(X + delta), then clamp delta to [-epsilon, epsilon].
template <Real T>
UapUpdate uap_update(UapState uap, std::span<const ModelState<T>> models, const Tensor<T>& X,
                     std::span<const std::int32_t> Y, double gamma);

template <Real T>
UapUpdate uap_update(UapState uap, const ModelState<T>& model, const Tensor<T>& X, std::span<const std::int32_t> Y,
                     double gamma) {
    return uap_update(std::move(uap), std::span<const ModelState<T>>(&model, 1), X, Y, gamma);
}

/// Budget bookkeeping. Every mini-batch checks ||delta||_inf <= epsilon,
/// ||theta* - theta||_2 <= rho_t + kBudgetSlack per member and
/// ||x* - x||_2 <= r_t + kBudgetSlack per sample.
inline constexpr double kBudgetSlack = 1e-6;

struct BudgetStats {
    std::size_t checks = 0;
    std::size_t violations = 0;
    double max_param_excess = -1.0;  // max of (distance - rho_t); <= 0 when respected
    double max_data_excess = -1.0;
    double max_delta_excess = -1.0;
};

struct EpochLog {
    int epoch = 0;
    ScheduleStep schedule;
    double mean_loss = 0.0;
    double mean_param_distance = 0.0;
    double max_param_distance = 0.0;
    double mean_data_distance = 0.0;
    double max_data_distance = 0.0;
    double delta_linf = 0.0;
    double seconds = 0.0;
};

struct RunLog {
    std::vector<EpochLog> epochs;
    BudgetStats budgets;
    double effective_radius = 0.0;
    std::size_t batches = 0;
    double seconds = 0.0;
};

template <Real T>
struct CraftResult {
    Tensor<T> delta;
    UapState state;
    RunLog log;
};

/// Full crafting run over `dataset` against one model or an ensemble:
/// seeded init, per-epoch schedule, per-batch inner minimizations in the
/// configured order, then one perturbation update. Pseudo-labels come from
/// `cache` when given. Numeric failures are rethrown as NumericError with
/// epoch and batch context.
template <Real T>
CraftResult<T> craft(const AttackConfig& config, std::span<const ModelState<T>> models, const Dataset& dataset,
                     PseudoLabelCache<T>* cache = nullptr);

template <Real T>
CraftResult<T> craft(const AttackConfig& config, const ModelState<T>& model, const Dataset& dataset,
                     PseudoLabelCache<T>* cache = nullptr) {
    return craft(config, std::span<const ModelState<T>>(&model, 1), dataset, cache);
}

}  // namespace uapforge
