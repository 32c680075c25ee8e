// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "uapforge/rng.hpp"

namespace uapforge {

using autodiff::Reduction;

const char* order_name(Order order) {
    switch (order) {
        case Order::model_first: return "model_first";
        case Order::data_first: return "data_first";
        case Order::alternating: return "alternating";
        case Order::none: return "none";
    }
    return "unknown";
}

Order parse_order(const std::string& name) {
    for (Order o : {Order::model_first, Order::data_first, Order::alternating, Order::none}) {
        if (name == order_name(o)) return o;
    }
    throw ConfigError("unknown optimization order '" + name + "'");
}

void validate(const AttackConfig& c) {
    auto fail = [](const std::string& key, const std::string& why) { throw ConfigError("attack." + key + ": " + why); };
    if (!(c.epsilon >= 0.0) || !std::isfinite(c.epsilon)) fail("epsilon", "must be finite and >= 0");
    if (!(c.rho >= 0.0) || !std::isfinite(c.rho)) fail("rho", "must be finite and >= 0");
    if (!(c.radius >= 0.0) || !std::isfinite(c.radius)) fail("r", "must be finite and >= 0");
    if (c.epochs < 1) fail("epochs", "must be >= 1");
    if (c.batch_size < 1) fail("batch_size", "must be >= 1");
    if (c.model_steps < 1) fail("model_steps", "must be >= 1");
    if (c.data_steps < 1) fail("data_steps", "must be >= 1");
    if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) fail("gamma", "must be finite and > 0");
    if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0)) throw ConfigError("adam.beta1: must lie in [0,1)");
    if (!(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) throw ConfigError("adam.beta2: must lie in [0,1)");
    if (!(c.adam.eps > 0.0)) throw ConfigError("adam.eps: must be > 0");
}

AttackConfig apply_variant(AttackConfig c, const std::string& variant) {
    if (variant == "dm-uap") {
    } else if (variant == "spgd") {
        c.rho = 0.0;
        c.radius = 0.0;
        c.order = Order::none;
    } else if (variant == "data-maximin") {
        c.rho = 0.0;
    } else if (variant == "param-maximin") {
        c.radius = 0.0;
    } else {
        throw ConfigError("attack.variant: unknown variant '" + variant + "'");
    }
    c.variant = variant;
    return c;
}

double effective_radius(const AttackConfig& config, std::size_t input_dim) {
    if (!config.rescale_radius) return config.radius;
    return config.radius * std::sqrt(static_cast<double>(input_dim) / kReferenceInputDim);
}

ScheduleStep schedule(const AttackConfig& c, int t) {
    if (t < 1 || t > c.epochs) {
        throw ConfigError("schedule: epoch " + std::to_string(t) + " outside [1," + std::to_string(c.epochs) + "]");
    }
    ScheduleStep s;
    if (c.curriculum && t < c.epochs) {
        s.rho = static_cast<double>(t) * c.rho / static_cast<double>(c.epochs);
        s.radius = static_cast<double>(t) * c.radius / static_cast<double>(c.epochs);
    } else {
        s.rho = c.rho;
        s.radius = c.radius;
    }
    s.alpha_model = s.rho / static_cast<double>(c.model_steps);
    s.alpha_data = 1.25 * s.radius / static_cast<double>(c.data_steps);
    return s;
}

UapState init_uap(const Shape& shape, double epsilon, std::uint64_t seed, AdamParams adam) {
    if (!(epsilon >= 0.0)) throw ConfigError("init_uap: epsilon must be >= 0");
    Rng rng(seed);
    Tensor<double> delta(shape);
    for (double& v : delta.data()) v = std::clamp(rng.uniform(-epsilon, epsilon), -epsilon, epsilon);
    return UapState{std::move(delta), make_adam_state(shape, adam), epsilon};
}

namespace {

/// theta* during one mini-batch. The walk is accumulated in double; the
/// model the network evaluates is rounded toward the clean parameters, so its
/// distance from them never exceeds the exact walk's.
template <Real T>
class ModelWalk {
public:
    explicit ModelWalk(const ModelState<T>& anchor)
        : anchor_(&anchor), master_(tensor_cast<double>(anchor.params)), current_(anchor) {}

    void step(const Tensor<T>& X, std::span<const std::int32_t> Y, double alpha) {
        if (alpha == 0.0) return;
        const GradResult<T> g = backward(current_, X, Y, GradTarget::parameters);
        const Tensor<double> gd = tensor_cast<double>(g.grad);
        if (normalized_step_inplace<double>(master_.data(), gd.data(), alpha)) {
            current_.params = round_toward(master_, anchor_->params);
        }
    }

    const ModelState<T>& current() const { return current_; }
    ModelState<T> release() && { return std::move(current_); }

    double distance() const { return l2_distance(current_.params.data(), anchor_->params.data()); }

private:
    const ModelState<T>* anchor_;
    Tensor<double> master_;
    ModelState<T> current_;
};

template <Real T>
void data_step(std::span<const ModelState<T>> models, Tensor<T>& Xs, const Tensor<T>& X,
               std::span<const std::int32_t> Y, double alpha, double radius, bool clamp_box) {
    if (alpha == 0.0) return;
    // Summed loss: each row of the gradient is exactly the single-sample
    // gradient, and the per-sample normalization discards the scale anyway.
    const GradResult<T> g = ensemble_backward<T>(models, Xs, Y, GradTarget::input, nullptr, Reduction::sum);
    const std::size_t per = Xs.numel() / Xs.dim(0);
    for (std::size_t i = 0; i < Xs.dim(0); ++i) {
        l2_pgd_step_inplace<T>(Xs.data().subspan(i * per, per), g.grad.data().subspan(i * per, per), alpha,
                               X.data().subspan(i * per, per), radius, clamp_box);
    }
}

template <Real T>
std::vector<double> sample_distances(const Tensor<T>& Xs, const Tensor<T>& X) {
    const std::size_t per = X.numel() / X.dim(0);
    std::vector<double> d(X.dim(0));
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = l2_distance(Xs.data().subspan(i * per, per), X.data().subspan(i * per, per));
    }
    return d;
}

template <Real T>
std::vector<ModelState<T>> snapshot(std::vector<ModelWalk<T>>& walks) {
    std::vector<ModelState<T>> out;
    out.reserve(walks.size());
    for (const auto& w : walks) out.push_back(w.current());
    return out;
}

}  // namespace

template <Real T>
ModelState<T> inner_model_opt(const ModelState<T>& model, const Tensor<T>& X, std::span<const std::int32_t> Y,
                              double rho_t, int steps) {
    if (!(rho_t >= 0.0)) throw ConfigError("inner_model_opt: rho_t must be >= 0");
    if (steps < 1) throw ConfigError("inner_model_opt: need at least one step");
    ModelWalk<T> walk(model);
    const double alpha = rho_t / static_cast<double>(steps);
    for (int k = 0; k < steps; ++k) walk.step(X, Y, alpha);
    return std::move(walk).release();
}

template <Real T>
Tensor<T> inner_data_opt(std::span<const ModelState<T>> models, const Tensor<T>& X,
                         std::span<const std::int32_t> Y, double r_t, int steps, bool clamp_box) {
    if (!(r_t >= 0.0)) throw ConfigError("inner_data_opt: r_t must be >= 0");
    if (steps < 1) throw ConfigError("inner_data_opt: need at least one step");
    Tensor<T> Xs = X;
    const double alpha = 1.25 * r_t / static_cast<double>(steps);
    for (int k = 0; k < steps; ++k) data_step(models, Xs, X, Y, alpha, r_t, clamp_box);
    return Xs;
}

template <Real T>
UapUpdate uap_update(UapState uap, std::span<const ModelState<T>> models, const Tensor<T>& X,
                     std::span<const std::int32_t> Y, double gamma) {
    const Tensor<T> delta = realize<T>(uap);
    const GradResult<T> g = ensemble_backward(models, X, Y, GradTarget::perturbation, &delta);
    Tensor<double> ascent = tensor_cast<double>(g.grad);
    for (double& v : ascent.data()) v = -v;
    AdamStep step = adam_step(std::move(uap.adam), ascent, gamma);
    uap.adam = std::move(step.state);
    for (std::size_t i = 0; i < uap.delta.numel(); ++i) {
        uap.delta[i] = std::clamp(uap.delta[i] + step.update[i], -uap.epsilon, uap.epsilon);
    }
    return UapUpdate{std::move(uap), static_cast<double>(g.loss)};
}

template <Real T>
CraftResult<T> craft(const AttackConfig& config, std::span<const ModelState<T>> models, const Dataset& dataset,
                     PseudoLabelCache<T>* cache) {
    validate(config);
    if (models.empty()) throw ConfigError("craft: no surrogate models");
    if (dataset.sample_shape() != models[0].spec.input_shape) {
        throw ShapeError("craft: dataset sample shape " + shape_str(dataset.sample_shape()) +
                         " does not match model input " + shape_str(models[0].spec.input_shape));
    }
    using Clock = std::chrono::steady_clock;
    const auto run_start = Clock::now();

    AttackConfig cfg = config;
    cfg.radius = effective_radius(config, dataset.images.numel() / dataset.size());
    cfg.rescale_radius = false;

    PseudoLabelCache<T> local_cache;
    const Labels& labels = [&]() -> const Labels& {
        try {
            return (cache ? *cache : local_cache).get(models, dataset);
        } catch (const NumericError& e) {
            throw NumericError(std::string("craft failed while computing pseudo-labels: ") + e.what());
        }
    }();

    UapState uap = init_uap(dataset.sample_shape(), cfg.epsilon, derive_seed(cfg.seed, "init-delta"), cfg.adam);
    RunLog log;
    log.effective_radius = cfg.radius;
    const std::uint64_t shuffle_seed = derive_seed(cfg.seed, "shuffle");

    auto record = [&](double excess, double& slot) {
        slot = std::max(slot, excess);
        ++log.budgets.checks;
        if (excess > kBudgetSlack) {
            ++log.budgets.violations;
            if (cfg.strict_budgets) throw NumericError("budget violated by " + std::to_string(excess));
        }
    };

    for (int t = 1; t <= cfg.epochs; ++t) {
        const auto epoch_start = Clock::now();
        const ScheduleStep s = schedule(cfg, t);
        EpochLog ep;
        ep.epoch = t;
        ep.schedule = s;
        double loss_sum = 0.0, param_sum = 0.0, data_sum = 0.0;
        std::size_t param_count = 0, data_count = 0, sample_count = 0;

        const auto batches = minibatches<T>(dataset, labels, cfg.batch_size, shuffle_seed ^ static_cast<std::uint64_t>(t));
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const Batch<T>& batch = batches[b];
            try {
                std::vector<ModelWalk<T>> walks;
                walks.reserve(models.size());
                for (const auto& m : models) walks.emplace_back(m);
                Tensor<T> Xs = batch.X;

                auto model_phase = [&](const Tensor<T>& data, int steps) {
                    for (int k = 0; k < steps; ++k) {
                        for (auto& w : walks) w.step(data, batch.Y, s.alpha_model);
                    }
                };
                switch (cfg.order) {
                    case Order::model_first: {
                        model_phase(batch.X, cfg.model_steps);
                        const auto moved = snapshot(walks);
                        for (int k = 0; k < cfg.data_steps; ++k) {
                            data_step<T>(moved, Xs, batch.X, batch.Y, s.alpha_data, s.radius, cfg.clamp_data_box);
                        }
                        break;
                    }
                    case Order::data_first:
                        for (int k = 0; k < cfg.data_steps; ++k) {
                            data_step<T>(models, Xs, batch.X, batch.Y, s.alpha_data, s.radius, cfg.clamp_data_box);
                        }
                        model_phase(Xs, cfg.model_steps);
                        break;
                    case Order::alternating: {
                        const int rounds = std::max(cfg.model_steps, cfg.data_steps);
                        for (int k = 0; k < rounds; ++k) {
                            if (k < cfg.model_steps) model_phase(Xs, 1);
                            if (k < cfg.data_steps) {
                                const auto moved = snapshot(walks);
                                data_step<T>(moved, Xs, batch.X, batch.Y, s.alpha_data, s.radius, cfg.clamp_data_box);
                            }
                        }
                        break;
                    }
                    case Order::none:
                        break;
                }

                for (const auto& w : walks) {
                    const double d = w.distance();
                    param_sum += d;
                    ++param_count;
                    ep.max_param_distance = std::max(ep.max_param_distance, d);
                    record(d - s.rho, log.budgets.max_param_excess);
                }
                for (double d : sample_distances(Xs, batch.X)) {
                    data_sum += d;
                    ++data_count;
                    ep.max_data_distance = std::max(ep.max_data_distance, d);
                    record(d - s.radius, log.budgets.max_data_excess);
                }

                const auto thetas = snapshot(walks);
                UapUpdate up = uap_update<T>(std::move(uap), thetas, Xs, batch.Y, cfg.gamma);
                uap = std::move(up.state);
                loss_sum += up.loss * static_cast<double>(batch.Y.size());
                sample_count += batch.Y.size();
                const Tensor<T> realized = realize<T>(uap);
                record(linf_norm(realized.data()) - cfg.epsilon, log.budgets.max_delta_excess);
                ++log.batches;
            } catch (const NumericError& e) {
                throw NumericError("craft failed in epoch " + std::to_string(t) + ", batch " + std::to_string(b + 1) +
                                   ": " + e.what());
            }
        }
        ep.mean_loss = loss_sum / static_cast<double>(sample_count);
        ep.mean_param_distance = param_count ? param_sum / static_cast<double>(param_count) : 0.0;
        ep.mean_data_distance = data_count ? data_sum / static_cast<double>(data_count) : 0.0;
        ep.delta_linf = linf_norm<double>(uap.delta.data());
        ep.seconds = std::chrono::duration<double>(Clock::now() - epoch_start).count();
        log.epochs.push_back(ep);
    }
    log.seconds = std::chrono::duration<double>(Clock::now() - run_start).count();
    Tensor<T> delta = realize<T>(uap);
    return CraftResult<T>{std::move(delta), std::move(uap), std::move(log)};
}

#define UAPFORGE_INSTANTIATE(T)                                                                                   \
    template ModelState<T> inner_model_opt<T>(const ModelState<T>&, const Tensor<T>&,                             \
                                              std::span<const std::int32_t>, double, int);                        \
    template Tensor<T> inner_data_opt<T>(std::span<const ModelState<T>>, const Tensor<T>&,                        \
                                         std::span<const std::int32_t>, double, int, bool);                       \
    template UapUpdate uap_update<T>(UapState, std::span<const ModelState<T>>, const Tensor<T>&,                  \
                                     std::span<const std::int32_t>, double);                                      \
    template CraftResult<T> craft<T>(const AttackConfig&, std::span<const ModelState<T>>, const Dataset&,         \
                                     PseudoLabelCache<T>*);

UAPFORGE_INSTANTIATE(float)
UAPFORGE_INSTANTIATE(double)
#undef UAPFORGE_INSTANTIATE

}  // namespace uapforge
