// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>
#include <span>

#include "uapforge/tensor.hpp"

namespace uapforge {

/// Gradients with a smaller l2 norm produce no step at all.
inline constexpr double kZeroGradNorm = 1e-12;

namespace detail {

template <Real T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

}  // namespace detail

/// In place: x <- x - alpha * g / ||g||_2. Returns false (and leaves x alone)
/// when ||g|| < kZeroGradNorm.
template <Real T>
bool normalized_step_inplace(std::span<T> x, std::span<const T> g, double alpha) {
    if (!(alpha >= 0.0)) throw Error("normalized step: step size must be >= 0");
    for (T v : g) {
        if (!std::isfinite(v)) throw NumericError("normalized step: non-finite gradient");
    }
    const double norm = l2_norm(g);
    if (norm < kZeroGradNorm) return false;
    const double scale = alpha / norm;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<T>(static_cast<double>(x[i]) - scale * static_cast<double>(g[i]));
    }
    return true;
}

/// theta - alpha * grad / ||grad||_2; theta unchanged for a (near-)zero gradient.
template <Real T>
Tensor<T> normalized_descent_step(const Tensor<T>& theta, const Tensor<T>& grad, double alpha) {
    detail::require_same_shape(theta, grad, "normalized_descent_step");
    Tensor<T> out = theta;
    normalized_step_inplace<T>(out.data(), grad.data(), alpha);
    return out;
}

/// In place: pull v back onto the radius ball around center when outside it.
template <Real T>
void l2_project_inplace(std::span<T> v, std::span<const T> center, double radius) {
    if (!(radius >= 0.0)) throw Error("l2_project: radius must be >= 0");
    for (T x : v) {
        if (!std::isfinite(x)) throw NumericError("l2_project: non-finite input");
    }
    const double dist = l2_distance(std::span<const T>(v), center);
    if (dist <= radius) return;
    // Rounding can leave the rescaled point a hair outside the ball; shrink
    // until the measured distance is within the radius so that projecting
    // twice changes nothing.
    const std::vector<T> orig(v.begin(), v.end());
    double scale = radius / dist;
    for (int attempt = 0; attempt < 64; ++attempt) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double c = static_cast<double>(center[i]);
            v[i] = static_cast<T>(c + (static_cast<double>(orig[i]) - c) * scale);
        }
        const double measured = l2_distance(std::span<const T>(v), center);
        if (measured <= radius) return;
        // The margin doubles per attempt and reaches the center (distance 0)
        // well before the attempts run out.
        scale *= std::min(radius / measured, 1.0) *
                 (1.0 - std::ldexp(static_cast<double>(std::numeric_limits<T>::epsilon()), attempt + 2));
        scale = std::max(scale, 0.0);
    }
    throw NumericError("l2_project: could not reach the ball surface");
}

template <Real T>
struct ProjectionSpec {
    Tensor<T> center;
    double radius = 0.0;
};

template <Real T>
Tensor<T> l2_project(const Tensor<T>& v, const ProjectionSpec<T>& spec) {
    detail::require_same_shape(v, spec.center, "l2_project");
    Tensor<T> out = v;
    l2_project_inplace<T>(out.data(), spec.center.data(), spec.radius);
    return out;
}

/// One targeted l2-PGD step on a single sample, in place: descend the loss
/// along the normalized gradient, project onto the ball, optionally clamp to
/// the [0, 1] pixel box. Clamping toward the box never leaves the ball because
/// the center itself lies in the box.
template <Real T>
void l2_pgd_step_inplace(std::span<T> x, std::span<const T> grad, double alpha, std::span<const T> center,
                         double radius, bool clamp_box) {
    normalized_step_inplace<T>(x, grad, alpha);
    l2_project_inplace<T>(x, center, radius);
    if (clamp_box) {
        for (T& v : x) v = std::clamp(v, T(0), T(1));
    }
}

template <Real T>
Tensor<T> l2_pgd_step(const Tensor<T>& x, const Tensor<T>& grad, double alpha, const ProjectionSpec<T>& spec,
                      bool clamp_box = false) {
    detail::require_same_shape(x, grad, "l2_pgd_step");
    detail::require_same_shape(x, spec.center, "l2_pgd_step");
    Tensor<T> out = x;
    l2_pgd_step_inplace<T>(out.data(), grad.data(), alpha, spec.center.data(), spec.radius, clamp_box);
    return out;
}

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moments live in double regardless of the run precision.
struct AdamState {
    Tensor<double> m;
    Tensor<double> v;
    std::uint64_t step = 0;
    AdamParams params;
};

inline AdamState make_adam_state(const Shape& shape, AdamParams params = {}) {
    return AdamState{Tensor<double>(shape), Tensor<double>(shape), 0, params};
}

struct AdamStep {
    Tensor<double> update;
    AdamState state;
};

/// Bias-corrected Adam. The returned update is -gamma * m_hat / (sqrt(v_hat) + eps)
/// and is meant to be added to the optimized variable; pass the negated loss
/// gradient to ascend.
inline AdamStep adam_step(AdamState state, const Tensor<double>& grad, double gamma) {
    if (!(gamma > 0.0)) throw Error("adam_step: learning rate must be positive");
    if (grad.shape() != state.m.shape()) throw ShapeError("adam_step: gradient shape differs from state");
    grad.check_finite("adam gradient");
    const AdamParams& p = state.params;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(p.beta1, t);
    const double c2 = 1.0 - std::pow(p.beta2, t);
    Tensor<double> update(grad.shape());
    for (std::size_t i = 0; i < grad.numel(); ++i) {
        const double g = grad[i];
        state.m[i] = p.beta1 * state.m[i] + (1.0 - p.beta1) * g;
        state.v[i] = p.beta2 * state.v[i] + (1.0 - p.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        update[i] = -gamma * m_hat / (std::sqrt(v_hat) + p.eps);
    }
    return AdamStep{std::move(update), std::move(state)};
}

}  // namespace uapforge
