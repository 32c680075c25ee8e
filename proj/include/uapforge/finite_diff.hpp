// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <concepts>
#include <string>

#include "uapforge/tensor.hpp"

namespace uapforge {

/// Central-difference gradient estimate of a scalar function, one coordinate
/// at a time: (f(x + h e_i) - f(x - h e_i)) / 2h. Gradient-check oracle.
template <Real T, class F>
    requires std::invocable<F&, const Tensor<T>&>
Tensor<T> finite_difference_gradient(F&& loss_fn, const Tensor<T>& x, T h) {
    if (!(h > T(0))) throw Error("finite_difference_gradient: step must be positive");
    Tensor<T> grad(x.shape());
    Tensor<T> probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const T orig = probe[i];
        probe[i] = orig + h;
        const T up = static_cast<T>(loss_fn(static_cast<const Tensor<T>&>(probe)));
        probe[i] = orig - h;
        const T down = static_cast<T>(loss_fn(static_cast<const Tensor<T>&>(probe)));
        probe[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_difference_gradient: non-finite probe at coordinate " +
                               std::to_string(i));
        }
        grad[i] = (up - down) / (T(2) * h);
    }
    return grad;
}

}  // namespace uapforge
