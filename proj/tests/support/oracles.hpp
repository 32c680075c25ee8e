// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations used as test oracles. They share no
// code with the library beyond the plain data types: every loop is written
// out again, naively, on std::vector<double>.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "uapforge/model.hpp"
#include "uapforge/rng.hpp"

namespace oracle {

using Vec = std::vector<double>;

/// Softmax then negative log, no max shift. Fine for moderate logits.
inline double naive_ce(const Vec& logits, int label) {
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    return -std::log(std::exp(logits[static_cast<std::size_t>(label)]) / z);
}

struct Trace {
    Vec logits;
    double min_relu_margin = std::numeric_limits<double>::infinity();  // min |pre-activation|
    double min_pool_gap = std::numeric_limits<double>::infinity();     // min (max - runner-up) per window
};

/// Layer-by-layer forward of one sample, channels-first.
inline Trace naive_forward(const uapforge::ModelState<double>& model, const Vec& sample) {
    using uapforge::LayerKind;
    const auto& spec = model.spec;
    const auto plans = spec.plan();
    const double* theta = model.params.data().data();
    Trace tr;
    Vec x = sample;
    std::vector<std::size_t> shape(spec.input_shape.begin(), spec.input_shape.end());
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const auto& l = spec.layers[li];
        const double* w = theta + plans[li].weight_offset;
        const double* b = theta + plans[li].bias_offset;
        switch (l.kind) {
            case LayerKind::dense: {
                Vec y(l.out, 0.0);
                for (std::size_t o = 0; o < l.out; ++o) {
                    double s = b[o];
                    for (std::size_t i = 0; i < l.in; ++i) s += x[i] * w[i * l.out + o];
                    y[o] = s;
                }
                x = y;
                shape = {l.out};
                break;
            }
            case LayerKind::conv2d: {
                const std::size_t C = shape[0], H = shape[1], W = shape[2], k = l.kernel;
                const long pad = static_cast<long>(l.pad);
                const std::size_t OH = H + 2 * l.pad - k + 1, OW = W + 2 * l.pad - k + 1;
                Vec y(l.out * OH * OW, 0.0);
                for (std::size_t o = 0; o < l.out; ++o)
                    for (std::size_t oy = 0; oy < OH; ++oy)
                        for (std::size_t ox = 0; ox < OW; ++ox) {
                            double s = b[o];
                            for (std::size_t c = 0; c < C; ++c)
                                for (std::size_t ki = 0; ki < k; ++ki)
                                    for (std::size_t kj = 0; kj < k; ++kj) {
                                        const long iy = static_cast<long>(oy + ki) - pad;
                                        const long ix = static_cast<long>(ox + kj) - pad;
                                        if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                                        s += x[(c * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)] *
                                             w[((o * C + c) * k + ki) * k + kj];
                                    }
                            y[(o * OH + oy) * OW + ox] = s;
                        }
                x = y;
                shape = {l.out, OH, OW};
                break;
            }
            case LayerKind::relu:
                for (double& v : x) {
                    tr.min_relu_margin = std::min(tr.min_relu_margin, std::abs(v));
                    v = std::max(v, 0.0);
                }
                break;
            case LayerKind::maxpool2: {
                const std::size_t C = shape[0], H = shape[1], W = shape[2];
                Vec y(C * (H / 2) * (W / 2));
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < H / 2; ++i)
                        for (std::size_t j = 0; j < W / 2; ++j) {
                            Vec win{x[(c * H + 2 * i) * W + 2 * j], x[(c * H + 2 * i) * W + 2 * j + 1],
                                    x[(c * H + 2 * i + 1) * W + 2 * j], x[(c * H + 2 * i + 1) * W + 2 * j + 1]};
                            Vec sorted = win;
                            std::sort(sorted.begin(), sorted.end());
                            // All-dead windows after a ReLU tie at exactly zero and stay dead under small probes.
                            if (sorted[3] != 0.0) tr.min_pool_gap = std::min(tr.min_pool_gap, sorted[3] - sorted[2]);
                            y[(c * (H / 2) + i) * (W / 2) + j] = sorted[3];
                        }
                x = y;
                shape = {C, H / 2, W / 2};
                break;
            }
            case LayerKind::flatten:
                shape = {x.size()};
                break;
            case LayerKind::normalize: {
                const std::size_t C = shape[0], per = x.size() / C;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t i = 0; i < per; ++i) x[c * per + i] = (x[c * per + i] - l.mean[c]) / l.stddev[c];
                break;
            }
        }
    }
    tr.logits = x;
    return tr;
}

inline int naive_argmax(const Vec& v) {
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

inline Vec sample_row(const uapforge::Tensor<double>& X, std::size_t i) {
    const std::size_t per = X.numel() / X.dim(0);
    return Vec(X.data().begin() + static_cast<long>(i * per), X.data().begin() + static_cast<long>((i + 1) * per));
}

/// Mean naive cross-entropy over a batch.
inline double naive_batch_loss(const uapforge::ModelState<double>& model, const uapforge::Tensor<double>& X,
                               const std::vector<std::int32_t>& Y) {
    double s = 0.0;
    for (std::size_t i = 0; i < Y.size(); ++i) s += naive_ce(naive_forward(model, sample_row(X, i)).logits, Y[i]);
    return s / static_cast<double>(Y.size());
}

/// Element-wise relative error with an absolute floor in the denominator.
inline double max_rel_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

template <uapforge::Real T>
uapforge::Tensor<T> random_tensor(uapforge::Rng& rng, uapforge::Shape shape, double lo, double hi) {
    uapforge::Tensor<T> t(std::move(shape));
    for (T& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

inline std::vector<std::int32_t> random_labels(uapforge::Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::int32_t> y(n);
    for (auto& v : y) v = static_cast<std::int32_t>(rng.below(k));
    return y;
}

/// Euclidean distance between two same-size tensors, written out.
template <uapforge::Real T>
double dist(const uapforge::Tensor<T>& a, const uapforge::Tensor<T>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace oracle
