// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uapforge/errors.hpp"

namespace uapforge {

template <class T>
concept Real = std::same_as<T, float> || std::same_as<T, double>;

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Dense row-major array. Extents are positive; data length always equals
/// the product of the extents.
template <Real T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        validate_extents();
        data_.assign(shape_numel(shape_), T(0));
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_extents();
        if (data_.size() != shape_numel(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
        }
    }

    static Tensor filled(Shape shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const noexcept { return data_.size(); }
    bool empty() const noexcept { return shape_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Same data, new extents of equal total size.
    Tensor reshaped(Shape shape) const {
        return Tensor(std::move(shape), data_);
    }

    bool all_finite() const noexcept {
        for (T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    /// Throws NumericError naming `what` when any element is NaN/Inf.
    const Tensor& check_finite(const char* what) const {
        if (!all_finite()) throw NumericError(std::string("non-finite values in ") + what);
        return *this;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void validate_extents() const {
        for (std::size_t d : shape_) {
            if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

template <Real To, Real From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
    if constexpr (std::same_as<To, From>) {
        return src;
    } else {
        std::vector<To> out(src.numel());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(src[i]);
        return Tensor<To>(src.shape(), std::move(out));
    }
}

/// Euclidean norm accumulated in double, left-to-right.
template <Real T>
double l2_norm(std::span<const T> v) {
    double acc = 0.0;
    for (T x : v) acc += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(acc);
}

template <Real A, Real B>
double l2_distance(std::span<const A> a, std::span<const B> b) {
    if (a.size() != b.size()) throw ShapeError("l2_distance: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

template <Real T>
double linf_norm(std::span<const T> v) {
    double m = 0.0;
    for (T x : v) m = std::max(m, std::abs(static_cast<double>(x)));
    return m;
}

template <Real A, Real B>
double max_abs_diff(std::span<const A> a, std::span<const B> b) {
    if (a.size() != b.size()) throw ShapeError("max_abs_diff: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

/// Rounds `target` into T so that every element of the result lies between
/// `anchor` and `target` (inclusive). Budgets measured from the anchor are
/// therefore never inflated by the narrowing conversion.
template <Real T>
Tensor<T> round_toward(const Tensor<double>& target, const Tensor<T>& anchor) {
    if (target.shape() != anchor.shape()) throw ShapeError("round_toward: shape mismatch");
    std::vector<T> out(target.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double want = target[i];
        T r = static_cast<T>(want);
        const double a = static_cast<double>(anchor[i]);
        if (std::abs(static_cast<double>(r) - a) > std::abs(want - a)) {
            r = std::nextafter(r, anchor[i]);
        }
        out[i] = r;
    }
    return Tensor<T>(target.shape(), std::move(out));
}

/// round_toward with a zero anchor; magnitudes never grow.
template <Real T>
Tensor<T> round_toward_zero(const Tensor<double>& target) {
    return round_toward(target, Tensor<T>(target.shape()));
}

}  // namespace uapforge
