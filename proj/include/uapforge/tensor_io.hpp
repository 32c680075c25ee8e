// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "uapforge/tensor.hpp"

namespace uapforge {

// Container layout (all integers little-endian):
//   "UAPT" | version:u32 | rank:u32 | extent:u32 x rank | dtype:u8 | raw data
inline constexpr std::uint32_t kTensorFormatVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <Real T>
constexpr DType dtype_of() {
    return std::same_as<T, float> ? DType::f32 : DType::f64;
}

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

template <Real T>
std::vector<std::uint8_t> encode_tensor(const Tensor<T>& t);

AnyTensor decode_tensor(const std::vector<std::uint8_t>& bytes);

template <Real T>
void write_tensor(const std::filesystem::path& path, const Tensor<T>& t);

AnyTensor read_tensor_any(const std::filesystem::path& path);

/// Reads a container of either dtype and converts to T.
template <Real T>
Tensor<T> read_tensor(const std::filesystem::path& path) {
    return std::visit([](const auto& t) { return tensor_cast<T>(t); }, read_tensor_any(path));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace uapforge
