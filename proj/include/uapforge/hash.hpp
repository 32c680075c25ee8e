// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uapforge {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a. Pass a previous result as `state` to hash incrementally.
constexpr std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t state = kFnvOffset) {
    for (std::uint8_t b : bytes) {
        state ^= b;
        state *= kFnvPrime;
    }
    return state;
}

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t state = kFnvOffset) {
    for (char c : s) {
        state ^= static_cast<std::uint8_t>(c);
        state *= kFnvPrime;
    }
    return state;
}

/// Fixed-width lowercase hex of a 64-bit value.
std::string hex64(std::uint64_t v);

/// SHA-1 over "blob <size>\0<content>", the way git names blobs.
std::string git_blob_hash(std::span<const std::uint8_t> content);

}  // namespace uapforge
