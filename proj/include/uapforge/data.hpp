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

#include "uapforge/model.hpp"
#include "uapforge/tensor.hpp"

namespace uapforge {

/// Images [n, C, H, W] with pixel values in [0, 1], optional labels.
/// Immutable once built; the fingerprint is FNV-1a over the little-endian
/// float32 image bytes.
struct Dataset {
    std::string name;
    Tensor<float> images;
    std::optional<Labels> labels;
    std::size_t num_classes = 0;
    std::uint64_t fingerprint = 0;

    std::size_t size() const { return images.empty() ? 0 : images.dim(0); }
    Shape sample_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
};

/// Validates ranges, fills num_classes (max label + 1 when not given) and the
/// fingerprint.
Dataset make_dataset(std::string name, Tensor<float> images, std::optional<Labels> labels,
                     std::size_t num_classes = 0);

std::uint64_t image_fingerprint(const Tensor<float>& images);

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX3 image file and its IDX1 label file. Bytes map to v / 255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writes single-channel images (rounded to bytes) and labels as IDX3/IDX1.
void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
               const Dataset& dataset);

struct BlobSpec {
    std::size_t num_classes = 2;
    std::size_t n = 100;
    Shape sample_shape{2};
    double spread = 0.1;
    std::uint64_t seed = 0;
};

/// Gaussian clusters around seeded uniform centers, clipped to [0, 1]; sample
/// i belongs to class i mod num_classes.
Dataset synth_blobs(const BlobSpec& spec);

struct GlyphSpec {
    std::size_t num_classes = 10;
    std::size_t n = 1000;
    std::size_t size = 28;
    std::size_t strokes = 3;
    double thickness = 1.6;
    double jitter = 0.8;   // per-endpoint pixel noise
    double shift = 2.0;    // max global translation in pixels
    double noise = 0.05;   // additive Gaussian pixel noise
    std::uint64_t seed = 0;
};

/// Single-channel stroke images: each class is a fixed set of line segments,
/// each sample redraws them with endpoint jitter, translation, contrast
/// variation and pixel noise.
Dataset synth_glyphs(const GlyphSpec& spec);

/// Rows `indices` of `dataset`, in that order.
Dataset take(const Dataset& dataset, std::span<const std::size_t> indices, std::string name = {});

/// Seeded sample of `size` rows, kept in ascending index order.
Dataset subset(const Dataset& dataset, std::size_t size, std::uint64_t seed);

/// First `head` rows and the remainder.
std::pair<Dataset, Dataset> split(const Dataset& dataset, std::size_t head);

template <Real T>
Tensor<T> gather_images(const Dataset& dataset, std::span<const std::size_t> indices);

template <Real T>
Tensor<T> all_images(const Dataset& dataset);

template <Real T>
struct Batch {
    std::vector<std::size_t> indices;
    Tensor<T> X;
    Labels Y;
};

/// Seeded permutation of 0..n-1 cut into ceil(n / B) groups; the last group
/// may be short and is kept.
std::vector<std::vector<std::size_t>> minibatch_indices(std::size_t n, std::size_t batch_size,
                                                        std::uint64_t epoch_seed);

/// Materialized mini-batches with Y_B taken from `labels` at the batch indices.
template <Real T>
std::vector<Batch<T>> minibatches(const Dataset& dataset, std::span<const std::int32_t> labels,
                                  std::size_t batch_size, std::uint64_t epoch_seed);

}  // namespace uapforge
