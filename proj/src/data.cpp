// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "uapforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "uapforge/hash.hpp"
#include "uapforge/rng.hpp"
#include "uapforge/tensor_io.hpp"

namespace uapforge {

std::uint64_t image_fingerprint(const Tensor<float>& images) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(images.data().data());
    return fnv1a64(std::span<const std::uint8_t>(raw, images.numel() * sizeof(float)));
}

Dataset make_dataset(std::string name, Tensor<float> images, std::optional<Labels> labels,
                     std::size_t num_classes) {
    if (images.rank() != 4) throw ShapeError("dataset images must be [n,C,H,W], got " + shape_str(images.shape()));
    for (float v : images.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) throw ShapeError("dataset pixel outside [0,1] in " + name);
    }
    if (labels) {
        if (labels->size() != images.dim(0)) throw ShapeError("dataset label count does not match image count");
        std::int32_t max_label = -1;
        for (std::int32_t y : *labels) {
            if (y < 0) throw ShapeError("negative label in " + name);
            max_label = std::max(max_label, y);
        }
        if (num_classes == 0) num_classes = static_cast<std::size_t>(max_label + 1);
        if (static_cast<std::size_t>(max_label) >= num_classes) {
            throw ShapeError("label " + std::to_string(max_label) + " outside [0," + std::to_string(num_classes) + ")");
        }
    }
    Dataset d;
    d.name = std::move(name);
    d.fingerprint = image_fingerprint(images);
    d.images = std::move(images);
    d.labels = std::move(labels);
    d.num_classes = num_classes;
    return d;
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t at, const std::string& file) {
    if (bytes.size() < at + 4) throw FormatError("truncated IDX header in " + file);
    return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
           (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto img = read_file_bytes(images_path);
    const auto lab = read_file_bytes(labels_path);
    const std::string img_name = images_path.string();
    const std::string lab_name = labels_path.string();

    if (read_be32(img, 0, img_name) != kIdxImageMagic) throw FormatError("bad magic in IDX image file " + img_name);
    if (read_be32(lab, 0, lab_name) != kIdxLabelMagic) throw FormatError("bad magic in IDX label file " + lab_name);
    const std::size_t n = read_be32(img, 4, img_name);
    const std::size_t rows = read_be32(img, 8, img_name);
    const std::size_t cols = read_be32(img, 12, img_name);
    const std::size_t n_labels = read_be32(lab, 4, lab_name);
    if (n != n_labels) {
        throw FormatError("count mismatch: " + std::to_string(n) + " images vs " + std::to_string(n_labels) + " labels");
    }
    if (n == 0 || rows == 0 || cols == 0) throw FormatError("empty IDX image file " + img_name);
    const std::size_t pixels = n * rows * cols;
    if (img.size() < 16 + pixels) throw FormatError("truncated IDX image data in " + img_name);
    if (lab.size() < 8 + n) throw FormatError("truncated IDX label data in " + lab_name);

    std::vector<float> data(pixels);
    for (std::size_t i = 0; i < pixels; ++i) data[i] = static_cast<float>(img[16 + i]) / 255.0f;
    Labels labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = lab[8 + i];
    return make_dataset(images_path.filename().string(), Tensor<float>({n, 1, rows, cols}, std::move(data)),
                        std::move(labels));
}

void write_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
               const Dataset& dataset) {
    if (dataset.images.dim(1) != 1) throw ShapeError("write_idx: only single-channel images are supported");
    if (!dataset.labels) throw ShapeError("write_idx: dataset has no labels");
    const std::size_t n = dataset.size(), rows = dataset.images.dim(2), cols = dataset.images.dim(3);
    std::vector<std::uint8_t> img;
    img.reserve(16 + n * rows * cols);
    put_be32(img, kIdxImageMagic);
    put_be32(img, static_cast<std::uint32_t>(n));
    put_be32(img, static_cast<std::uint32_t>(rows));
    put_be32(img, static_cast<std::uint32_t>(cols));
    for (float v : dataset.images.data()) {
        img.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    }
    std::vector<std::uint8_t> lab;
    put_be32(lab, kIdxLabelMagic);
    put_be32(lab, static_cast<std::uint32_t>(n));
    for (std::int32_t y : *dataset.labels) {
        if (y < 0 || y > 255) throw ShapeError("write_idx: label does not fit a byte");
        lab.push_back(static_cast<std::uint8_t>(y));
    }
    write_file_bytes(images_path, img);
    write_file_bytes(labels_path, lab);
}

Dataset synth_blobs(const BlobSpec& spec) {
    if (spec.num_classes < 1 || spec.n < spec.num_classes) throw ConfigError("synth_blobs: need n >= num_classes >= 1");
    if (!(spec.spread > 0.0)) throw ConfigError("synth_blobs: spread must be positive");
    if (spec.sample_shape.empty()) throw ConfigError("synth_blobs: empty sample shape");
    Shape full = spec.sample_shape;
    while (full.size() < 3) full.insert(full.begin(), 1);
    const std::size_t d = shape_numel(full);
    Rng rng(spec.seed);
    std::vector<double> centers(spec.num_classes * d);
    for (double& c : centers) c = rng.uniform();
    std::vector<float> data(spec.n * d);
    Labels labels(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t k = i % spec.num_classes;
        labels[i] = static_cast<std::int32_t>(k);
        for (std::size_t j = 0; j < d; ++j) {
            const double v = centers[k * d + j] + spec.spread * rng.normal();
            data[i * d + j] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    Shape shape{spec.n};
    shape.insert(shape.end(), full.begin(), full.end());
    return make_dataset("blobs", Tensor<float>(std::move(shape), std::move(data)), std::move(labels),
                        spec.num_classes);
}

namespace {

struct Segment {
    double x0, y0, x1, y1;
};

double point_segment_distance(double px, double py, const Segment& s) {
    const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double ex = s.x0 + t * dx - px, ey = s.y0 + t * dy - py;
    return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

Dataset synth_glyphs(const GlyphSpec& spec) {
    if (spec.num_classes < 1 || spec.n < spec.num_classes) throw ConfigError("synth_glyphs: need n >= num_classes >= 1");
    if (spec.size < 8 || spec.strokes < 1 || !(spec.thickness > 0.0)) throw ConfigError("synth_glyphs: invalid geometry");
    Rng rng(spec.seed);
    const double lo = 0.2 * static_cast<double>(spec.size);
    const double hi = 0.8 * static_cast<double>(spec.size);
    std::vector<std::vector<Segment>> prototypes(spec.num_classes);
    for (auto& proto : prototypes) {
        for (std::size_t s = 0; s < spec.strokes; ++s) {
            proto.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
        }
    }
    const std::size_t px = spec.size * spec.size;
    std::vector<float> data(spec.n * px);
    Labels labels(spec.n);
    std::vector<Segment> strokes;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t k = i % spec.num_classes;
        labels[i] = static_cast<std::int32_t>(k);
        const double sx = rng.uniform(-spec.shift, spec.shift);
        const double sy = rng.uniform(-spec.shift, spec.shift);
        const double contrast = rng.uniform(0.7, 1.0);
        strokes.clear();
        for (const Segment& s : prototypes[k]) {
            strokes.push_back({s.x0 + sx + spec.jitter * rng.normal(), s.y0 + sy + spec.jitter * rng.normal(),
                               s.x1 + sx + spec.jitter * rng.normal(), s.y1 + sy + spec.jitter * rng.normal()});
        }
        float* img = data.data() + i * px;
        for (std::size_t y = 0; y < spec.size; ++y) {
            for (std::size_t x = 0; x < spec.size; ++x) {
                double ink = 0.0;
                for (const Segment& s : strokes) {
                    const double d = point_segment_distance(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, s);
                    ink = std::max(ink, std::clamp(1.0 - (d - 0.5 * spec.thickness), 0.0, 1.0));
                }
                const double v = contrast * ink + spec.noise * rng.normal();
                img[y * spec.size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return make_dataset("glyphs", Tensor<float>({spec.n, 1, spec.size, spec.size}, std::move(data)),
                        std::move(labels), spec.num_classes);
}

Dataset take(const Dataset& dataset, std::span<const std::size_t> indices, std::string name) {
    if (indices.empty()) throw ShapeError("take: no indices");
    const std::size_t per = shape_numel(dataset.sample_shape());
    std::vector<float> data(indices.size() * per);
    std::optional<Labels> labels;
    if (dataset.labels) labels.emplace(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= dataset.size()) throw ShapeError("take: index out of range");
        std::copy_n(dataset.images.data().begin() + static_cast<std::ptrdiff_t>(src * per), per,
                    data.begin() + static_cast<std::ptrdiff_t>(i * per));
        if (labels) (*labels)[i] = (*dataset.labels)[src];
    }
    Shape shape{indices.size()};
    const Shape sample = dataset.sample_shape();
    shape.insert(shape.end(), sample.begin(), sample.end());
    return make_dataset(name.empty() ? dataset.name : std::move(name), Tensor<float>(std::move(shape), std::move(data)),
                        std::move(labels), dataset.num_classes);
}

Dataset subset(const Dataset& dataset, std::size_t size, std::uint64_t seed) {
    if (size == 0 || size > dataset.size()) {
        throw ConfigError("subset size " + std::to_string(size) + " outside [1," + std::to_string(dataset.size()) + "]");
    }
    auto perm = Rng(seed).permutation(dataset.size());
    perm.resize(size);
    std::sort(perm.begin(), perm.end());
    return take(dataset, perm, dataset.name + "-subset" + std::to_string(size));
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, std::size_t head) {
    if (head == 0 || head >= dataset.size()) throw ConfigError("split point must leave both parts non-empty");
    std::vector<std::size_t> a(head), b(dataset.size() - head);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = i;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = head + i;
    return {take(dataset, a, dataset.name + "-train"), take(dataset, b, dataset.name + "-test")};
}

template <Real T>
Tensor<T> gather_images(const Dataset& dataset, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ShapeError("gather_images: no indices");
    const std::size_t per = shape_numel(dataset.sample_shape());
    std::vector<T> data(indices.size() * per);
    const float* src = dataset.images.data().data();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= dataset.size()) throw ShapeError("gather_images: index out of range");
        const float* row = src + indices[i] * per;
        for (std::size_t j = 0; j < per; ++j) data[i * per + j] = static_cast<T>(row[j]);
    }
    Shape shape{indices.size()};
    const Shape sample = dataset.sample_shape();
    shape.insert(shape.end(), sample.begin(), sample.end());
    return Tensor<T>(std::move(shape), std::move(data));
}

template <Real T>
Tensor<T> all_images(const Dataset& dataset) {
    return tensor_cast<T>(dataset.images);
}

std::vector<std::vector<std::size_t>> minibatch_indices(std::size_t n, std::size_t batch_size,
                                                        std::uint64_t epoch_seed) {
    if (n == 0) throw ShapeError("minibatches: empty dataset");
    if (batch_size == 0) throw ConfigError("minibatches: batch size must be >= 1");
    const auto perm = Rng(epoch_seed).permutation(n);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

template <Real T>
std::vector<Batch<T>> minibatches(const Dataset& dataset, std::span<const std::int32_t> labels,
                                  std::size_t batch_size, std::uint64_t epoch_seed) {
    if (labels.size() != dataset.size()) throw ShapeError("minibatches: label vector length differs from dataset");
    std::vector<Batch<T>> out;
    for (auto& idx : minibatch_indices(dataset.size(), batch_size, epoch_seed)) {
        Batch<T> b;
        b.X = gather_images<T>(dataset, idx);
        b.Y.reserve(idx.size());
        for (std::size_t i : idx) b.Y.push_back(labels[i]);
        b.indices = std::move(idx);
        out.push_back(std::move(b));
    }
    return out;
}

template Tensor<float> gather_images<float>(const Dataset&, std::span<const std::size_t>);
template Tensor<double> gather_images<double>(const Dataset&, std::span<const std::size_t>);
template Tensor<float> all_images<float>(const Dataset&);
template Tensor<double> all_images<double>(const Dataset&);
template std::vector<Batch<float>> minibatches<float>(const Dataset&, std::span<const std::int32_t>, std::size_t,
                                                      std::uint64_t);
template std::vector<Batch<double>> minibatches<double>(const Dataset&, std::span<const std::int32_t>, std::size_t,
                                                        std::uint64_t);

}  // namespace uapforge
