// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "uapforge/hash.hpp"
#include "uapforge/rng.hpp"
#include "uapforge/tensor.hpp"
#include "uapforge/tensor_io.hpp"

using namespace uapforge;

TEST(Tensor, LengthMatchesShape) {
    Tensor<float> t({2, 3, 4});
    EXPECT_EQ(t.numel(), 24u);
    EXPECT_EQ(t.rank(), 3u);
    EXPECT_THROW(Tensor<float>({2, 3}, std::vector<float>(5)), ShapeError);
    EXPECT_THROW(Tensor<float>({2, 0}), ShapeError);
}

TEST(Tensor, FiniteCheck) {
    Tensor<double> t({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
    EXPECT_FALSE(t.all_finite());
    EXPECT_THROW(t.check_finite("t"), NumericError);
}

TEST(Tensor, RoundTowardStaysOnAnchorSide) {
    Rng rng(3);
    for (int c = 0; c < 200; ++c) {
        Tensor<float> anchor({8});
        Tensor<double> target({8});
        for (std::size_t i = 0; i < 8; ++i) {
            anchor[i] = static_cast<float>(rng.uniform(-1, 1));
            target[i] = static_cast<double>(anchor[i]) + rng.uniform(-1e-3, 1e-3);
        }
        const Tensor<float> r = round_toward(target, anchor);
        for (std::size_t i = 0; i < 8; ++i) {
            EXPECT_LE(std::abs(static_cast<double>(r[i]) - anchor[i]), std::abs(target[i] - anchor[i]));
        }
    }
}

TEST(Tensor, RoundTowardZeroNeverGrowsMagnitude) {
    Tensor<double> t({3}, {10.0 / 255.0, -10.0 / 255.0, 0.1});
    const Tensor<float> r = round_toward_zero<float>(t);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(std::abs(static_cast<double>(r[i])), std::abs(t[i]));
}

TEST(TensorIo, RoundTripBothPrecisions) {
    Tensor<float> f({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(std::get<Tensor<float>>(decode_tensor(encode_tensor(f))), f);
    Tensor<double> d({1, 1, 2}, {0.25, -1e300});
    EXPECT_EQ(std::get<Tensor<double>>(decode_tensor(encode_tensor(d))), d);
}

TEST(TensorIo, LayoutIsLittleEndianContainer) {
    Tensor<float> f({2}, {1.0f, -2.0f});
    const auto bytes = encode_tensor(f);
    ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 4 + 1 + 8);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "UAPT");
    EXPECT_EQ(bytes[4], 1);  // version
    EXPECT_EQ(bytes[8], 1);  // rank
    EXPECT_EQ(bytes[12], 2); // extent
    EXPECT_EQ(bytes[16], 0); // f32 tag
    float v;
    std::memcpy(&v, bytes.data() + 17, 4);
    EXPECT_EQ(v, 1.0f);
}

TEST(TensorIo, RejectsCorruptContainers) {
    auto bytes = encode_tensor(Tensor<double>({2}, {1, 2}));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_tensor(bad), FormatError);
    bad = bytes;
    bad.pop_back();
    EXPECT_THROW(decode_tensor(bad), FormatError);
    bad = bytes;
    bad.push_back(0);
    EXPECT_THROW(decode_tensor(bad), FormatError);
    bad = bytes;
    bad[16] = 7;
    EXPECT_THROW(decode_tensor(bad), FormatError);
}

TEST(TensorIo, MissingFileIsReported) {
    EXPECT_THROW(read_file_bytes("/nonexistent/uapforge/x.uapt"), MissingFileError);
}

TEST(Hash, FnvReferenceVectors) {
    EXPECT_EQ(fnv1a64(std::string_view("")), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64(std::string_view("a")), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(fnv1a64(std::string_view("foobar")), 0x85944171f73967e8ull);
}

TEST(Hash, GitBlobMatchesGit) {
    // `printf 'hello\n' | git hash-object --stdin`
    const std::string s = "hello\n";
    EXPECT_EQ(git_blob_hash(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
              "ce013625030ba8dba906f756967f9e9ca394464a");
    EXPECT_EQ(git_blob_hash({}), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Rng, DeterministicAndNamedSubSeedsDiffer) {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_NE(derive_seed(1, "train"), derive_seed(1, "shuffle"));
    EXPECT_NE(derive_seed(1, "train"), derive_seed(2, "train"));
}

TEST(Rng, BelowAndPermutation) {
    Rng r(7);
    for (int i = 0; i < 1000; ++i) EXPECT_LT(r.below(13), 13u);
    auto p = r.permutation(50);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(p[i], i);
}
