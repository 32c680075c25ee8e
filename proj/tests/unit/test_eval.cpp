// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "oracles.hpp"
#include "uapforge/eval.hpp"
#include "uapforge/hash.hpp"
#include "uapforge/tensor_io.hpp"

using namespace uapforge;
namespace fs = std::filesystem;

namespace {

/// Class 1 iff x > 0.5: logits (0, x - 0.5).
ModelState<double> threshold_model() {
    ModelSpec spec{{1, 1, 1}, 2, {LayerSpec::flatten(), LayerSpec::dense(1, 2)}};
    return make_model<double>(spec, Tensor<double>({4}, {0.0, 1.0, 0.0, -0.5}));
}

Dataset random_images(std::uint64_t seed, std::size_t n, const Shape& sample, std::size_t classes) {
    Rng rng(seed);
    Shape shape{n};
    shape.insert(shape.end(), sample.begin(), sample.end());
    return make_dataset("random", oracle::random_tensor<float>(rng, shape, 0, 1), oracle::random_labels(rng, n, classes),
                        classes);
}

/// Naive fooling count: per-sample clamp, naive forward, argmax comparison.
std::size_t naive_changed(const ModelState<double>& model, const Dataset& d, const Tensor<double>& delta) {
    const std::size_t per = delta.numel();
    std::size_t changed = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::vector<double> clean(per), pert(per);
        for (std::size_t k = 0; k < per; ++k) {
            clean[k] = d.images[i * per + k];
            pert[k] = std::min(1.0, std::max(0.0, clean[k] + delta[k]));
        }
        if (oracle::naive_argmax(oracle::naive_forward(model, clean).logits) !=
            oracle::naive_argmax(oracle::naive_forward(model, pert).logits))
            ++changed;
    }
    return changed;
}

TransferMatrix handmade_matrix() {
    TransferMatrix m;
    m.surrogates = {"a", "b"};
    m.targets = {"x"};
    for (double r : {0.123456, 0.5}) {
        FoolingReport f;
        f.model_id = "x";
        f.delta_id = "d";
        f.dataset_fp = 0xabcdef;
        f.delta_hash = "00ff";
        f.n_evaluated = 1000;
        f.n_changed = static_cast<std::size_t>(r * 1000);
        f.fooling_ratio = r;
        m.cells.push_back({f});
        m.row_average.push_back(r);
    }
    return m;
}

}  // namespace

TEST(FoolingRatio, HandEnumeratedThreshold) {
    const Dataset d = make_dataset("two", Tensor<float>({2, 1, 1, 1}, {0.6f, 0.1f}), Labels{1, 0});
    const auto r = fooling_ratio(threshold_model(), d, Tensor<double>({1, 1, 1}, {-0.2}));
    EXPECT_EQ(r.n_evaluated, 2u);
    EXPECT_EQ(r.n_changed, 1u);
    EXPECT_EQ(r.fooling_ratio, 0.5);
    EXPECT_EQ(*r.clean_correct, 2u);
    EXPECT_EQ(*r.perturbed_correct, 1u);
    EXPECT_EQ(*r.correct_to_wrong, 1u);
}

TEST(FoolingRatio, ZeroPerturbationNeverFools) {
    const Dataset d = random_images(1, 50, {2, 10, 10}, 4);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = build_model<float>(named_architecture("cnn", {2, 10, 10}, 4, 2), seed);
        EXPECT_EQ(fooling_ratio(m, d, Tensor<float>({2, 10, 10})).fooling_ratio, 0.0);
    }
}

TEST(FoolingRatio, MatchesNaiveLoop) {
    const Dataset d = random_images(2, 200, {1, 10, 10}, 5);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto m = build_model<double>(named_architecture("cnn", {1, 10, 10}, 5, 3), seed);
        Rng rng(seed);
        const auto delta = oracle::random_tensor<double>(rng, {1, 10, 10}, -0.3, 0.3);
        const auto r = fooling_ratio(m, d, delta);
        EXPECT_EQ(r.n_changed, naive_changed(m, d, delta));
        EXPECT_EQ(r.n_evaluated, 200u);
    }
}

TEST(FoolingRatio, ThreadAndChunkInvariance) {
    const Dataset d = random_images(3, 301, {1, 10, 10}, 3);
    const auto m = build_model<float>(named_architecture("cnn", {1, 10, 10}, 3, 2), 4);
    Rng rng(3);
    const auto delta = oracle::random_tensor<float>(rng, {1, 10, 10}, -0.2, 0.2);
    EvalOptions base;
    const auto ref = fooling_ratio(m, d, delta, base);
    for (unsigned threads : {1u, 2u, 3u, 8u}) {
        for (std::size_t chunk : {1u, 7u, 64u, 1000u}) {
            EvalOptions o;
            o.threads = threads;
            o.chunk = chunk;
            const auto r = fooling_ratio(m, d, delta, o);
            EXPECT_EQ(r.n_changed, ref.n_changed);
            EXPECT_EQ(r.clean_correct, ref.clean_correct);
            EXPECT_EQ(r.perturbed_correct, ref.perturbed_correct);
        }
    }
}

// Property: the ratio ignores sample order, and prediction changes cover every correct-to-wrong flip.
TEST(Properties, FoolingRatioPermutationAndBookkeeping) {
    const auto m = build_model<float>(named_architecture("mlp", {1, 4, 4}, 3, 6), 9);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const Dataset d = random_images(seed + 100, 40 + rng.below(60), {1, 4, 4}, 3);
        const auto delta = oracle::random_tensor<float>(rng, {1, 4, 4}, -0.5, 0.5);
        const auto perm = rng.permutation(d.size());
        const auto a = fooling_ratio(m, d, delta);
        const auto b = fooling_ratio(m, take(d, perm), delta);
        EXPECT_EQ(a.n_changed, b.n_changed);
        EXPECT_GE(a.n_changed, *a.correct_to_wrong);
        EXPECT_LE(a.n_changed, a.n_evaluated);
        EXPECT_GE(a.fooling_ratio, 0.0);
        EXPECT_LE(a.fooling_ratio, 1.0);
    }
}

TEST(FoolingRatio, IdsHashesAndBudgetFlag) {
    const Dataset d = random_images(4, 20, {1, 1, 1}, 2);
    const Tensor<double> delta({1, 1, 1}, {0.05});
    EvalOptions o;
    o.epsilon = 0.01;
    const auto r = fooling_ratio(threshold_model(), d, delta, o);
    EXPECT_TRUE(r.budget_exceeded);
    EXPECT_EQ(r.dataset_fp, d.fingerprint);
    EXPECT_EQ(r.delta_hash, delta_content_hash(delta));
    EXPECT_EQ(r.model_id, hex64(model_fingerprint(threshold_model())));
    EXPECT_THROW(fooling_ratio(threshold_model(), d, Tensor<double>({1, 1, 2})), ShapeError);
}

TEST(TransferMatrix, SingleCellEqualsWhiteBoxReport) {
    const Dataset d = random_images(5, 80, {1, 10, 10}, 3);
    const auto m = build_model<float>(named_architecture("cnn", {1, 10, 10}, 3, 2), 1);
    Rng rng(5);
    const auto delta = oracle::random_tensor<float>(rng, {1, 10, 10}, -0.3, 0.3);
    const std::vector<NamedModel<float>> targets{{"m", m}};
    const std::vector<NamedDelta<float>> deltas{{"m", delta}};
    const auto tm = transfer_matrix<float>(targets, deltas, d);
    ASSERT_EQ(tm.cells.size(), 1u);
    ASSERT_EQ(tm.cells[0].size(), 1u);
    EXPECT_EQ(tm.ratio(0, 0), fooling_ratio(m, d, delta).fooling_ratio);
    EXPECT_EQ(tm.row_average[0], tm.ratio(0, 0));
}

TEST(TransferMatrix, EntriesMatchIndependentCalls) {
    const Dataset d = random_images(6, 60, {1, 10, 10}, 3);
    std::vector<NamedModel<float>> targets;
    for (std::uint64_t s = 0; s < 3; ++s) {
        targets.push_back({"m" + std::to_string(s), build_model<float>(named_architecture("cnn", {1, 10, 10}, 3, 2), s)});
    }
    Rng rng(6);
    std::vector<NamedDelta<float>> deltas{{"zero", Tensor<float>({1, 10, 10})},
                                          {"m0", oracle::random_tensor<float>(rng, {1, 10, 10}, -0.4, 0.4)}};
    const auto tm = transfer_matrix<float>(targets, deltas, d);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(tm.ratio(0, j), 0.0);
    double sum = 0;
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(tm.ratio(1, j), fooling_ratio(targets[j].model, d, deltas[1].delta).fooling_ratio);
        sum += tm.ratio(1, j);
    }
    EXPECT_DOUBLE_EQ(tm.row_average[1], sum / 3);
    EXPECT_EQ(tm.row_average[0], 0.0);
}

TEST(Report, CsvFormatting) {
    const std::string csv = report_to_csv(handmade_matrix());
    EXPECT_EQ(csv,
              "surrogate,target,fooling_ratio,n,dataset_fp,delta_hash\n"
              "a,x,0.1235,1000,0000000000abcdef,00ff\n"
              "b,x,0.5000,1000,0000000000abcdef,00ff\n");
}

TEST(Report, JsonRoundTripAndDeterminism) {
    const fs::path dir = fs::temp_directory_path() / "uapforge-report-test";
    fs::create_directories(dir);
    const auto m = handmade_matrix();
    const nlohmann::json cfg{{"seed", 3}};
    report_write(m, dir / "a.json", ReportFormat::json, cfg);
    report_write(m, dir / "b.json", ReportFormat::json, cfg);
    report_write(m, dir / "a.csv", ReportFormat::csv);
    report_write(m, dir / "b.csv", ReportFormat::csv);
    EXPECT_EQ(read_file_bytes(dir / "a.json"), read_file_bytes(dir / "b.json"));
    EXPECT_EQ(read_file_bytes(dir / "a.csv"), read_file_bytes(dir / "b.csv"));
    const auto bytes = read_file_bytes(dir / "a.json");
    const auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    EXPECT_EQ(doc.at("config"), cfg);
    const auto back = report_from_json(doc);
    EXPECT_EQ(back.surrogates, m.surrogates);
    EXPECT_EQ(back.targets, m.targets);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back.ratio(i, 0), round4(m.ratio(i, 0)));
        EXPECT_EQ(back.cells[i][0].n_changed, m.cells[i][0].n_changed);
        EXPECT_EQ(back.cells[i][0].dataset_fp, m.cells[i][0].dataset_fp);
        EXPECT_EQ(back.cells[i][0].delta_hash, m.cells[i][0].delta_hash);
    }
    EXPECT_EQ(report_to_json(back, cfg), doc);
    fs::remove_all(dir);
}

TEST(Report, FormatParsing) {
    EXPECT_EQ(parse_report_format("csv"), ReportFormat::csv);
    EXPECT_THROW(parse_report_format("xml"), ConfigError);
    EXPECT_EQ(round4(0.123456), 0.1235);
    EXPECT_THROW(report_from_json(nlohmann::json{{"rows", 1}}), FormatError);
}
