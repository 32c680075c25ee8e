// Copyright 2026 The uapforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "uapforge/data.hpp"
#include "uapforge/model.hpp"
#include "uapforge/training.hpp"

using namespace uapforge;

namespace {

Dataset two_blobs(std::uint64_t seed, std::size_t n = 200) {
    BlobSpec b;
    b.num_classes = 2;
    b.n = n;
    b.sample_shape = {4};
    b.spread = 0.03;
    b.seed = seed;
    return synth_blobs(b);
}

/// Two-class logistic model with zero weights whose CE on label 1 is `loss`.
ModelState<double> bias_model(double loss) {
    ModelSpec spec{{1, 1, 2}, 2, {LayerSpec::flatten(), LayerSpec::dense(2, 2)}};
    Tensor<double> p({spec.param_count()});
    p[4] = std::log(std::exp(loss) - 1.0);  // bias of class 0; class 1 stays at 0
    return make_model<double>(spec, p);
}

}  // namespace

TEST(BuildModel, DeterministicPerSeed) {
    const auto spec = named_architecture("cnn", {1, 12, 12}, 4);
    EXPECT_EQ(build_model<float>(spec, 9).params, build_model<float>(spec, 9).params);
    EXPECT_NE(build_model<float>(spec, 9).params, build_model<float>(spec, 10).params);
}

TEST(BuildModel, ParameterCounts) {
    ModelSpec dense{{4}, 3, {LayerSpec::dense(4, 3)}};
    EXPECT_EQ(dense.param_count(), 15u);
    const auto conv = LayerSpec::conv2d(1, 8, 3);
    EXPECT_EQ(conv.weight_count(), 72u);
    EXPECT_EQ(conv.bias_count(), 8u);
}

TEST(BuildModel, InitializationWithinFanInBounds) {
    ModelSpec spec{{6}, 3, {LayerSpec::dense(6, 3)}};
    const auto m = build_model<double>(spec, 1);
    for (std::size_t i = 0; i < 18; ++i) EXPECT_LE(std::abs(m.params[i]), std::sqrt(6.0 / 6.0));
    for (std::size_t i = 18; i < 21; ++i) EXPECT_LE(std::abs(m.params[i]), 1.0 / std::sqrt(6.0));
}

TEST(BuildModel, NonComposingSpecThrows) {
    ModelSpec bad{{4}, 3, {LayerSpec::dense(5, 3)}};
    EXPECT_THROW(build_model<float>(bad, 0), ShapeError);
    ModelSpec wrong_out{{4}, 3, {LayerSpec::dense(4, 2)}};
    EXPECT_THROW(build_model<float>(wrong_out, 0), ShapeError);
    ModelSpec bad_norm{{2, 3, 3}, 2, {LayerSpec::normalize({0, 0}, {1, 0}), LayerSpec::flatten(), LayerSpec::dense(18, 2)}};
    EXPECT_THROW(bad_norm.plan(), ShapeError);
}

TEST(ModelSpec, JsonRoundTrip) {
    ModelSpec spec = named_architecture("cnn", {3, 16, 16}, 10, 4);
    spec.layers.insert(spec.layers.begin(), LayerSpec::normalize({0.4, 0.5, 0.6}, {0.2, 0.25, 0.3}));
    EXPECT_EQ(model_spec_from_json(to_json(spec)), spec);
}

TEST(TrainErm, SeparableBlobsReachHighAccuracy) {
    const Dataset d = two_blobs(1);
    const auto spec = named_architecture("mlp", {1, 1, 4}, 2, 16);
    TrainConfig tc;
    tc.epochs = 20;
    tc.lr = 0.1;
    tc.batch = 16;
    tc.seed = 3;
    const auto res = train_erm(build_model<float>(spec, 2), d, tc);
    EXPECT_GE(accuracy(res.model, d), 0.99);
    ASSERT_EQ(res.history.size(), 20u);
    EXPECT_LT(res.history.back().loss, res.history.front().loss);
}

TEST(TrainErm, ZeroEpochsLeavesParamsUnchanged) {
    const Dataset d = two_blobs(1);
    const auto m = build_model<float>(named_architecture("logistic", {1, 1, 4}, 2), 4);
    TrainConfig tc;
    tc.epochs = 0;
    EXPECT_EQ(train_erm(m, d, tc).model.params, m.params);
}

TEST(TrainErm, Deterministic) {
    const Dataset d = two_blobs(5);
    const auto m = build_model<float>(named_architecture("mlp", {1, 1, 4}, 2, 8), 4);
    TrainConfig tc;
    tc.epochs = 3;
    tc.seed = 8;
    EXPECT_EQ(train_erm(m, d, tc).model.params, train_erm(m, d, tc).model.params);
}

TEST(TrainErm, DivergenceNamesTheEpoch) {
    const Dataset d = two_blobs(5);
    const auto m = build_model<float>(named_architecture("mlp", {1, 1, 4}, 2, 8), 4);
    TrainConfig tc;
    tc.epochs = 5;
    tc.lr = 1e38;
    try {
        train_erm(m, d, tc);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_GE(e.epoch(), 1);
        EXPECT_LE(e.epoch(), 5);
    }
}

TEST(Predict, ArgmaxAndTieBreak) {
    EXPECT_EQ(argmax_rows(Tensor<double>({1, 3}, {0.1, 0.9, 0.3})), (Labels{1}));
    EXPECT_EQ(argmax_rows(Tensor<double>({1, 2}, {0.5, 0.5})), (Labels{0}));
}

TEST(Predict, AgreesWithNaiveForward) {
    ModelSpec spec = named_architecture("cnn", {2, 10, 10}, 5, 3);
    spec.layers.insert(spec.layers.begin(), LayerSpec::normalize({0.5, 0.4}, {0.3, 0.2}));
    const auto model = build_model<double>(spec, 17);
    Rng rng(4);
    const auto X = oracle::random_tensor<double>(rng, {100, 2, 10, 10}, 0, 1);
    const Labels p = predict(model, X);
    const Tensor<double> logits = forward_logits(model, X);
    for (std::size_t i = 0; i < 100; ++i) {
        const auto tr = oracle::naive_forward(model, oracle::sample_row(X, i));
        EXPECT_EQ(p[i], oracle::naive_argmax(tr.logits)) << i;
        for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(logits[i * 5 + k], tr.logits[k], 1e-12);
    }
}

TEST(Predict, ShapeMismatchThrows) {
    const auto model = build_model<double>(named_architecture("logistic", {4}, 2), 1);
    EXPECT_THROW(predict(model, Tensor<double>({2, 5})), ShapeError);
}

// Property: argmax is invariant under adding a constant to every logit.
TEST(Properties, PredictInvariantUnderLogitShift) {
    const auto spec = named_architecture("mlp", {6}, 4, 8);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed);
        auto model = build_model<double>(spec, seed);
        const auto X = oracle::random_tensor<double>(rng, {10, 6}, 0, 1);
        const Labels before = predict(model, X);
        const double c = rng.uniform(-5, 5);
        const auto plans = spec.plan();
        for (std::size_t k = 0; k < 4; ++k) model.params[plans.back().bias_offset + k] += c;
        EXPECT_EQ(predict(model, X), before);
    }
}

TEST(ParamDistance, Examples) {
    const auto a = build_model<double>(named_architecture("logistic", {3}, 2), 1);
    EXPECT_EQ(param_distance(a, a), 0.0);
    auto b = a;
    b.params[2] += 3.0;
    EXPECT_DOUBLE_EQ(param_distance(a, b), 3.0);
    const auto other = build_model<double>(named_architecture("logistic", {4}, 2), 1);
    EXPECT_THROW(param_distance(a, other), ShapeError);
}

// Property: param_distance is a metric on same-spec models and matches the naive formula.
TEST(Properties, ParamDistanceIsAMetric) {
    const auto spec = named_architecture("mlp", {5}, 3, 4);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto a = build_model<double>(spec, seed);
        const auto b = build_model<double>(spec, seed + 1000);
        const auto c = build_model<double>(spec, seed + 2000);
        double naive = 0.0;
        for (std::size_t i = 0; i < a.params.numel(); ++i) naive += (a.params[i] - b.params[i]) * (a.params[i] - b.params[i]);
        EXPECT_NEAR(param_distance(a, b), std::sqrt(naive), 1e-12);
        EXPECT_GT(param_distance(a, b), 0.0);
        EXPECT_EQ(param_distance(a, b), param_distance(b, a));
        EXPECT_LE(param_distance(a, c), param_distance(a, b) + param_distance(b, c) + 1e-12);
    }
}

TEST(Ensemble, IdenticalModelsEqualSingle) {
    const auto m = build_model<double>(named_architecture("mlp", {4}, 3, 5), 2);
    Rng rng(1);
    const auto X = oracle::random_tensor<double>(rng, {6, 4}, 0, 1);
    const auto Y = oracle::random_labels(rng, 6, 3);
    const std::vector<ModelState<double>> pair{m, m};
    EXPECT_NEAR(ensemble_loss<double>(pair, X, Y), forward_cross_entropy(m, X, Y), 1e-15);
    EXPECT_EQ(ensemble_predict<double>(pair, X), predict(m, X));
}

TEST(Ensemble, AveragesLosses) {
    const std::vector<ModelState<double>> pair{bias_model(1.0), bias_model(3.0)};
    const Tensor<double> X({1, 1, 1, 2});
    EXPECT_NEAR(forward_cross_entropy(pair[0], X, Labels{1}), 1.0, 1e-12);
    EXPECT_NEAR(forward_cross_entropy(pair[1], X, Labels{1}), 3.0, 1e-12);
    EXPECT_NEAR(ensemble_loss<double>(pair, X, Labels{1}), 2.0, 1e-12);
}

TEST(Ensemble, GradientIsMeanOfMemberGradients) {
    const auto spec = named_architecture("cnn", {1, 10, 10}, 3, 2);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::vector<ModelState<double>> models{build_model<double>(spec, seed), build_model<double>(spec, seed + 50)};
        Rng rng(seed);
        const auto X = oracle::random_tensor<double>(rng, {3, 1, 10, 10}, 0, 1);
        const auto delta = oracle::random_tensor<double>(rng, {1, 10, 10}, -0.05, 0.05);
        const auto Y = oracle::random_labels(rng, 3, 3);
        for (GradTarget wrt : {GradTarget::input, GradTarget::perturbation}) {
            const auto e = ensemble_backward<double>(models, X, Y, wrt, &delta);
            const auto a = backward(models[0], X, Y, wrt, &delta);
            const auto b = backward(models[1], X, Y, wrt, &delta);
            for (std::size_t i = 0; i < e.grad.numel(); ++i) EXPECT_NEAR(e.grad[i], 0.5 * (a.grad[i] + b.grad[i]), 1e-12);
        }
    }
}

TEST(Ensemble, Errors) {
    const std::vector<ModelState<double>> none;
    EXPECT_THROW(ensemble_loss<double>(none, Tensor<double>({1, 4}), Labels{0}), Error);
    const std::vector<ModelState<double>> mixed{build_model<double>(named_architecture("logistic", {4}, 2), 1),
                                                build_model<double>(named_architecture("logistic", {5}, 2), 1)};
    EXPECT_THROW(ensemble_loss<double>(mixed, Tensor<double>({1, 4}), Labels{0}), ShapeError);
}
