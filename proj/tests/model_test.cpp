// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <tuple>

#include "kpdet/error.hpp"
#include "kpdet/model.hpp"
#include "oracles.hpp"

namespace kpdet {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

TEST(CountParams, SingleConvClosedForm) {
  GraphBuilder b;
  const int c = b.conv("c", b.input(), 8, 3, 1, Activation::kNone, false);
  const LayerGraph g = std::move(b).finish(c, c, 1);
  EXPECT_EQ(count_params(g), 3u * 3 * 3 * 8 + 8);
}

TEST(CountParams, EmptyGraph) {
  GraphBuilder b;
  const LayerGraph g = std::move(b).finish(0, 0, 1);
  EXPECT_EQ(count_params(g), 0u);
}

TEST(CountParams, BackboneBudgets) {
  const auto drnet = count_params(build_drnet());
  const auto hourglass = count_params(build_hourglass_light());
  EXPECT_GE(drnet, 920'000u);
  EXPECT_LE(drnet, 1'120'000u);
  EXPECT_GE(hourglass, 940'000u);
  EXPECT_LE(hourglass, 1'140'000u);
}

TEST(Drnet, ElevenBackboneLayers) {
  EXPECT_EQ(build_drnet().count_layers(LayerRole::kBackbone), 11);
  EXPECT_EQ(build_drnet().count_layers(LayerRole::kHead), 2);
}

TEST(Graph, TopologicallyOrdered) {
  for (Backbone bb : {Backbone::kDrnet, Backbone::kHourglass}) {
    const LayerGraph g = build_backbone(bb);
    for (std::size_t i = 0; i < g.nodes().size(); ++i) {
      for (int in : g.nodes()[i].inputs) EXPECT_LT(in, static_cast<int>(i));
    }
  }
}

class BackboneShapes
    : public ::testing::TestWithParam<std::tuple<Backbone, int, int>> {};

TEST_P(BackboneShapes, HeadsAtHalfResolution) {
  const auto [bb, h, w] = GetParam();
  LayerGraph g = build_backbone(bb);
  initialize_random(g, 11);
  const HeadOutputs out = forward(g, Tensor(3, h, w, 0.5f));
  EXPECT_EQ(out.scale_logits.shape(), (Shape{60, h / 2, w / 2}));
  EXPECT_EQ(out.landmark_logits.shape(), (Shape{5, h / 2, w / 2}));
  EXPECT_EQ(g.total_stride(), 2);
}

INSTANTIATE_TEST_SUITE_P(
    Inputs, BackboneShapes,
    ::testing::Combine(::testing::Values(Backbone::kDrnet, Backbone::kHourglass),
                       ::testing::Values(256, 192, 128, 72), ::testing::Values(256, 384, 40)));

TEST(Hourglass, StemHalvesAndWidens) {
  const LayerGraph g = build_hourglass_light();
  // The stem ends with the first BN + ReLU convolution.
  const Node& stem = g.nodes()[2];
  EXPECT_EQ(stem.channels, 64);
  EXPECT_TRUE(stem.has_batch_norm);
  EXPECT_FALSE(g.nodes()[1].has_batch_norm);
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  const LayerGraph g = build_drnet();
  oracle::Rng rng(1);
  const HeadOutputs out = forward(g, oracle::random_tensor(rng, 3, 64, 64));
  for (float v : out.scale_logits.data()) ASSERT_EQ(v, 0.0f);
  for (float v : out.landmark_logits.data()) ASSERT_EQ(v, 0.0f);
}

TEST(Forward, DeterministicAndFinite) {
  LayerGraph g = build_hourglass_light();
  initialize_random(g, 5);
  oracle::Rng rng(2);
  const Tensor x = oracle::random_tensor(rng, 3, 64, 96, 0, 1);
  const HeadOutputs a = forward(g, x);
  const HeadOutputs b = forward(g, x);
  EXPECT_EQ(a.scale_logits, b.scale_logits);
  EXPECT_EQ(a.landmark_logits, b.landmark_logits);
  for (float v : a.scale_logits.data()) ASSERT_TRUE(std::isfinite(v));
}

TEST(Forward, BatchMatchesSingle) {
  // Batches reuse activation buffers across images; results must not notice.
  for (Backbone b : {Backbone::kDrnet, Backbone::kHourglass}) {
    LayerGraph g = build_backbone(b);
    initialize_random(g, 9);
    oracle::Rng rng(3);
    std::vector<Tensor> xs;
    for (int i = 0; i < 3; ++i) xs.push_back(oracle::random_tensor(rng, 3, 48, 40, 0, 1));
    const auto batch = forward_batch(g, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const HeadOutputs one = forward(g, xs[i]);
      EXPECT_EQ(batch[i].scale_logits, one.scale_logits);
      EXPECT_EQ(batch[i].landmark_logits, one.landmark_logits);
    }
  }
}

TEST(Forward, RejectsBadInput) {
  const LayerGraph g = build_drnet();
  EXPECT_EQ(code_of([&] { forward(g, Tensor(3, 30, 32)); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { forward(g, Tensor(1, 32, 32)); }), ErrorCode::kShapeMismatch);
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  c.num_keypoints = 19;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(build_drnet(c).nodes()[build_drnet(c).landmark_head()].channels, 19);
  c.num_keypoints = 7;
  EXPECT_THROW(c.validate(), Error);
  c.num_keypoints = 5;
  c.input_long_side = 100;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_backbone("resnet"), Error);
  EXPECT_EQ(parse_backbone("hourglass"), Backbone::kHourglass);
}

// --- weight files ---

class WeightFile : public ::testing::Test {
 protected:
  void SetUp() override {
    graph_ = build_drnet();
    initialize_random(graph_, 21);
    bytes_ = save_weights(graph_);
  }
  LayerGraph graph_;
  std::vector<std::uint8_t> bytes_;
};

TEST_F(WeightFile, RoundTripIsExact) {
  const LayerGraph back = load_weights(build_drnet(), bytes_);
  EXPECT_EQ(save_weights(back), bytes_);
  oracle::Rng rng(4);
  const Tensor x = oracle::random_tensor(rng, 3, 64, 64, 0, 1);
  EXPECT_EQ(forward(back, x).scale_logits, forward(graph_, x).scale_logits);
}

TEST_F(WeightFile, Header) {
  ASSERT_GE(bytes_.size(), 12u);
  EXPECT_EQ(std::memcmp(bytes_.data(), "KPNW", 4), 0);
  std::uint32_t version = 0;
  std::memcpy(&version, bytes_.data() + 4, 4);
  EXPECT_EQ(version, kWeightFormatVersion);
}

TEST_F(WeightFile, DesignatedErrors) {
  const LayerGraph empty = build_drnet();
  auto load = [&](std::vector<std::uint8_t> b) {
    return code_of([&] { load_weights(empty, b); });
  };
  auto b = bytes_;
  b.resize(b.size() - 4);
  EXPECT_EQ(load(b), ErrorCode::kTruncated);
  b = bytes_;
  b[0] = 'X';
  EXPECT_EQ(load(b), ErrorCode::kBadMagic);
  b = bytes_;
  b[4] = 9;
  EXPECT_EQ(load(b), ErrorCode::kBadVersion);
  b = bytes_;
  b.push_back(0);
  EXPECT_EQ(load(b), ErrorCode::kMalformed);
  EXPECT_EQ(load({}), ErrorCode::kTruncated);

  // Hourglass weights into a DRNet graph: names differ.
  LayerGraph hg = build_hourglass_light();
  EXPECT_NE(code_of([&] { load_weights(empty, save_weights(hg)); }), ErrorCode::kOk);

  // Same names, different keypoint count: shape mismatch on the landmark head.
  ModelConfig k19;
  k19.num_keypoints = 19;
  EXPECT_EQ(code_of([&] { load_weights(build_drnet(k19), bytes_); }), ErrorCode::kShapeMismatch);
}

TEST_F(WeightFile, MissingTensor) {
  // Drop the final tensor (landmark head bias) and patch the count.
  GraphBuilder b;
  const int c = b.conv("c", b.input(), 2, 1, 1, Activation::kNone, false);
  LayerGraph g = std::move(b).finish(c, c, 1);
  initialize_random(g, 1);
  auto bytes = save_weights(g);
  // Layout: header(12) + "c.weight" record + "c.bias" record.
  const std::size_t weight_record = 2 + 8 + 1 + 4 * 4 + 4 * 6;
  bytes.resize(12 + weight_record);
  bytes[8] = 1;
  EXPECT_EQ(code_of([&] { load_weights(g, bytes); }), ErrorCode::kMissingTensor);
}

}  // namespace
}  // namespace kpdet
