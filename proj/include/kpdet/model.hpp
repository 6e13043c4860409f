// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// Layer graphs for the two backbones and their execution.
//
// A LayerGraph is a topologically ordered list of nodes. Node 0 is the image
// input; every other node reads only from earlier nodes. Convolutions carry
// batch norm already folded into their bias, so inference needs no separate
// normalization step. Two nodes are designated as outputs: the scale head
// (S channels) and the landmark head (K channels), both at stride 2.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpdet/tensor.hpp"

namespace kpdet {

enum class Backbone { kDrnet, kHourglass };

const char* backbone_name(Backbone backbone) noexcept;
// Accepts "drnet" and "hourglass". Throws Error(kInvalidArgument) otherwise.
Backbone parse_backbone(const std::string& name);

struct ModelConfig {
  int num_scales = 60;
  int num_keypoints = 5;
  int input_long_side = 256;

  void validate() const;
};

enum class OpKind { kInput, kConv, kMaxPool, kUpsample, kAdd, kConcat };

// Backbone layers form the main path; shortcut layers are projection convs on
// residual skips; head layers produce the two outputs.
enum class LayerRole { kBackbone, kShortcut, kHead };

struct Node {
  std::string name;
  OpKind kind = OpKind::kInput;
  std::vector<int> inputs;
  int channels = 0;  // output channel count
  LayerRole role = LayerRole::kBackbone;
  // kConv
  ConvParams conv;
  bool has_batch_norm = false;
  Activation activation = Activation::kNone;
  // kMaxPool
  int pool_size = 0;
  int pool_stride = 0;
  bool pool_ceil = false;
};

struct HeadOutputs {
  Tensor scale_logits;
  Tensor landmark_logits;
};

class LayerGraph {
 public:
  LayerGraph() = default;

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::vector<Node>& mutable_nodes() noexcept { return nodes_; }
  int scale_head() const noexcept { return scale_head_; }
  int landmark_head() const noexcept { return landmark_head_; }
  int total_stride() const noexcept { return total_stride_; }
  const ModelConfig& config() const noexcept { return config_; }

  // Weighted layers with the given role.
  int count_layers(LayerRole role) const;

 private:
  friend class GraphBuilder;
  std::vector<Node> nodes_;
  int scale_head_ = -1;
  int landmark_head_ = -1;
  int total_stride_ = 1;
  ModelConfig config_;
};

// Incremental construction of a LayerGraph. Convolutions start with zero
// weights and a zero bias; use initialize_random or load_weights to fill them.
class GraphBuilder {
 public:
  explicit GraphBuilder(int input_channels = 3);

  int input() const noexcept { return 0; }
  int channels(int node) const { return nodes_.at(node).channels; }

  // Padding defaults to (kernel - 1) / 2.
  int conv(const std::string& name, int from, int out_channels, int kernel, int stride,
           Activation activation, bool batch_norm = true, LayerRole role = LayerRole::kBackbone);
  int maxpool(int from, int size, int stride, bool ceil_mode = false);
  // Nearest x2 upsample. When `like` is given, the output takes like's
  // spatial size instead (rows past 2H repeat the last source row).
  int upsample(int from, int like = -1);
  int add(int a, int b, Activation activation = Activation::kNone);
  int concat(int a, int b);

  LayerGraph finish(int scale_head, int landmark_head, int total_stride,
                    const ModelConfig& config = {}) &&;

 private:
  std::vector<Node> nodes_;
};

LayerGraph build_drnet(const ModelConfig& config = {});
LayerGraph build_hourglass_light(const ModelConfig& config = {});
LayerGraph build_backbone(Backbone backbone, const ModelConfig& config = {});

// Fills backbone convolutions with He-normal weights; layers marked with batch
// norm get a random normalization folded into their weights and bias. Head
// convolutions get N(0, 0.01) weights, and the scale head a bias for a 0.01
// face prior.
void initialize_random(LayerGraph& graph, std::uint64_t seed);

std::uint64_t count_params(const LayerGraph& graph);

// Requires a 3-channel image whose height and width are multiples of 8.
HeadOutputs forward(const LayerGraph& graph, const Tensor& image);
std::vector<HeadOutputs> forward_batch(const LayerGraph& graph, std::span<const Tensor> images);

// Weight file: "KPNW", u32 version (1), u32 tensor count, then per tensor a
// u16 name length, the UTF-8 name, u8 rank, rank x u32 dims and the f32 data.
// Everything little-endian. Tensors are named "<node>.weight" and "<node>.bias".
inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::vector<std::uint8_t> save_weights(const LayerGraph& graph);
LayerGraph load_weights(const LayerGraph& graph, std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace kpdet
