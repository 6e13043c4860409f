// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/model.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "conv_engine.hpp"
#include "tensor_ops.hpp"
#include "kpdet/error.hpp"

namespace kpdet {

const char* backbone_name(Backbone backbone) noexcept {
  return backbone == Backbone::kDrnet ? "drnet" : "hourglass";
}

Backbone parse_backbone(const std::string& name) {
  if (name == "drnet") return Backbone::kDrnet;
  if (name == "hourglass") return Backbone::kHourglass;
  throw Error(ErrorCode::kInvalidArgument, "unknown backbone '" + name + "'");
}

void ModelConfig::validate() const {
  if (num_scales < 1) throw Error(ErrorCode::kInvalidArgument, "num_scales must be >= 1");
  if (num_keypoints != 5 && num_keypoints != 19) {
    throw Error(ErrorCode::kInvalidArgument, "num_keypoints must be 5 or 19");
  }
  if (input_long_side < 8 || input_long_side % 8 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "input_long_side must be a positive multiple of 8");
  }
}

int LayerGraph::count_layers(LayerRole role) const {
  int n = 0;
  for (const Node& node : nodes_) {
    if (node.kind == OpKind::kConv && node.role == role) ++n;
  }
  return n;
}

GraphBuilder::GraphBuilder(int input_channels) {
  Node in;
  in.name = "input";
  in.kind = OpKind::kInput;
  in.channels = input_channels;
  nodes_.push_back(std::move(in));
}

int GraphBuilder::conv(const std::string& name, int from, int out_channels, int kernel,
                       int stride, Activation activation, bool batch_norm, LayerRole role) {
  Node n;
  n.name = name;
  n.kind = OpKind::kConv;
  n.inputs = {from};
  n.channels = out_channels;
  n.role = role;
  n.has_batch_norm = batch_norm;
  n.activation = activation;
  n.conv.out_channels = out_channels;
  n.conv.in_channels = channels(from);
  n.conv.kernel_h = kernel;
  n.conv.kernel_w = kernel;
  n.conv.stride = stride;
  n.conv.padding = (kernel - 1) / 2;
  n.conv.weights.assign(n.conv.weight_count(), 0.0f);
  n.conv.bias.assign(out_channels, 0.0f);
  n.conv.validate();
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int GraphBuilder::maxpool(int from, int size, int stride, bool ceil_mode) {
  Node n;
  n.name = "pool" + std::to_string(nodes_.size());
  n.kind = OpKind::kMaxPool;
  n.inputs = {from};
  n.channels = channels(from);
  n.pool_size = size;
  n.pool_stride = stride;
  n.pool_ceil = ceil_mode;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int GraphBuilder::upsample(int from, int like) {
  Node n;
  n.name = "upsample" + std::to_string(nodes_.size());
  n.kind = OpKind::kUpsample;
  n.inputs = {from};
  if (like >= 0) n.inputs.push_back(like);
  n.channels = channels(from);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int GraphBuilder::add(int a, int b, Activation activation) {
  if (channels(a) != channels(b)) {
    throw Error(ErrorCode::kShapeMismatch, "add of nodes with different channel counts");
  }
  Node n;
  n.name = "add" + std::to_string(nodes_.size());
  n.kind = OpKind::kAdd;
  n.inputs = {a, b};
  n.channels = channels(a);
  n.activation = activation;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int GraphBuilder::concat(int a, int b) {
  Node n;
  n.name = "concat" + std::to_string(nodes_.size());
  n.kind = OpKind::kConcat;
  n.inputs = {a, b};
  n.channels = channels(a) + channels(b);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

LayerGraph GraphBuilder::finish(int scale_head, int landmark_head, int total_stride,
                                const ModelConfig& config) && {
  LayerGraph g;
  g.nodes_ = std::move(nodes_);
  g.scale_head_ = scale_head;
  g.landmark_head_ = landmark_head;
  g.total_stride_ = total_stride;
  g.config_ = config;
  return g;
}

namespace {

// DRNet channel widths at strides 2 (stem), 4, 8 and the stride-2 fusion.
constexpr int kDrnetStem = 32;
constexpr int kDrnetQuarter = 64;
constexpr int kDrnetEighth = 160;
constexpr int kDrnetFuse = 32;

constexpr int kHourglassChannels = 64;
constexpr int kHourglassDepth = 4;

int residual_unit(GraphBuilder& b, const std::string& name, int x) {
  int c = b.conv(name, x, b.channels(x), 3, 1, Activation::kNone);
  return b.add(c, x, Activation::kRelu);
}

int basic_block(GraphBuilder& b, const std::string& name, int x) {
  int c1 = b.conv(name + ".a", x, b.channels(x), 3, 1, Activation::kRelu);
  int c2 = b.conv(name + ".b", c1, b.channels(x), 3, 1, Activation::kNone);
  return b.add(c2, x, Activation::kRelu);
}

int hourglass(GraphBuilder& b, const std::string& name, int x, int depth) {
  int up1 = basic_block(b, name + ".up1", x);
  // Ceil mode keeps odd and single-pixel maps alive at every depth.
  int pooled = b.maxpool(x, 2, 2, true);
  int low1 = basic_block(b, name + ".low1", pooled);
  int low2 = depth > 1 ? hourglass(b, name + ".inner", low1, depth - 1)
                       : basic_block(b, name + ".low2", low1);
  int low3 = basic_block(b, name + ".low3", low2);
  int up2 = b.upsample(low3, up1);
  return b.add(up1, up2);
}

}  // namespace

LayerGraph build_drnet(const ModelConfig& config) {
  config.validate();
  GraphBuilder b;
  const auto relu = Activation::kRelu;
  const auto none = Activation::kNone;

  int stem = b.conv("stem", b.input(), kDrnetStem, 3, 2, relu);
  int pooled = b.maxpool(stem, 2, 2);

  // Stride 4 encoder. The first unit widens, so its skip needs a projection.
  int c = b.conv("enc4_1", pooled, kDrnetQuarter, 3, 1, none);
  int proj = b.conv("enc4_1_proj", pooled, kDrnetQuarter, 1, 1, none, true, LayerRole::kShortcut);
  int x = b.add(c, proj, relu);
  x = residual_unit(b, "enc4_2", x);
  int quarter = residual_unit(b, "enc4_3", x);

  // Stride 8.
  int d1 = b.conv("down8_a", quarter, kDrnetEighth, 3, 2, relu);
  int d2 = b.conv("down8_b", d1, kDrnetEighth, 3, 1, none);
  int dproj = b.conv("down8_proj", quarter, kDrnetEighth, 1, 2, none, true, LayerRole::kShortcut);
  x = b.add(d2, dproj, relu);
  x = residual_unit(b, "enc8_1", x);
  x = residual_unit(b, "enc8_2", x);

  // Back up to stride 4, summed with the encoder features.
  int lateral = b.conv("lateral8", x, kDrnetQuarter, 1, 1, relu);
  x = b.add(b.upsample(lateral), quarter);
  x = residual_unit(b, "dec4", x);

  // Stride 2 with the large-span concatenation from the stem.
  x = b.concat(b.upsample(x), stem);
  int fused = b.conv("fuse2", x, kDrnetFuse, 3, 1, relu);

  int scale = b.conv("scale_head", fused, config.num_scales, 3, 1, none, false, LayerRole::kHead);
  int landmark =
      b.conv("landmark_head", fused, config.num_keypoints, 3, 1, none, false, LayerRole::kHead);
  return std::move(b).finish(scale, landmark, 2, config);
}

LayerGraph build_hourglass_light(const ModelConfig& config) {
  config.validate();
  GraphBuilder b;
  // Two stacked 3x3 convs replace a 7x7 stride-2 stem; nothing between them.
  int s1 = b.conv("stem_a", b.input(), kHourglassChannels, 3, 2, Activation::kNone, false);
  int s2 = b.conv("stem_b", s1, kHourglassChannels, 3, 1, Activation::kRelu);
  int pooled = b.maxpool(s2, 2, 2);
  int hg = hourglass(b, "hg", pooled, kHourglassDepth);
  int up = b.upsample(hg);

  int scale = b.conv("scale_head", up, config.num_scales, 3, 1, Activation::kNone, false,
                     LayerRole::kHead);
  int landmark = b.conv("landmark_head", up, config.num_keypoints, 3, 1, Activation::kNone, false,
                        LayerRole::kHead);
  return std::move(b).finish(scale, landmark, 2, config);
}

LayerGraph build_backbone(Backbone backbone, const ModelConfig& config) {
  return backbone == Backbone::kDrnet ? build_drnet(config) : build_hourglass_light(config);
}

void initialize_random(LayerGraph& graph, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int scale_head = graph.scale_head();
  auto& nodes = graph.mutable_nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Node& node = nodes[i];
    if (node.kind != OpKind::kConv) continue;
    ConvParams& p = node.conv;
    if (node.role == LayerRole::kHead) {
      // Small head weights keep untrained logits moderate; the scale head
      // starts from a prior of 0.01 so an untrained model proposes little.
      std::normal_distribution<float> head_dist(0.0f, 0.01f);
      for (float& w : p.weights) w = head_dist(rng);
      const float prior = static_cast<int>(i) == scale_head ? -std::log(99.0f) : 0.0f;
      std::fill(p.bias.begin(), p.bias.end(), prior);
      continue;
    }
    const int fan_in = p.in_channels * p.kernel_h * p.kernel_w;
    std::normal_distribution<float> weight_dist(0.0f, std::sqrt(2.0f / fan_in));
    for (float& w : p.weights) w = weight_dist(rng);
    std::fill(p.bias.begin(), p.bias.end(), 0.0f);
    if (node.has_batch_norm) {
      std::uniform_real_distribution<float> gamma(0.5f, 1.5f);
      std::uniform_real_distribution<float> var(0.5f, 1.5f);
      std::normal_distribution<float> shift(0.0f, 0.1f);
      BnParams bn;
      for (int c = 0; c < p.out_channels; ++c) {
        bn.gamma.push_back(gamma(rng));
        bn.beta.push_back(shift(rng));
        bn.running_mean.push_back(shift(rng));
        bn.running_var.push_back(var(rng));
      }
      p = bn_fold(p, bn);
    } else {
      std::normal_distribution<float> bias_dist(0.0f, 0.1f);
      for (float& v : p.bias) v = bias_dist(rng);
    }
  }
}

std::uint64_t count_params(const LayerGraph& graph) {
  std::uint64_t n = 0;
  for (const Node& node : graph.nodes()) {
    if (node.kind == OpKind::kConv) n += node.conv.weights.size() + node.conv.bias.size();
  }
  return n;
}

namespace {

void check_image(const LayerGraph& graph, const Tensor& image, const Shape& expected) {
  if (graph.nodes().empty() || graph.scale_head() < 0 || graph.landmark_head() < 0) {
    throw Error(ErrorCode::kInvalidArgument, "graph has no designated outputs");
  }
  if (image.channels() != graph.nodes()[0].channels) {
    throw Error(ErrorCode::kShapeMismatch, "image must have " +
                                               std::to_string(graph.nodes()[0].channels) +
                                               " channels");
  }
  if (image.height() % 8 != 0 || image.width() % 8 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "image height and width must be multiples of 8, got " +
                                                 std::to_string(image.height()) + "x" +
                                                 std::to_string(image.width()));
  }
  if (expected.size() != 0 && image.shape() != expected) {
    throw Error(ErrorCode::kShapeMismatch, "batch images must share one shape");
  }
}

}  // namespace

namespace {

// One image through the whole graph. Running image-major keeps a single
// image's activations cache resident; convs reuse weights packed up front and
// activation storage cycles through the pool.
HeadOutputs run_graph(const LayerGraph& graph, const Tensor& image,
                      std::span<const std::optional<detail::PackedConv>> packed,
                      std::span<const int> last_use, detail::BufferPool& pool) {
  const auto& nodes = graph.nodes();
  const int n_nodes = static_cast<int>(nodes.size());
  std::vector<Tensor> values(n_nodes);
  values[0] = Tensor(image.shape(), pool.take(image.size()));
  std::copy(image.data().begin(), image.data().end(), values[0].data().begin());
  for (int i = 1; i < n_nodes; ++i) {
    const Node& node = nodes[i];
    const Tensor& a = values[node.inputs.at(0)];
    switch (node.kind) {
      case OpKind::kConv:
        values[i] = detail::conv2d(a, *packed[i], node.activation, pool);
        break;
      case OpKind::kMaxPool:
        values[i] = detail::maxpool2d(a, node.pool_size, node.pool_stride, node.pool_ceil, pool);
        break;
      case OpKind::kUpsample: {
        const bool sized = node.inputs.size() > 1;
        const int h = sized ? values[node.inputs[1]].height() : a.height() * 2;
        const int w = sized ? values[node.inputs[1]].width() : a.width() * 2;
        values[i] = detail::upsample_nearest_to(a, h, w, pool);
        break;
      }
      case OpKind::kAdd:
        values[i] = detail::add(a, values[node.inputs[1]], node.activation, pool);
        break;
      case OpKind::kConcat:
        values[i] = detail::concat_channels(a, values[node.inputs[1]], pool);
        break;
      case OpKind::kInput:
        throw Error(ErrorCode::kInternal, "input node in the middle of a graph");
    }
    // Activations are dropped after their last consumer.
    for (int in : node.inputs) {
      if (last_use[in] == i) pool.give(std::move(values[in]));
    }
  }
  HeadOutputs out;
  out.scale_logits = std::move(values[graph.scale_head()]);
  out.landmark_logits = std::move(values[graph.landmark_head()]);
  return out;
}

}  // namespace

std::vector<HeadOutputs> forward_batch(const LayerGraph& graph, std::span<const Tensor> images) {
  std::vector<HeadOutputs> results;
  if (images.empty()) return results;
  for (const Tensor& img : images) check_image(graph, img, images[0].shape());

  const auto& nodes = graph.nodes();
  const int n_nodes = static_cast<int>(nodes.size());
  std::vector<int> last_use(n_nodes, -1);
  for (int i = 0; i < n_nodes; ++i) {
    for (int in : nodes[i].inputs) last_use[in] = i;
  }
  last_use[graph.scale_head()] = n_nodes;
  last_use[graph.landmark_head()] = n_nodes;

  std::vector<std::optional<detail::PackedConv>> packed(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    if (nodes[i].kind == OpKind::kConv) {
      nodes[i].conv.validate();
      packed[i].emplace(nodes[i].conv);
    }
  }
  detail::BufferPool pool(images.size() > 1);
  results.reserve(images.size());
  for (const Tensor& img : images) {
    results.push_back(run_graph(graph, img, packed, last_use, pool));
  }
  return results;
}

HeadOutputs forward(const LayerGraph& graph, const Tensor& image) {
  return std::move(forward_batch(graph, {&image, 1}).front());
}

}  // namespace kpdet
