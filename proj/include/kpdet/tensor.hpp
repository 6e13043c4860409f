// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// Dense CHW float tensors and the small set of layer operations the two
// backbones need. Every operation is a pure function of its inputs.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kpdet {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * height * width;
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, float fill = 0.0f);
  Tensor(int channels, int height, int width, float fill = 0.0f)
      : Tensor(Shape{channels, height, width}, fill) {}
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  int channels() const noexcept { return shape_.channels; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }
  float at(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> channel(int c) noexcept { return data().subspan(c * shape_.plane(), shape_.plane()); }
  std::span<const float> channel(int c) const noexcept {
    return data().subspan(c * shape_.plane(), shape_.plane());
  }

  // Moves the buffer out, leaving an empty tensor.
  std::vector<float> release() && noexcept {
    shape_ = {};
    return std::move(data_);
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<float> data_;
};

enum class Activation { kNone, kRelu };

// Weights are laid out out_ch x in_ch x kh x kw. An empty bias means no bias.
struct ConvParams {
  int out_channels = 0;
  int in_channels = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  int stride = 1;
  int padding = 0;
  std::vector<float> weights;
  std::vector<float> bias;

  std::size_t weight_count() const noexcept {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_h * kernel_w;
  }
  // Throws Error(kInvalidArgument) when the kernel, stride or buffers are inconsistent.
  void validate() const;
};

struct BnParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float epsilon = 1e-5f;
};

// Cross-correlation with symmetric zero padding, bias and an optional fused
// activation. Output is (out_ch, (H + 2p - kh) / s + 1, (W + 2p - kw) / s + 1).
Tensor conv2d(const Tensor& input, const ConvParams& params,
              Activation activation = Activation::kNone);

// Runs the same convolution over several equally shaped inputs in one pass.
std::vector<Tensor> conv2d_batch(std::span<const Tensor> inputs, const ConvParams& params,
                                 Activation activation = Activation::kNone);

Shape conv2d_output_shape(const Shape& input, const ConvParams& params);

// ceil_mode keeps a final partial window (clipped to the input) instead of
// dropping it, so any input of at least one pixel yields at least one output.
Tensor maxpool2d(const Tensor& input, int size, int stride, bool ceil_mode = false);

Tensor upsample_nearest2(const Tensor& input);

// Nearest-neighbour resize to an explicit size; source row for target row y is
// min(y / 2, H - 1). Identical to upsample_nearest2 when the target is exactly 2x.
Tensor upsample_nearest_to(const Tensor& input, int height, int width);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b, Activation activation = Activation::kNone);
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Returns a convolution equivalent to batch norm applied after `conv`.
ConvParams bn_fold(const ConvParams& conv, const BnParams& bn);

}  // namespace kpdet
