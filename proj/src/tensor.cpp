// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "conv_engine.hpp"
#include "tensor_ops.hpp"
#include "kpdet/error.hpp"

namespace kpdet {
namespace {

std::string shape_str(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

void check_shape(const Shape& s) {
  if (s.channels < 1 || s.height < 1 || s.width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "tensor dims must be >= 1, got " + shape_str(s));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
  check_shape(shape);
  data_.assign(shape.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  check_shape(shape);
  if (data_.size() != shape.size()) {
    throw Error(ErrorCode::kShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                               " does not match " + shape_str(shape));
  }
}

void ConvParams::validate() const {
  auto kernel_ok = [](int k) { return k == 1 || k == 3 || k == 7; };
  if (!kernel_ok(kernel_h) || !kernel_ok(kernel_w)) {
    throw Error(ErrorCode::kInvalidArgument, "kernel size must be 1, 3 or 7");
  }
  if (stride != 1 && stride != 2) {
    throw Error(ErrorCode::kInvalidArgument, "stride must be 1 or 2");
  }
  if (padding < 0 || out_channels < 1 || in_channels < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bad convolution geometry");
  }
  if (weights.size() != weight_count()) {
    throw Error(ErrorCode::kShapeMismatch, "convolution weight count mismatch");
  }
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels)) {
    throw Error(ErrorCode::kShapeMismatch, "convolution bias count mismatch");
  }
}

Shape conv2d_output_shape(const Shape& input, const ConvParams& params) {
  if (input.channels != params.in_channels) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d expects " + std::to_string(params.in_channels) + " input channels, got " +
                    std::to_string(input.channels));
  }
  const int oh = (input.height + 2 * params.padding - params.kernel_h) / params.stride + 1;
  const int ow = (input.width + 2 * params.padding - params.kernel_w) / params.stride + 1;
  if (input.height + 2 * params.padding < params.kernel_h ||
      input.width + 2 * params.padding < params.kernel_w || oh < 1 || ow < 1) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d output would be empty for input " +
                                               shape_str(input));
  }
  return Shape{params.out_channels, oh, ow};
}

Tensor conv2d(const Tensor& input, const ConvParams& params, Activation activation) {
  params.validate();
  Tensor out(conv2d_output_shape(input.shape(), params));
  const Tensor* in_ptr = &input;
  Tensor* out_ptr = &out;
  detail::run_conv({&in_ptr, 1}, params, activation, {&out_ptr, 1});
  return out;
}

std::vector<Tensor> conv2d_batch(std::span<const Tensor> inputs, const ConvParams& params,
                                 Activation activation) {
  params.validate();
  std::vector<Tensor> outputs;
  if (inputs.empty()) return outputs;
  const Shape out_shape = conv2d_output_shape(inputs[0].shape(), params);
  std::vector<const Tensor*> in_ptrs;
  std::vector<Tensor*> out_ptrs;
  outputs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    if (t.shape() != inputs[0].shape()) {
      throw Error(ErrorCode::kShapeMismatch, "conv2d_batch inputs differ in shape");
    }
    outputs.emplace_back(out_shape);
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    in_ptrs.push_back(&inputs[i]);
    out_ptrs.push_back(&outputs[i]);
  }
  detail::run_conv(in_ptrs, params, activation, out_ptrs);
  return outputs;
}

namespace detail {

Tensor maxpool2d(const Tensor& input, int size, int stride, bool ceil_mode, BufferPool& pool) {
  if (size < 1 || stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "pool size and stride must be >= 1");
  }
  const int h = input.height(), w = input.width();
  if (!ceil_mode && (h < size || w < size)) {
    throw Error(ErrorCode::kShapeMismatch, "pool window larger than input " +
                                               shape_str(input.shape()));
  }
  auto pooled = [&](int n) {
    if (!ceil_mode) return (n - size) / stride + 1;
    return n <= size ? 1 : (n - size + stride - 1) / stride + 1;
  };
  const int oh = pooled(h);
  const int ow = pooled(w);
  const Shape shape{input.channels(), oh, ow};
  Tensor out(shape, pool.take(shape.size()));
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      const int y1 = std::min(y * stride + size, h);
      for (int x = 0; x < ow; ++x) {
        const int x1 = std::min(x * stride + size, w);
        float m = input.at(c, y * stride, x * stride);
        for (int yy = y * stride; yy < y1; ++yy) {
          for (int xx = x * stride; xx < x1; ++xx) m = std::max(m, input.at(c, yy, xx));
        }
        out.at(c, y, x) = m;
      }
    }
  }
  return out;
}

Tensor upsample_nearest_to(const Tensor& input, int height, int width, BufferPool& pool) {
  const Shape shape{input.channels(), height, width};
  Tensor out(shape, pool.take(shape.size()));
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < height; ++y) {
      const int sy = std::min(y / 2, input.height() - 1);
      for (int x = 0; x < width; ++x) {
        out.at(c, y, x) = input.at(c, sy, std::min(x / 2, input.width() - 1));
      }
    }
  }
  return out;
}

}  // namespace detail

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = std::max(v, 0.0f);
  return out;
}

Tensor sigmoid(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = 1.0f / (1.0f + std::exp(-v));
  return out;
}

namespace detail {

Tensor add(const Tensor& a, const Tensor& b, Activation activation, BufferPool& pool) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch,
                "add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out(a.shape(), pool.take(a.size()));
  auto dst = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = x[i] + y[i];
  if (activation == Activation::kRelu) {
    for (float& v : dst) v = std::max(v, 0.0f);
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b, BufferPool& pool) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(ErrorCode::kShapeMismatch,
                "concat: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const Shape shape{a.channels() + b.channels(), a.height(), a.width()};
  Tensor out(shape, pool.take(shape.size()));
  auto rest = std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), rest);
  return out;
}

Tensor conv2d(const Tensor& input, const PackedConv& packed, Activation activation,
              BufferPool& pool) {
  const Shape shape = conv2d_output_shape(input.shape(), packed.params());
  Tensor out(shape, pool.take(shape.size()));
  const Tensor* in_ptr = &input;
  Tensor* out_ptr = &out;
  run_conv({&in_ptr, 1}, packed, activation, {&out_ptr, 1});
  return out;
}

std::vector<float> BufferPool::take(std::size_t n) {
  // Exact sizes only: every image of a batch asks for the same sequence.
  auto it = free_.find(n);
  if (it == free_.end()) return std::vector<float>(n);
  std::vector<float> v = std::move(it->second);
  free_.erase(it);
  return v;
}

void BufferPool::give(Tensor&& t) {
  std::vector<float> v = std::move(t).release();
  if (retain_ && !v.empty()) free_.emplace(v.size(), std::move(v));
}

}  // namespace detail

Tensor maxpool2d(const Tensor& input, int size, int stride, bool ceil_mode) {
  detail::BufferPool pool;
  return detail::maxpool2d(input, size, stride, ceil_mode, pool);
}

Tensor upsample_nearest2(const Tensor& input) {
  return upsample_nearest_to(input, input.height() * 2, input.width() * 2);
}

Tensor upsample_nearest_to(const Tensor& input, int height, int width) {
  detail::BufferPool pool;
  return detail::upsample_nearest_to(input, height, width, pool);
}

Tensor add(const Tensor& a, const Tensor& b, Activation activation) {
  detail::BufferPool pool;
  return detail::add(a, b, activation, pool);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  detail::BufferPool pool;
  return detail::concat_channels(a, b, pool);
}

ConvParams bn_fold(const ConvParams& conv, const BnParams& bn) {
  const auto n = static_cast<std::size_t>(conv.out_channels);
  if (bn.gamma.size() != n || bn.beta.size() != n || bn.running_mean.size() != n ||
      bn.running_var.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "batch norm channel count does not match conv");
  }
  ConvParams out = conv;
  out.bias.assign(n, 0.0f);
  const std::size_t per_out = conv.weight_count() / n;
  for (std::size_t o = 0; o < n; ++o) {
    const float denom_sq = bn.running_var[o] + bn.epsilon;
    if (!(denom_sq > 0.0f)) {
      throw Error(ErrorCode::kInvalidArgument, "batch norm variance + epsilon must be > 0");
    }
    const float scale = bn.gamma[o] / std::sqrt(denom_sq);
    for (std::size_t i = 0; i < per_out; ++i) out.weights[o * per_out + i] *= scale;
    const float b = conv.bias.empty() ? 0.0f : conv.bias[o];
    out.bias[o] = (b - bn.running_mean[o]) * scale + bn.beta[o];
  }
  return out;
}

}  // namespace kpdet
