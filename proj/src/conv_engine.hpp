// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kpdet/tensor.hpp"

namespace kpdet::detail {

// Weights and bias rearranged into the micro-kernel's panel layout. Packing
// once and reusing it across images is what a batch buys.
class PackedConv {
 public:
  explicit PackedConv(const ConvParams& params);
  PackedConv(const PackedConv&) = delete;
  PackedConv& operator=(const PackedConv&) = delete;
  PackedConv(PackedConv&&) = default;
  PackedConv& operator=(PackedConv&&) = default;
  const ConvParams& params() const noexcept { return *params_; }
  const float* weights() const noexcept { return weights_.data() + offset_; }
  const float* bias() const noexcept { return bias_.data(); }

 private:
  const ConvParams* params_;
  std::vector<float> weights_;
  std::size_t offset_ = 0;  // to the first 64-byte aligned element
  std::vector<float> bias_;
};

// Computes outputs[i] = act(conv(inputs[i])) for every i. All inputs share one
// shape; outputs must already be sized to conv2d_output_shape. The packed
// form must outlive the call, and so must the params it was built from.
void run_conv(std::span<const Tensor* const> inputs, const PackedConv& packed,
              Activation activation, std::span<Tensor* const> outputs);

// Packs, then runs the whole batch against the one packed copy.
void run_conv(std::span<const Tensor* const> inputs, const ConvParams& params,
              Activation activation, std::span<Tensor* const> outputs);

}  // namespace kpdet::detail
