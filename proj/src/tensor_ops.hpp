// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "conv_engine.hpp"
#include "kpdet/tensor.hpp"

namespace kpdet::detail {

// Recycled activation storage. Reusing buffers across the images of a batch
// saves the page faults a fresh multi-megabyte allocation costs.
class BufferPool {
 public:
  // A pool that does not retain frees straight away; for a single image the
  // allocator's own reuse does better than holding buffers.
  explicit BufferPool(bool retain = false) : retain_(retain) {}

  // n floats, contents unspecified.
  std::vector<float> take(std::size_t n);
  void give(Tensor&& t);

 private:
  bool retain_;
  std::multimap<std::size_t, std::vector<float>> free_;  // keyed by size
};

// The layer ops with their output storage drawn from a pool.
Tensor conv2d(const Tensor& input, const PackedConv& packed, Activation activation,
              BufferPool& pool);
Tensor maxpool2d(const Tensor& input, int size, int stride, bool ceil_mode, BufferPool& pool);
Tensor upsample_nearest_to(const Tensor& input, int height, int width, BufferPool& pool);
Tensor add(const Tensor& a, const Tensor& b, Activation activation, BufferPool& pool);
Tensor concat_channels(const Tensor& a, const Tensor& b, BufferPool& pool);

}  // namespace kpdet::detail
