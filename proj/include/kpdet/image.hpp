// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kpdet/geometry.hpp"
#include "kpdet/tensor.hpp"

namespace kpdet {

// Binary PGM (P5) or PPM (P6) with maxval 255. Returns a 3 x H x W tensor in
// [0, 1]; grayscale is replicated to all three channels. Malformed input
// throws Error(kBadImage) or Error(kTruncated).
Tensor parse_pnm(std::span<const std::uint8_t> bytes);
Tensor load_pnm(const std::string& path);

// Writes a P6 file from a 3-channel tensor (values clamped to [0, 1]).
std::vector<std::uint8_t> encode_ppm(const Tensor& image);

// Bilinear resize using pixel-center alignment: source coordinate
// (x + 0.5) * in_w / out_w - 0.5, clamped to the image.
Tensor resize_bilinear(const Tensor& image, int height, int width);

// Maps network-input coordinates back to the original image and forward.
struct ResizeTransform {
  double scale_x = 1.0;  // network px per original px
  double scale_y = 1.0;

  Point to_original(Point p) const { return {p.x / scale_x, p.y / scale_y}; }
  Point to_network(Point p) const { return {p.x * scale_x, p.y * scale_y}; }
  Box to_original(const Box& b) const {
    return {b.x1 / scale_x, b.y1 / scale_y, b.x2 / scale_x, b.y2 / scale_y, b.score};
  }
};

struct PreparedImage {
  Tensor tensor;  // resized, zero padded on the bottom/right to multiples of 8
  ResizeTransform transform;
  int resized_height = 0;
  int resized_width = 0;
};

// Resizes so the long side equals `long_side`, then pads to multiples of 8.
PreparedImage prepare_image(const Tensor& image, int long_side);

}  // namespace kpdet
