// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// Fine-grained scale maps: a per-pixel, per-size-bin probability volume.
//
// Face sizes between 2^5 and 2^11 pixels (at a 2048 px long side) are split
// into 60 logarithmic bins, ten per octave. Bin b (1-based) covers sizes in
// (2^(5 + (b-1)/10), 2^(5 + b/10)] * i_max / 2048, where i_max is the long
// side of the network input. Channel b-1 of the map holds bin b.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <vector>

#include "kpdet/error.hpp"
#include "kpdet/tensor.hpp"

namespace kpdet {

inline constexpr int kNumScaleBins = 60;

struct ScaleCodecParams {
  int num_scales = kNumScaleBins;
  int stride = 2;
  double i_max = 256.0;
  double sigma = 0.1;
};

struct GroundTruthFace {
  double cx = 0.0;  // center, input-image px
  double cy = 0.0;
  double h = 0.0;
  double w = 0.0;
};

struct ScaleMap {
  Tensor values;  // num_scales x H' x W', each value in [0, 1]
  int stride = 2;
  double i_max = 256.0;
};

// Square region in heatmap coordinates decoded from one map cell.
struct ScaleProposal {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double score = 0.0;  // map value at the cell
  double scale = 0.0;  // face size, input-image px
  int cell_x = 0;
  int cell_y = 0;
  int bin = 0;  // 1-based
};

// 1-based bin for a face of size max(h, w).
int encode_scale_index(double h, double w, double i_max, int num_scales = kNumScaleBins);

// Face size at the geometric middle of a bin.
double scale_bin_center(int bin, double i_max);

ScaleMap paint_target(std::span<const GroundTruthFace> faces, int map_height, int map_width,
                      const ScaleCodecParams& params = {});

// Every cell with value >= threshold becomes one proposal, sorted by score
// (descending, ties in channel-major scan order). `max_proposals` > 0 keeps
// only that many of the best.
std::vector<ScaleProposal> decode_proposals(const ScaleMap& map, double threshold,
                                            std::size_t max_proposals = 0);

// Mean binary cross entropy over all map entries. Log arguments are clamped
// to at least kBceEpsilon; a zero coefficient drops its term entirely.
inline constexpr double kBceEpsilon = 1e-7;

template <std::floating_point T>
T scale_bce_loss(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "scale_bce_loss: prediction and target differ in size");
  }
  const T eps = static_cast<T>(kBceEpsilon);
  T sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T p = target[i];
    const T q = pred[i];
    if (p != T(0)) sum += p * std::log(std::max(q, eps));
    if (p != T(1)) sum += (T(1) - p) * std::log(std::max(T(1) - q, eps));
  }
  return -sum / static_cast<T>(pred.size());
}

template <std::floating_point T>
std::vector<T> scale_bce_loss_grad(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw Error(ErrorCode::kShapeMismatch,
                "scale_bce_loss_grad: prediction and target differ in size");
  }
  const T eps = static_cast<T>(kBceEpsilon);
  const T inv_n = T(1) / static_cast<T>(pred.size());
  std::vector<T> grad(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T p = target[i];
    const T q = pred[i];
    T g = 0;
    if (p != T(0) && q > eps) g -= p / q;
    if (p != T(1) && T(1) - q > eps) g += (T(1) - p) / (T(1) - q);
    grad[i] = g * inv_n;
  }
  return grad;
}

}  // namespace kpdet
