// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/scale_codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kpdet {

int encode_scale_index(double h, double w, double i_max, int num_scales) {
  if (!(h > 0.0) || !(w > 0.0) || !(i_max > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "face size and i_max must be positive");
  }
  const double raw = 10.0 * (std::log2(std::max(h, w) * 2048.0 / i_max) - 5.0);
  const double b = std::ceil(raw);
  return static_cast<int>(std::clamp(b, 1.0, static_cast<double>(num_scales)));
}

double scale_bin_center(int bin, double i_max) {
  return std::exp2(5.0 + (bin - 0.5) / 10.0) * i_max / 2048.0;
}

ScaleMap paint_target(std::span<const GroundTruthFace> faces, int map_height, int map_width,
                      const ScaleCodecParams& params) {
  ScaleMap map{Tensor(params.num_scales, map_height, map_width), params.stride, params.i_max};
  const double two_sigma_sq = 2.0 * params.sigma * params.sigma;
  for (const GroundTruthFace& face : faces) {
    const int b = encode_scale_index(face.h, face.w, params.i_max, params.num_scales);
    const int hx = static_cast<int>(std::floor(face.cx / params.stride));
    const int hy = static_cast<int>(std::floor(face.cy / params.stride));
    const int r = b / 10;
    auto channel = map.values.channel(b - 1);
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const int x = hx + dx;
        const int y = hy + dy;
        if (x < 0 || y < 0 || x >= map_width || y >= map_height) continue;
        const double d_sq = dx * dx + dy * dy;
        if (d_sq > static_cast<double>(r) * r) continue;
        // r == 0 leaves only the host cell, which is exactly 1.
        const double v = r == 0 ? 1.0 : std::exp(-(d_sq / (r * r)) / two_sigma_sq);
        float& cell = channel[static_cast<std::size_t>(y) * map_width + x];
        cell = std::max(cell, static_cast<float>(v));
      }
    }
  }
  return map;
}

std::vector<ScaleProposal> decode_proposals(const ScaleMap& map, double threshold,
                                            std::size_t max_proposals) {
  if (!(threshold > 0.0) || threshold > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "decode threshold must lie in (0, 1]");
  }
  struct Candidate {
    float score;
    std::size_t index;
  };
  const Tensor& v = map.values;
  const auto data = v.data();
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] >= threshold) candidates.push_back({data[i], i});
  }
  auto better = [](const Candidate& a, const Candidate& b) {
    return a.score != b.score ? a.score > b.score : a.index < b.index;
  };
  std::size_t keep = candidates.size();
  if (max_proposals > 0 && max_proposals < keep) keep = max_proposals;
  std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(), better);
  candidates.resize(keep);

  const double max_x = v.width() - 1;
  const double max_y = v.height() - 1;
  std::vector<ScaleProposal> out;
  out.reserve(keep);
  for (const Candidate& c : candidates) {
    ScaleProposal p;
    const std::size_t plane = v.shape().plane();
    p.bin = static_cast<int>(c.index / plane) + 1;
    p.cell_y = static_cast<int>((c.index % plane) / v.width());
    p.cell_x = static_cast<int>(c.index % v.width());
    p.score = c.score;
    p.scale = scale_bin_center(p.bin, map.i_max);
    const double half = p.scale / map.stride / 2.0;
    const double cx = p.cell_x + 0.5;
    const double cy = p.cell_y + 0.5;
    p.x1 = std::clamp(cx - half, 0.0, max_x);
    p.y1 = std::clamp(cy - half, 0.0, max_y);
    p.x2 = std::clamp(cx + half, 0.0, max_x);
    p.y2 = std::clamp(cy + half, 0.0, max_y);
    // Only possible on a one-pixel-wide map.
    if (!(p.x2 > p.x1) || !(p.y2 > p.y1)) continue;
    out.push_back(p);
  }
  return out;
}

}  // namespace kpdet
