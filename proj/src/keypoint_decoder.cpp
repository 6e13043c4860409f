// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/keypoint_decoder.hpp"

#include <cmath>

namespace kpdet {

ProposalWindow make_window(const ScaleProposal& s, int height, int width) {
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "heatmap must be at least 1x1");
  }
  if (!(s.x2 > s.x1) || !(s.y2 > s.y1)) {
    throw Error(ErrorCode::kDegenerate, "proposal has zero width or height");
  }
  ProposalWindow w;
  w.x1 = std::clamp(s.x1, 0.0, static_cast<double>(width - 1));
  w.x2 = std::clamp(s.x2, 0.0, static_cast<double>(width - 1));
  w.y1 = std::clamp(s.y1, 0.0, static_cast<double>(height - 1));
  w.y2 = std::clamp(s.y2, 0.0, static_cast<double>(height - 1));
  if (!(w.x2 > w.x1) || !(w.y2 > w.y1)) {
    throw Error(ErrorCode::kDegenerate, "proposal does not intersect the heatmap");
  }
  w.ix0 = static_cast<int>(std::ceil(w.x1));
  w.ix1 = static_cast<int>(std::floor(w.x2));
  w.iy0 = static_cast<int>(std::ceil(w.y1));
  w.iy1 = static_cast<int>(std::floor(w.y2));
  if (w.ix0 > w.ix1 || w.iy0 > w.iy1) {
    throw Error(ErrorCode::kDegenerate, "proposal contains no whole pixel");
  }
  return w;
}

namespace {

constexpr int kDivergencePatience = 50;

}  // namespace

FitResult fit_heatmap_to_keypoints(const KeypointSet& gt, const ScaleProposal& s, int steps,
                                   double lr, FitMethod method) {
  if (gt.empty()) throw Error(ErrorCode::kInvalidArgument, "no target keypoints");
  for (const auto& g : gt) {
    if (!(g.x > 0.0 && g.x < 1.0 && g.y > 0.0 && g.y < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "target keypoints must lie strictly inside (0,1)^2");
    }
  }
  if (steps < 0 || !(lr > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "steps must be >= 0 and lr > 0");
  }
  if (s.x1 < 0.0 || s.y1 < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "proposal must start inside the heatmap");
  }

  const int k = static_cast<int>(gt.size());
  const int height = static_cast<int>(std::floor(s.y2)) + 1;
  const int width = static_cast<int>(std::floor(s.x2)) + 1;
  std::vector<double> logits(static_cast<std::size_t>(k) * height * width, 0.0);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  auto view = [&] { return HeatmapView<double>{logits, k, height, width}; };

  auto predict = [&] {
    KeypointSet pred(k);
    for (int c = 0; c < k; ++c) pred[c] = soft_argmax(view(), s, c);
    return pred;
  };

  FitResult result;
  KeypointSet pred = predict();
  double loss = keypoint_loss<double>(pred, gt);
  int rising = 0;
  for (int step = 0; step < steps; ++step) {
    result.losses.push_back(loss);
    const auto dloss = keypoint_loss_grad<double>(pred, gt);
    for (int c = 0; c < k; ++c) {
      double* ch = logits.data() + static_cast<std::size_t>(c) * plane;
      if (method == FitMethod::kGradientDescent) {
        const auto g = soft_argmax_grad(view(), s, c, dloss[c].x, dloss[c].y);
        for (std::size_t i = 0; i < plane; ++i) ch[i] -= lr * g[c * plane + i];
        continue;
      }
      // Jacobian rows of (psi_x, psi_y) with respect to this channel.
      const auto jx = soft_argmax_grad(view(), s, c, 1.0, 0.0);
      const auto jy = soft_argmax_grad(view(), s, c, 0.0, 1.0);
      double xx = 0, xy = 0, yy = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double a = jx[c * plane + i];
        const double b = jy[c * plane + i];
        xx += a * a;
        xy += a * b;
        yy += b * b;
      }
      const double rx = pred[c].x - gt[c].x;
      const double ry = pred[c].y - gt[c].y;
      // Tiny ridge keeps the 2x2 solve defined once the map is nearly a delta.
      const double ridge = 1e-12 * (xx + yy) + 1e-300;
      xx += ridge;
      yy += ridge;
      const double det = xx * yy - xy * xy;
      const double dx = (yy * rx - xy * ry) / det;
      const double dy = (xx * ry - xy * rx) / det;
      for (std::size_t i = 0; i < plane; ++i) {
        ch[i] -= lr * (dx * jx[c * plane + i] + dy * jy[c * plane + i]);
      }
    }
    pred = predict();
    const double next = keypoint_loss<double>(pred, gt);
    rising = next > loss ? rising + 1 : 0;
    loss = next;
    if (!std::isfinite(loss) || rising >= kDivergencePatience) {
      throw Error(ErrorCode::kDiverged, "heatmap fit diverged at step " + std::to_string(step));
    }
  }
  result.losses.push_back(loss);
  result.final_loss = loss;
  result.keypoints = std::move(pred);
  return result;
}

}  // namespace kpdet
