// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// Soft-argmax restricted to a scale proposal.
//
// For channel c and proposal [x1, y1, x2, y2] the logits inside the proposal
// go through a softmax (zero outside), and the keypoint is the expectation of
// the proposal-normalized coordinates u_x(i) = (i - x1) / w, u_y(j) = (j - y1) / h.
// The result lies in [0, 1]^2. Heatmaps are K x H x W, channel-major, with
// i indexing columns (x) and j indexing rows (y).
//
// The pixel set of a proposal is [ceil(x1), floor(x2)] x [ceil(y1), floor(y2)]
// after clipping the proposal to [0, W-1] x [0, H-1].

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kpdet/error.hpp"
#include "kpdet/scale_codec.hpp"

namespace kpdet {

template <std::floating_point T>
struct Coord {
  T x = 0;
  T y = 0;
};

using KeypointSet = std::vector<Coord<double>>;

template <std::floating_point T>
struct HeatmapView {
  std::span<const T> data;
  int channels = 0;
  int height = 0;
  int width = 0;

  T at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
};

inline HeatmapView<float> view_of(const Tensor& t) {
  return {t.data(), t.channels(), t.height(), t.width()};
}

struct ProposalWindow {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // clipped proposal
  int ix0 = 0, ix1 = 0, iy0 = 0, iy1 = 0;  // inclusive pixel bounds

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  int cols() const { return ix1 - ix0 + 1; }
  int rows() const { return iy1 - iy0 + 1; }
  std::size_t area() const { return static_cast<std::size_t>(cols()) * rows(); }
};

// Throws Error(kDegenerate) for a zero-width or zero-height proposal and for
// one whose pixel set is empty.
ProposalWindow make_window(const ScaleProposal& s, int height, int width);

namespace detail {

template <std::floating_point T>
void check_channel(const HeatmapView<T>& h, int c) {
  if (c < 0 || c >= h.channels) {
    throw Error(ErrorCode::kInvalidArgument, "channel " + std::to_string(c) + " out of range");
  }
  if (h.data.size() != static_cast<std::size_t>(h.channels) * h.plane()) {
    throw Error(ErrorCode::kShapeMismatch, "heatmap data does not match its dims");
  }
}

// 𝒫(x, y): x when 0 <= x <= y, else 0.
inline double clamp_offset(double x, double y) { return (x >= 0.0 && x <= y) ? x : 0.0; }

// Softmax over the window, row-major within the window. Also returns the
// partition function relative to the window maximum.
template <std::floating_point T>
std::vector<T> window_softmax(const HeatmapView<T>& h, const ProposalWindow& win, int c,
                              T* partition = nullptr) {
  check_channel(h, c);
  T max_logit = h.at(c, win.iy0, win.ix0);
  for (int j = win.iy0; j <= win.iy1; ++j) {
    for (int i = win.ix0; i <= win.ix1; ++i) max_logit = std::max(max_logit, h.at(c, j, i));
  }
  std::vector<T> p(win.area());
  T z = 0;
  std::size_t k = 0;
  for (int j = win.iy0; j <= win.iy1; ++j) {
    for (int i = win.ix0; i <= win.ix1; ++i, ++k) {
      p[k] = std::exp(h.at(c, j, i) - max_logit);
      z += p[k];
    }
  }
  for (T& v : p) v /= z;
  if (partition) *partition = z;
  return p;
}

template <std::floating_point T>
std::vector<T> x_offsets(const ProposalWindow& win) {
  std::vector<T> u(win.cols());
  for (int i = win.ix0; i <= win.ix1; ++i) {
    u[i - win.ix0] = static_cast<T>(clamp_offset(i - win.x1, win.width()) / win.width());
  }
  return u;
}

template <std::floating_point T>
std::vector<T> y_offsets(const ProposalWindow& win) {
  std::vector<T> u(win.rows());
  for (int j = win.iy0; j <= win.iy1; ++j) {
    u[j - win.iy0] = static_cast<T>(clamp_offset(j - win.y1, win.height()) / win.height());
  }
  return u;
}

template <std::floating_point T>
Coord<T> expectation(const std::vector<T>& p, const ProposalWindow& win) {
  const auto ux = x_offsets<T>(win);
  const auto uy = y_offsets<T>(win);
  Coord<T> out;
  std::size_t k = 0;
  for (int r = 0; r < win.rows(); ++r) {
    for (int col = 0; col < win.cols(); ++col, ++k) {
      out.x += ux[col] * p[k];
      out.y += uy[r] * p[k];
    }
  }
  return out;
}

}  // namespace detail

// Full H x W probability map for channel c; exactly zero outside the proposal.
template <std::floating_point T>
std::vector<T> masked_softmax(const HeatmapView<T>& h, const ScaleProposal& s, int c) {
  const ProposalWindow win = make_window(s, h.height, h.width);
  const auto p = detail::window_softmax(h, win, c);
  std::vector<T> out(h.plane(), T(0));
  std::size_t k = 0;
  for (int j = win.iy0; j <= win.iy1; ++j) {
    for (int i = win.ix0; i <= win.ix1; ++i, ++k) {
      out[static_cast<std::size_t>(j) * h.width + i] = p[k];
    }
  }
  return out;
}

template <std::floating_point T>
Coord<T> soft_argmax(const HeatmapView<T>& h, const ScaleProposal& s, int c) {
  const ProposalWindow win = make_window(s, h.height, h.width);
  return detail::expectation(detail::window_softmax(h, win, c), win);
}

// Gradient of gx * psi_x + gy * psi_y with respect to every logit of the
// heatmap (K x H x W). Only channel c inside the proposal is non-zero.
template <std::floating_point T>
std::vector<T> soft_argmax_grad(const HeatmapView<T>& h, const ScaleProposal& s, int c, T gx,
                                T gy) {
  const ProposalWindow win = make_window(s, h.height, h.width);
  const auto p = detail::window_softmax(h, win, c);
  const Coord<T> psi = detail::expectation(p, win);
  const auto ux = detail::x_offsets<T>(win);
  const auto uy = detail::y_offsets<T>(win);
  std::vector<T> grad(static_cast<std::size_t>(h.channels) * h.plane(), T(0));
  T* plane = grad.data() + static_cast<std::size_t>(c) * h.plane();
  std::size_t k = 0;
  for (int j = win.iy0; j <= win.iy1; ++j) {
    for (int i = win.ix0; i <= win.ix1; ++i, ++k) {
      plane[static_cast<std::size_t>(j) * h.width + i] =
          p[k] * (gx * (ux[i - win.ix0] - psi.x) + gy * (uy[j - win.iy0] - psi.y));
    }
  }
  return grad;
}

// (1 / 2K) * sum_c |pred_c - gt_c|^2
template <std::floating_point T>
T keypoint_loss(std::span<const Coord<T>> pred, std::span<const Coord<T>> gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "keypoint_loss: keypoint counts differ");
  }
  T sum = 0;
  for (std::size_t c = 0; c < pred.size(); ++c) {
    const T dx = pred[c].x - gt[c].x;
    const T dy = pred[c].y - gt[c].y;
    sum += dx * dx + dy * dy;
  }
  return sum / (T(2) * static_cast<T>(pred.size()));
}

template <std::floating_point T>
std::vector<Coord<T>> keypoint_loss_grad(std::span<const Coord<T>> pred,
                                         std::span<const Coord<T>> gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "keypoint_loss_grad: keypoint counts differ");
  }
  const T k = static_cast<T>(pred.size());
  std::vector<Coord<T>> grad(pred.size());
  for (std::size_t c = 0; c < pred.size(); ++c) {
    grad[c] = {(pred[c].x - gt[c].x) / k, (pred[c].y - gt[c].y) / k};
  }
  return grad;
}

// Channels scored by detection_score: left eye, right eye, nose.
inline constexpr int kScoredKeypoints = 3;

// p_s plus the peak softmax probability of the first three channels.
template <std::floating_point T>
T detection_score(T p_s, const HeatmapView<T>& h, const ScaleProposal& s) {
  if (h.channels < kScoredKeypoints) {
    throw Error(ErrorCode::kInvalidArgument, "detection_score needs at least 3 keypoint channels");
  }
  const ProposalWindow win = make_window(s, h.height, h.width);
  T score = p_s;
  for (int c = 0; c < kScoredKeypoints; ++c) {
    T z = 0;
    detail::window_softmax(h, win, c, &z);
    // The peak logit contributes exp(0) = 1 to z.
    score += T(1) / z;
  }
  return score;
}

enum class FitMethod {
  // Minimum-norm Gauss-Newton step per channel; lr scales the step.
  kGaussNewton,
  // Plain gradient descent: logits -= lr * dL/dlogits.
  kGradientDescent,
};

struct FitResult {
  double final_loss = 0.0;
  KeypointSet keypoints;
  std::vector<double> losses;  // loss before each step, then the final loss
};

// Optimizes zero-initialized logits on a map just large enough to hold the
// proposal so that the soft-argmax keypoints match `gt` under keypoint_loss.
// Throws Error(kDiverged) if the loss rises for 50 consecutive steps.
FitResult fit_heatmap_to_keypoints(const KeypointSet& gt, const ScaleProposal& s, int steps,
                                   double lr, FitMethod method = FitMethod::kGaussNewton);

}  // namespace kpdet
