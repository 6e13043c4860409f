// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kpdet/error.hpp"

namespace kpdet {

FaceTemplate FaceTemplate::from_values(std::span<const double> values) {
  if (values.size() != 10) {
    throw Error(ErrorCode::kInvalidArgument, "face template needs exactly 10 values");
  }
  FaceTemplate t;
  for (std::size_t i = 0; i < 5; ++i) t.points[i] = {values[2 * i], values[2 * i + 1]};
  t.validate();
  return t;
}

void FaceTemplate::validate() const {
  for (const Point& p : points) {
    if (!(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "face template points must lie inside (0,1)^2");
    }
  }
  // Coincident points leave the similarity fit underdetermined.
  bool spread = false;
  for (const Point& p : points) {
    spread = spread || p.x != points[0].x || p.y != points[0].y;
  }
  if (!spread) throw Error(ErrorCode::kInvalidArgument, "face template points all coincide");
}

double SimilarityTransform::scale() const noexcept { return std::hypot(a, b); }

SimilarityTransform fit_similarity(std::span<const Point> from, std::span<const Point> to) {
  if (from.size() != to.size() || from.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "similarity fit needs matching sets of >= 2 points");
  }
  const double n = static_cast<double>(from.size());
  Point mf, mt;
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (!std::isfinite(to[i].x) || !std::isfinite(to[i].y)) {
      throw Error(ErrorCode::kDegenerate, "keypoints must be finite");
    }
    mf.x += from[i].x / n;
    mf.y += from[i].y / n;
    mt.x += to[i].x / n;
    mt.y += to[i].y / n;
  }
  double from_sq = 0, to_sq = 0, dot = 0, cross = 0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double fx = from[i].x - mf.x, fy = from[i].y - mf.y;
    const double qx = to[i].x - mt.x, qy = to[i].y - mt.y;
    from_sq += fx * fx + fy * fy;
    to_sq += qx * qx + qy * qy;
    dot += fx * qx + fy * qy;
    cross += fx * qy - fy * qx;
  }
  const double spread = std::max({std::abs(mt.x), std::abs(mt.y), 1.0});
  if (from_sq <= 1e-18 || to_sq <= 1e-18 * spread * spread) {
    throw Error(ErrorCode::kDegenerate, "keypoints collapse to a single point");
  }
  SimilarityTransform t;
  t.a = dot / from_sq;
  t.b = cross / from_sq;
  if (t.scale() <= 1e-12 * std::sqrt(to_sq / from_sq)) {
    throw Error(ErrorCode::kDegenerate, "keypoints do not determine a similarity transform");
  }
  t.tx = mt.x - (t.a * mf.x - t.b * mf.y);
  t.ty = mt.y - (t.b * mf.x + t.a * mf.y);
  return t;
}

Box keypoints_to_box(std::span<const Point> keypoints, const FaceTemplate& face_template) {
  const SimilarityTransform t = fit_similarity(face_template.points, keypoints);
  constexpr std::array<Point, 4> corners{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  Box box{INFINITY, INFINITY, -INFINITY, -INFINITY, 0.0};
  for (const Point& c : corners) {
    const Point p = t.apply(c);
    box.x1 = std::min(box.x1, p.x);
    box.y1 = std::min(box.y1, p.y);
    box.x2 = std::max(box.x2, p.x);
    box.y2 = std::max(box.y2, p.y);
  }
  return box;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

std::vector<std::size_t> nms_indices(std::span<const Box> boxes, double iou_threshold) {
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "NMS threshold must lie in (0, 1]");
  }
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const Box& a = boxes[i];
    const Box& b = boxes[j];
    if (a.score != b.score) return a.score > b.score;
    if (a.x1 != b.x1) return a.x1 < b.x1;
    return a.y1 < b.y1;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(boxes[k], boxes[idx]) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

std::vector<Box> nms(std::span<const Box> boxes, double iou_threshold) {
  std::vector<Box> out;
  for (std::size_t i : nms_indices(boxes, iou_threshold)) out.push_back(boxes[i]);
  return out;
}

}  // namespace kpdet
