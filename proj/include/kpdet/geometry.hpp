// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <span>
#include <vector>

namespace kpdet {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
  double score = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
};

// Canonical five-point face layout in the unit square, in the keypoint
// channel order: left eye, right eye, nose, left mouth corner, right mouth
// corner. The unit square itself is the face box.
struct FaceTemplate {
  std::array<Point, 5> points{{{0.30, 0.40}, {0.70, 0.40}, {0.50, 0.62}, {0.34, 0.80}, {0.66, 0.80}}};

  // Builds a template from 10 numbers x0 y0 x1 y1 ... Throws on bad input.
  static FaceTemplate from_values(std::span<const double> values);
  void validate() const;
};

// x' = a*x - b*y + tx, y' = b*x + a*y + ty (rotation + uniform scale + shift).
struct SimilarityTransform {
  double a = 1.0;
  double b = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  Point apply(Point p) const noexcept { return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty}; }
  double scale() const noexcept;
};

// Least-squares similarity taking `from` onto `to`. Throws Error(kDegenerate)
// when either point set collapses to a single point.
SimilarityTransform fit_similarity(std::span<const Point> from, std::span<const Point> to);

// Maps the template onto the keypoints and returns the axis-aligned bounds of
// the transformed unit square.
Box keypoints_to_box(std::span<const Point> keypoints, const FaceTemplate& face_template = {});

double iou(const Box& a, const Box& b);

// Greedy hard NMS. Candidates are visited by score (descending), ties by x1
// then y1 ascending; a candidate is dropped when its IoU with an already kept
// box exceeds the threshold.
std::vector<Box> nms(std::span<const Box> boxes, double iou_threshold);

// Same as nms but returns indices into `boxes`, in keep order.
std::vector<std::size_t> nms_indices(std::span<const Box> boxes, double iou_threshold);

}  // namespace kpdet
