// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// Detection and alignment metrics: IoU matching, recall at a false-positive
// budget (discrete ROC), top-k proposal recall and normalized mean error.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kpdet/geometry.hpp"

namespace kpdet {

inline constexpr double kDefaultMatchIou = 0.5;

struct MatchResult {
  std::vector<bool> gt_matched;
  std::vector<int> det_match;  // matched ground-truth index, -1 for a false positive

  bool is_tp(std::size_t det) const { return det_match[det] >= 0; }
  std::size_t true_positives() const;
  std::size_t false_positives() const;
};

// Detections must be sorted by score, descending. Each detection in turn
// claims the unmatched ground truth with the highest IoU >= iou_threshold
// (lowest index on IoU ties).
MatchResult match_detections(std::span<const Box> detections, std::span<const Box> ground_truth,
                             double iou_threshold = kDefaultMatchIou);

struct ScoredMatch {
  double score = 0.0;
  bool is_tp = false;
};

// Matches pooled over a corpus, for a single global score sweep.
struct CorpusMatches {
  std::vector<ScoredMatch> detections;
  std::size_t total_ground_truth = 0;

  void add_image(std::span<const Box> detections, std::span<const Box> ground_truth,
                 double iou_threshold = kDefaultMatchIou);
};

// Recall at the loosest score threshold whose cumulative false positives stay
// within the budget. Detections with equal scores enter together.
double recall_at_fp(const CorpusMatches& corpus, std::size_t fp_budget);

// Recall when each image keeps only its k best proposals.
double topk_recall(std::span<const std::vector<Box>> proposals,
                   std::span<const std::vector<Box>> ground_truth, std::size_t k,
                   double iou_threshold = kDefaultMatchIou);

enum class NmeNormalization { kFaceSize, kInterOcular };

struct FaceAlignment {
  std::vector<Point> predicted;
  std::vector<Point> ground_truth;
  Box ground_truth_box;
};

struct EyeIndices {
  int left = 0;
  int right = 1;
};

// Mean keypoint error over a face divided by sqrt(w*h) of its box or by the
// distance between the two eye keypoints, averaged over faces.
double nme(std::span<const FaceAlignment> faces, NmeNormalization normalization,
           EyeIndices eyes = {});

}  // namespace kpdet
