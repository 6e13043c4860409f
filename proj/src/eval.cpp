// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kpdet/error.hpp"

namespace kpdet {

std::size_t MatchResult::true_positives() const {
  return static_cast<std::size_t>(
      std::count_if(det_match.begin(), det_match.end(), [](int m) { return m >= 0; }));
}

std::size_t MatchResult::false_positives() const { return det_match.size() - true_positives(); }

MatchResult match_detections(std::span<const Box> detections, std::span<const Box> ground_truth,
                             double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "match IoU threshold must be in (0,1]");
  }
  for (std::size_t i = 1; i < detections.size(); ++i) {
    if (detections[i].score > detections[i - 1].score) {
      throw Error(ErrorCode::kInvalidArgument, "detections must be sorted by descending score");
    }
  }
  MatchResult r;
  r.gt_matched.assign(ground_truth.size(), false);
  r.det_match.assign(detections.size(), -1);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (r.gt_matched[g]) continue;
      const double v = iou(detections[d], ground_truth[g]);
      if (v >= iou_threshold && (best < 0 || v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      r.gt_matched[best] = true;
      r.det_match[d] = best;
    }
  }
  return r;
}

void CorpusMatches::add_image(std::span<const Box> dets, std::span<const Box> ground_truth,
                              double iou_threshold) {
  std::vector<Box> sorted(dets.begin(), dets.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Box& a, const Box& b) { return a.score > b.score; });
  const MatchResult m = match_detections(sorted, ground_truth, iou_threshold);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    detections.push_back({sorted[i].score, m.is_tp(i)});
  }
  total_ground_truth += ground_truth.size();
}

double recall_at_fp(const CorpusMatches& corpus, std::size_t fp_budget) {
  if (corpus.total_ground_truth == 0) {
    throw Error(ErrorCode::kInvalidArgument, "recall needs at least one ground-truth face");
  }
  std::vector<ScoredMatch> dets = corpus.detections;
  std::stable_sort(dets.begin(), dets.end(),
                   [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
  std::size_t tp = 0, fp = 0, best_tp = 0;
  for (std::size_t i = 0; i < dets.size();) {
    std::size_t j = i;
    while (j < dets.size() && dets[j].score == dets[i].score) {
      dets[j].is_tp ? ++tp : ++fp;
      ++j;
    }
    if (fp > fp_budget) break;
    best_tp = tp;
    i = j;
  }
  return static_cast<double>(best_tp) / static_cast<double>(corpus.total_ground_truth);
}

double topk_recall(std::span<const std::vector<Box>> proposals,
                   std::span<const std::vector<Box>> ground_truth, std::size_t k,
                   double iou_threshold) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (proposals.size() != ground_truth.size()) {
    throw Error(ErrorCode::kInvalidArgument, "proposal and ground-truth image counts differ");
  }
  std::size_t total = 0, matched = 0;
  for (std::size_t img = 0; img < proposals.size(); ++img) {
    std::vector<Box> top(proposals[img]);
    std::stable_sort(top.begin(), top.end(),
                     [](const Box& a, const Box& b) { return a.score > b.score; });
    if (top.size() > k) top.resize(k);
    const MatchResult m = match_detections(top, ground_truth[img], iou_threshold);
    matched += m.true_positives();
    total += ground_truth[img].size();
  }
  if (total == 0) {
    throw Error(ErrorCode::kInvalidArgument, "recall needs at least one ground-truth face");
  }
  return static_cast<double>(matched) / static_cast<double>(total);
}

double nme(std::span<const FaceAlignment> faces, NmeNormalization normalization, EyeIndices eyes) {
  if (faces.empty()) throw Error(ErrorCode::kInvalidArgument, "nme needs at least one face");
  double total = 0.0;
  for (const FaceAlignment& f : faces) {
    const std::size_t k = f.ground_truth.size();
    if (k == 0 || f.predicted.size() != k) {
      throw Error(ErrorCode::kShapeMismatch, "predicted and ground-truth keypoint counts differ");
    }
    double norm = 0.0;
    if (normalization == NmeNormalization::kFaceSize) {
      norm = std::sqrt(std::max(0.0, f.ground_truth_box.width() * f.ground_truth_box.height()));
    } else {
      if (eyes.left < 0 || eyes.right < 0 || static_cast<std::size_t>(eyes.left) >= k ||
          static_cast<std::size_t>(eyes.right) >= k) {
        throw Error(ErrorCode::kInvalidArgument, "eye indices out of range");
      }
      const Point& l = f.ground_truth[eyes.left];
      const Point& r = f.ground_truth[eyes.right];
      norm = std::hypot(l.x - r.x, l.y - r.y);
    }
    if (!(norm > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  normalization == NmeNormalization::kFaceSize ? "face size must be positive"
                                                               : "zero inter-ocular distance");
    }
    double err = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      err += std::hypot(f.predicted[i].x - f.ground_truth[i].x,
                        f.predicted[i].y - f.ground_truth[i].y);
    }
    total += err / static_cast<double>(k) / norm;
  }
  return total / static_cast<double>(faces.size());
}

}  // namespace kpdet
