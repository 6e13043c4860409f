// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// Bottom-up detection: scale proposals from the scale head, keypoints from
// the landmark head via proposal-restricted soft-argmax, boxes inferred from
// the keypoints, then NMS.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kpdet/geometry.hpp"
#include "kpdet/image.hpp"
#include "kpdet/model.hpp"
#include "kpdet/tensor.hpp"

namespace kpdet {

struct Detection {
  Box box;  // box.score == score
  std::vector<Point> keypoints;
  double score = 0.0;
};

struct DecodeOptions {
  double threshold = 0.5;
  double nms_iou = 0.6;
  int stride = 2;
  double i_max = 256.0;  // long side of the network input
  std::size_t max_proposals = 1000;
  FaceTemplate face_template;
};

// Maps a soft-argmax result in proposal-normalized units to heatmap pixel
// centers and then to network-input pixels.
Point keypoint_to_input(double x1, double y1, double w, double h, double psi_x, double psi_y,
                        int stride);

// scale_probs: S x H' x W' probabilities (after sigmoid). landmark_logits:
// K x H' x W' raw logits. Returned coordinates are network-input pixels.
// With five keypoints the box comes from keypoints_to_box; with any other
// count the proposal square is used.
std::vector<Detection> decode_heads(const Tensor& scale_probs, const Tensor& landmark_logits,
                                    const DecodeOptions& options);

struct DetectorConfig {
  Backbone backbone = Backbone::kDrnet;
  std::string model_path;
  int input_long_side = 256;
  double scale_threshold = 0.5;
  double nms_iou = 0.6;
  FaceTemplate face_template;
  int threads = 1;
  std::size_t max_proposals = 1000;
  int num_keypoints = 5;

  void validate() const;
  ModelConfig model_config() const;
};

class Detector {
 public:
  // The graph must match config's backbone and keypoint count.
  Detector(LayerGraph graph, DetectorConfig config);

  // Builds the graph and loads config.model_path.
  static Detector from_config(const DetectorConfig& config);

  // Detections in original-image pixels, sorted by score.
  std::vector<Detection> detect(const Tensor& image) const;

  const LayerGraph& graph() const noexcept { return graph_; }
  const DetectorConfig& config() const noexcept { return config_; }

 private:
  LayerGraph graph_;
  DetectorConfig config_;
};

// {"image": ..., "box": [x1,y1,x2,y2], "score": s, "keypoints": [[x,y],...]}
// with every number printed to 4 decimal places.
std::string format_detection_line(const std::string& image, const Detection& d);

}  // namespace kpdet
