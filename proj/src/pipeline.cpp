// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "kpdet/error.hpp"
#include "kpdet/keypoint_decoder.hpp"
#include "kpdet/scale_codec.hpp"

namespace kpdet {

Point keypoint_to_input(double x1, double y1, double w, double h, double psi_x, double psi_y,
                        int stride) {
  // x1 + psi * w is a heatmap column index; +0.5 moves it to the pixel center.
  return {(x1 + psi_x * w + 0.5) * stride, (y1 + psi_y * h + 0.5) * stride};
}

std::vector<Detection> decode_heads(const Tensor& scale_probs, const Tensor& landmark_logits,
                                    const DecodeOptions& options) {
  if (scale_probs.height() != landmark_logits.height() ||
      scale_probs.width() != landmark_logits.width()) {
    throw Error(ErrorCode::kShapeMismatch, "scale and landmark heads differ in spatial size");
  }
  const int k = landmark_logits.channels();
  const bool use_template = k == static_cast<int>(options.face_template.points.size());
  const ScaleMap map{scale_probs, options.stride, options.i_max};
  const auto proposals = decode_proposals(map, options.threshold, options.max_proposals);
  const HeatmapView<float> view = view_of(landmark_logits);

  std::vector<Detection> candidates;
  std::vector<Box> boxes;
  for (const ScaleProposal& p : proposals) {
    try {
      const ProposalWindow win = make_window(p, view.height, view.width);
      Detection d;
      for (int c = 0; c < k; ++c) {
        const Coord<float> psi = soft_argmax(view, p, c);
        d.keypoints.push_back(keypoint_to_input(win.x1, win.y1, win.width(), win.height(), psi.x,
                                                psi.y, options.stride));
      }
      d.score = k >= kScoredKeypoints ? detection_score(static_cast<float>(p.score), view, p)
                                      : p.score;
      if (use_template) {
        d.box = keypoints_to_box(d.keypoints, options.face_template);
      } else {
        const double cx = (p.cell_x + 0.5) * options.stride;
        const double cy = (p.cell_y + 0.5) * options.stride;
        d.box = {cx - p.scale / 2, cy - p.scale / 2, cx + p.scale / 2, cy + p.scale / 2, 0.0};
      }
      d.box.score = d.score;
      boxes.push_back(d.box);
      candidates.push_back(std::move(d));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
    }
  }

  std::vector<Detection> out;
  for (std::size_t i : nms_indices(boxes, options.nms_iou)) out.push_back(candidates[i]);
  return out;
}

void DetectorConfig::validate() const {
  if (input_long_side < 8 || input_long_side % 8 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "input_long_side must be a positive multiple of 8");
  }
  if (!(scale_threshold > 0.0) || scale_threshold > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "scale threshold must lie in (0, 1]");
  }
  if (!(nms_iou > 0.0) || nms_iou > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "NMS IoU must lie in (0, 1]");
  }
  if (threads < 1) throw Error(ErrorCode::kInvalidArgument, "thread count must be >= 1");
  face_template.validate();
  model_config().validate();
}

ModelConfig DetectorConfig::model_config() const {
  ModelConfig m;
  m.num_keypoints = num_keypoints;
  m.input_long_side = input_long_side;
  return m;
}

Detector::Detector(LayerGraph graph, DetectorConfig config)
    : graph_(std::move(graph)), config_(std::move(config)) {
  config_.validate();
}

Detector Detector::from_config(const DetectorConfig& config) {
  config.validate();
  if (config.model_path.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no model file given");
  }
  const LayerGraph graph = build_backbone(config.backbone, config.model_config());
  try {
    return Detector(load_weights(graph, read_file_bytes(config.model_path)), config);
  } catch (const Error& e) {
    throw Error(e.code(), config.model_path + ": " + e.what());
  }
}

std::vector<Detection> Detector::detect(const Tensor& image) const {
  const PreparedImage prepared = prepare_image(image, config_.input_long_side);
  const HeadOutputs heads = forward(graph_, prepared.tensor);
  DecodeOptions opts;
  opts.threshold = config_.scale_threshold;
  opts.nms_iou = config_.nms_iou;
  opts.stride = graph_.total_stride();
  opts.i_max = config_.input_long_side;
  opts.max_proposals = config_.max_proposals;
  opts.face_template = config_.face_template;
  std::vector<Detection> dets = decode_heads(sigmoid(heads.scale_logits), heads.landmark_logits, opts);
  for (Detection& d : dets) {
    d.box = prepared.transform.to_original(d.box);
    for (Point& p : d.keypoints) p = prepared.transform.to_original(p);
  }
  return dets;
}

std::string format_detection_line(const std::string& image, const Detection& d) {
  char buf[64];
  auto num = [&](double v) {
    // Avoid printing "-0.0000".
    if (std::abs(v) < 5e-5) v = 0.0;
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  std::string line = "{\"image\": " + nlohmann::json(image).dump() + ", \"box\": [" +
                     num(d.box.x1) + ", " + num(d.box.y1) + ", " + num(d.box.x2) + ", " +
                     num(d.box.y2) + "], \"score\": " + num(d.score) + ", \"keypoints\": [";
  for (std::size_t i = 0; i < d.keypoints.size(); ++i) {
    if (i) line += ", ";
    line += "[" + num(d.keypoints[i].x) + ", " + num(d.keypoints[i].y) + "]";
  }
  return line + "]}";
}

}  // namespace kpdet
