// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "kpdet/geometry.hpp"
#include "kpdet/model.hpp"
#include "kpdet/tensor.hpp"

namespace kpdet {

// A face planted directly into head outputs, bypassing the backbone.
struct PlantedFace {
  double cx = 0.0;  // input px
  double cy = 0.0;
  double size = 0.0;
};

struct SyntheticScene {
  Tensor scale_probs;      // S x H' x W', from paint_target
  Tensor landmark_logits;  // K x H' x W', one saturated logit per face and channel
  std::vector<Box> boxes;  // planted boxes, input px
  std::vector<std::vector<Point>> keypoints;  // template keypoints, input px
};

// Each face gets a square box of the given size; its keypoints are the
// template points scaled into that box. Faces should not overlap.
SyntheticScene make_synthetic_scene(const std::vector<PlantedFace>& faces, int map_height,
                                    int map_width, int stride, double i_max,
                                    const FaceTemplate& face_template = {});

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelftestOptions {
  std::string weights_path;  // optional: also load this file
  Backbone backbone = Backbone::kDrnet;
  std::uint64_t seed = 7;
};

std::vector<CheckResult> run_selftest(const SelftestOptions& options = {});

// "PASS  name  detail" per check followed by a summary line.
std::string format_selftest(const std::vector<CheckResult>& results);

}  // namespace kpdet
