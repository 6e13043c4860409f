// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// Batch drivers behind the command-line tool: detection over image lists,
// latency benchmarks and metric evaluation from JSON-lines files.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kpdet/eval.hpp"
#include "kpdet/pipeline.hpp"

namespace kpdet {

// Environment variable that overrides the worker thread count.
inline constexpr const char* kThreadsEnv = "KPDET_THREADS";

// `requested` unless KPDET_THREADS holds a positive integer. Throws
// kInvalidArgument for a malformed value.
int resolve_threads(int requested);

// Merges keys from a JSON config file into `base`. Recognized keys:
// backbone, model, input_long_side, scale_threshold, nms_iou, template
// (10 numbers), threads, max_proposals, num_keypoints.
DetectorConfig load_detector_config(const std::string& path, DetectorConfig base = {});
DetectorConfig parse_detector_config(const std::string& json_text, DetectorConfig base = {});

struct ImageDetections {
  std::string image;
  std::vector<Detection> detections;
  std::string error;  // empty on success
};

// Runs the detector on every path with image-level parallelism. Results keep
// the input order; a failing image records its error and does not stop the rest.
std::vector<ImageDetections> run_detect(const Detector& detector,
                                        const std::vector<std::string>& paths, int threads);

// One JSON line per detection, images in input order.
std::string to_jsonl(const std::vector<ImageDetections>& results);

struct BenchOptions {
  int batch = 32;
  int iters = 10;
  int warmup = 1;
  int height = 256;
  int width = 256;
  std::uint64_t seed = 1;
  std::string backbone;  // label copied into the report
};

struct BenchReport {
  std::string backbone;
  std::uint64_t params = 0;
  int height = 0;
  int width = 0;
  int batch = 0;
  std::vector<double> online_ms;   // per image, mean of batch-1 passes over the batch
  std::vector<double> offline_ms;  // per image, whole batch / batch
  double online_median_ms = 0.0;
  double offline_median_ms = 0.0;
};

// Times forward passes only (no decode), single-threaded.
BenchReport run_bench(const LayerGraph& graph, const BenchOptions& options);
std::string to_json(const BenchReport& report);

struct EvalOptions {
  std::vector<std::size_t> fp_budgets{0, 10, 50};
  std::vector<std::size_t> top_k{1, 10, 100};
  double iou_threshold = kDefaultMatchIou;
  EyeIndices eyes;
};

// predictions: detection JSON lines. ground_truth: one line per image,
// {"image", "boxes": [[x1,y1,x2,y2],...], "keypoints": optional}. Returns the
// metrics report as a JSON object string. Throws kMalformed on bad input.
std::string run_eval(const std::string& predictions_jsonl, const std::string& ground_truth_jsonl,
                     const EvalOptions& options = {});

}  // namespace kpdet
