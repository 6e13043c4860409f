// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "kpdet/error.hpp"
#include "kpdet/image.hpp"

namespace kpdet {
namespace {

using nlohmann::json;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<json> parse_lines(const std::string& text, const char* what) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformed,
                  std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!out.back().is_object() || !out.back().contains("image") ||
        !out.back()["image"].is_string()) {
      throw Error(ErrorCode::kMalformed, std::string(what) + " line " + std::to_string(lineno) +
                                             ": expected an object with a string \"image\"");
    }
  }
  return out;
}

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::kMalformed, "box must be [x1, y1, x2, y2]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), 0.0};
}

std::vector<Point> points_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kMalformed, "keypoints must be a list of [x, y]");
  std::vector<Point> out;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2) {
      throw Error(ErrorCode::kMalformed, "keypoint must be [x, y]");
    }
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

struct GroundTruthImage {
  std::vector<Box> boxes;
  std::vector<std::vector<Point>> keypoints;  // empty when not annotated
};

}  // namespace

int resolve_threads(int requested) {
  const char* env = std::getenv(kThreadsEnv);
  if (env == nullptr || *env == '\0') return requested;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 1024) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(kThreadsEnv) + " must be an integer in [1, 1024], got \"" + env + "\"");
  }
  return static_cast<int>(v);
}

DetectorConfig parse_detector_config(const std::string& json_text, DetectorConfig base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kMalformed, "config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "backbone") {
        base.backbone = parse_backbone(value.get<std::string>());
      } else if (key == "model") {
        base.model_path = value.get<std::string>();
      } else if (key == "input_long_side") {
        base.input_long_side = value.get<int>();
      } else if (key == "scale_threshold") {
        base.scale_threshold = value.get<double>();
      } else if (key == "nms_iou") {
        base.nms_iou = value.get<double>();
      } else if (key == "template") {
        const auto v = value.get<std::vector<double>>();
        base.face_template = FaceTemplate::from_values(v);
      } else if (key == "threads") {
        base.threads = value.get<int>();
      } else if (key == "max_proposals") {
        base.max_proposals = value.get<std::size_t>();
      } else if (key == "num_keypoints") {
        base.num_keypoints = value.get<int>();
      } else {
        throw Error(ErrorCode::kInvalidArgument, "config: unknown key \"" + key + "\"");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("config: ") + e.what());
  }
  base.validate();
  return base;
}

DetectorConfig load_detector_config(const std::string& path, DetectorConfig base) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_detector_config(std::string(bytes.begin(), bytes.end()), std::move(base));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::vector<ImageDetections> run_detect(const Detector& detector,
                                        const std::vector<std::string>& paths, int threads) {
  std::vector<ImageDetections> results(paths.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < paths.size(); i = next++) {
      results[i].image = paths[i];
      try {
        results[i].detections = detector.detect(load_pnm(paths[i]));
      } catch (const std::exception& e) {
        results[i].error = e.what();
      }
    }
  };
  const int n = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(paths.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

std::string to_jsonl(const std::vector<ImageDetections>& results) {
  std::string out;
  for (const auto& r : results) {
    for (const auto& d : r.detections) out += format_detection_line(r.image, d) + "\n";
  }
  return out;
}

BenchReport run_bench(const LayerGraph& graph, const BenchOptions& options) {
  if (options.batch < 1 || options.iters < 1 || options.warmup < 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch and iters must be >= 1");
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Tensor> images;
  for (int i = 0; i < options.batch; ++i) {
    Tensor t(3, options.height, options.width);
    for (float& v : t.data()) v = u(rng);
    images.push_back(std::move(t));
  }
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  BenchReport r;
  r.backbone = options.backbone;
  r.params = count_params(graph);
  r.height = options.height;
  r.width = options.width;
  r.batch = options.batch;
  for (int i = 0; i < options.warmup; ++i) forward(graph, images[0]);
  // Online and offline alternate within each iteration over the same images,
  // so clock drift and background load hit both modes alike.
  for (int i = 0; i < options.iters; ++i) {
    double online_total = 0.0;
    for (const Tensor& img : images) {
      const auto t0 = clock::now();
      forward(graph, img);
      online_total += ms_since(t0);
    }
    r.online_ms.push_back(online_total / options.batch);
    const auto t0 = clock::now();
    forward_batch(graph, images);
    r.offline_ms.push_back(ms_since(t0) / options.batch);
  }
  r.online_median_ms = median(r.online_ms);
  r.offline_median_ms = median(r.offline_ms);
  return r;
}

std::string to_json(const BenchReport& r) {
  json j;
  j["backbone"] = r.backbone;
  j["params"] = r.params;
  j["input"] = {r.height, r.width};
  j["batch"] = r.batch;
  j["threads"] = 1;
  j["online"] = {{"batch", 1}, {"samples_ms", r.online_ms}, {"median_ms", r.online_median_ms}};
  j["offline"] = {{"batch", r.batch},
                  {"samples_ms_per_image", r.offline_ms},
                  {"median_ms_per_image", r.offline_median_ms}};
  j["offline_not_slower"] = r.offline_median_ms <= r.online_median_ms;
  return j.dump(2);
}

std::string run_eval(const std::string& predictions_jsonl, const std::string& ground_truth_jsonl,
                     const EvalOptions& options) {
  std::map<std::string, GroundTruthImage> gt;
  std::vector<std::string> gt_order;
  json warnings = json::array();
  try {
    for (const json& line : parse_lines(ground_truth_jsonl, "ground truth")) {
      const std::string name = line["image"].get<std::string>();
      if (gt.count(name)) throw Error(ErrorCode::kMalformed, "duplicate ground-truth image " + name);
      GroundTruthImage g;
      for (const json& b : line.value("boxes", json::array())) g.boxes.push_back(box_from_json(b));
      if (line.contains("keypoints")) {
        for (const json& k : line["keypoints"]) g.keypoints.push_back(points_from_json(k));
        if (g.keypoints.size() != g.boxes.size()) {
          throw Error(ErrorCode::kMalformed,
                      "ground truth " + name + ": keypoint sets do not match box count");
        }
      }
      gt_order.push_back(name);
      gt.emplace(name, std::move(g));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("ground truth: ") + e.what());
  }

  std::map<std::string, std::vector<Detection>> preds;
  std::vector<std::string> unmatched;
  try {
    for (const json& line : parse_lines(predictions_jsonl, "predictions")) {
      const std::string name = line["image"].get<std::string>();
      if (!gt.count(name)) {
        if (std::find(unmatched.begin(), unmatched.end(), name) == unmatched.end()) {
          unmatched.push_back(name);
        }
        continue;
      }
      Detection d;
      d.box = box_from_json(line.at("box"));
      d.score = line.at("score").get<double>();
      d.box.score = d.score;
      if (line.contains("keypoints")) d.keypoints = points_from_json(line["keypoints"]);
      preds[name].push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("predictions: ") + e.what());
  }

  CorpusMatches corpus;
  std::vector<std::vector<Box>> det_boxes, gt_boxes;
  std::vector<FaceAlignment> aligned;
  bool any_gt_keypoints = false;
  std::size_t skipped_faces = 0;
  for (const std::string& name : gt_order) {
    const GroundTruthImage& g = gt[name];
    std::vector<Detection> dets = preds[name];
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.score > b.score; });
    std::vector<Box> boxes;
    for (const auto& d : dets) boxes.push_back(d.box);
    corpus.add_image(boxes, g.boxes, options.iou_threshold);
    det_boxes.push_back(boxes);
    gt_boxes.push_back(g.boxes);

    if (g.keypoints.empty()) continue;
    any_gt_keypoints = true;
    const MatchResult m = match_detections(boxes, g.boxes, options.iou_threshold);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!m.is_tp(i)) continue;
      const auto& gk = g.keypoints[m.det_match[i]];
      if (dets[i].keypoints.size() != gk.size() || gk.empty()) {
        ++skipped_faces;
        continue;
      }
      aligned.push_back({dets[i].keypoints, gk, g.boxes[m.det_match[i]]});
    }
  }

  json report;
  report["images"] = gt_order.size();
  report["ground_truth_faces"] = corpus.total_ground_truth;
  report["detections"] = corpus.detections.size();
  report["iou_threshold"] = options.iou_threshold;
  if (corpus.total_ground_truth == 0) {
    warnings.push_back("no ground-truth faces; recall omitted");
  } else {
    json r = json::object();
    for (std::size_t b : options.fp_budgets) r[std::to_string(b)] = recall_at_fp(corpus, b);
    report["recall_at_fp"] = r;
    json t = json::object();
    for (std::size_t k : options.top_k) {
      t[std::to_string(k)] = topk_recall(det_boxes, gt_boxes, k, options.iou_threshold);
    }
    report["topk_recall"] = t;
  }
  if (!any_gt_keypoints) {
    warnings.push_back("ground truth has no keypoints; NME omitted");
  } else if (aligned.empty()) {
    warnings.push_back("no matched face with comparable keypoints; NME omitted");
  } else {
    report["nme"] = {{"face_size", nme(aligned, NmeNormalization::kFaceSize, options.eyes)},
                     {"inter_ocular", nme(aligned, NmeNormalization::kInterOcular, options.eyes)},
                     {"faces", aligned.size()}};
  }
  if (skipped_faces) {
    warnings.push_back(std::to_string(skipped_faces) +
                       " matched faces skipped for NME: keypoint count mismatch");
  }
  report["unmatched_images"] = unmatched;
  if (!unmatched.empty()) {
    warnings.push_back(std::to_string(unmatched.size()) +
                       " prediction images have no ground truth and were ignored");
  }
  report["warnings"] = warnings;
  return report.dump(2);
}

}  // namespace kpdet
