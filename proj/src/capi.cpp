// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/kpdet.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "kpdet/error.hpp"
#include "kpdet/image.hpp"
#include "kpdet/pipeline.hpp"
#include "kpdet/runner.hpp"
#include "kpdet/selftest.hpp"

struct kpdet_model {
  kpdet::Detector detector;
  kpdet::Backbone backbone;
};

struct kpdet_detections {
  std::vector<kpdet::Detection> items;
};

namespace {

thread_local std::string g_last_error;

static_assert(KPDET_ERR_INTERNAL == static_cast<int>(kpdet::ErrorCode::kInternal));

kpdet_status fail(kpdet_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

// Runs fn, translating exceptions into status codes.
template <typename F>
kpdet_status guarded(F&& fn) {
  try {
    g_last_error.clear();
    fn();
    return KPDET_OK;
  } catch (const kpdet::Error& e) {
    return fail(static_cast<kpdet_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(KPDET_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KPDET_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw kpdet::Error(kpdet::ErrorCode::kInvalidArgument, what);
}

kpdet::Backbone to_backbone(int b) {
  if (b == KPDET_BACKBONE_DRNET) return kpdet::Backbone::kDrnet;
  if (b == KPDET_BACKBONE_HOURGLASS) return kpdet::Backbone::kHourglass;
  throw kpdet::Error(kpdet::ErrorCode::kInvalidArgument, "unknown backbone " + std::to_string(b));
}

kpdet::DetectorConfig to_cpp(const kpdet_config& c) {
  kpdet::DetectorConfig d;
  d.backbone = to_backbone(c.backbone);
  d.model_path.assign(c.model_path, strnlen(c.model_path, KPDET_PATH_MAX));
  d.input_long_side = c.input_long_side;
  d.scale_threshold = c.scale_threshold;
  d.nms_iou = c.nms_iou;
  if (c.has_template) d.face_template = kpdet::FaceTemplate::from_values(c.template_points);
  d.threads = c.threads;
  d.max_proposals = c.max_proposals;
  d.num_keypoints = c.num_keypoints;
  d.validate();
  return d;
}

void from_cpp(const kpdet::DetectorConfig& d, kpdet_config* c) {
  c->backbone = d.backbone == kpdet::Backbone::kDrnet ? KPDET_BACKBONE_DRNET
                                                      : KPDET_BACKBONE_HOURGLASS;
  if (d.model_path.size() >= KPDET_PATH_MAX) {
    throw kpdet::Error(kpdet::ErrorCode::kInvalidArgument, "model path too long");
  }
  std::memset(c->model_path, 0, KPDET_PATH_MAX);
  std::memcpy(c->model_path, d.model_path.data(), d.model_path.size());
  c->input_long_side = d.input_long_side;
  c->scale_threshold = d.scale_threshold;
  c->nms_iou = d.nms_iou;
  const kpdet::FaceTemplate defaults;
  c->has_template = 0;
  for (std::size_t i = 0; i < d.face_template.points.size(); ++i) {
    c->template_points[2 * i] = d.face_template.points[i].x;
    c->template_points[2 * i + 1] = d.face_template.points[i].y;
    if (d.face_template.points[i].x != defaults.points[i].x ||
        d.face_template.points[i].y != defaults.points[i].y) {
      c->has_template = 1;
    }
  }
  c->threads = d.threads;
  c->max_proposals = d.max_proposals;
  c->num_keypoints = d.num_keypoints;
}

}  // namespace

extern "C" {

const char* kpdet_version(void) { return "1.0.0"; }

const char* kpdet_status_name(kpdet_status status) {
  if (status < KPDET_OK || status > KPDET_ERR_INTERNAL) return "unknown";
  return kpdet::error_code_name(static_cast<kpdet::ErrorCode>(status));
}

const char* kpdet_last_error(void) { return g_last_error.c_str(); }

void kpdet_string_free(char* s) { std::free(s); }

void kpdet_config_init(kpdet_config* config) {
  if (config == nullptr) return;
  std::memset(config, 0, sizeof(*config));
  from_cpp(kpdet::DetectorConfig{}, config);
}

kpdet_status kpdet_config_load_file(kpdet_config* config, const char* path) {
  return guarded([&] {
    require(config != nullptr && path != nullptr, "null argument");
    kpdet::DetectorConfig base;
    base.backbone = to_backbone(config->backbone);
    base.model_path.assign(config->model_path, strnlen(config->model_path, KPDET_PATH_MAX));
    base.input_long_side = config->input_long_side;
    base.scale_threshold = config->scale_threshold;
    base.nms_iou = config->nms_iou;
    if (config->has_template) {
      base.face_template = kpdet::FaceTemplate::from_values(config->template_points);
    }
    base.threads = config->threads;
    base.max_proposals = config->max_proposals;
    base.num_keypoints = config->num_keypoints;
    from_cpp(kpdet::load_detector_config(path, base), config);
  });
}

kpdet_status kpdet_resolve_threads(int* threads) {
  return guarded([&] {
    require(threads != nullptr, "null argument");
    *threads = kpdet::resolve_threads(*threads);
  });
}

kpdet_status kpdet_model_load(const kpdet_config* config, kpdet_model** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    const kpdet::DetectorConfig cfg = to_cpp(*config);
    *out = new kpdet_model{kpdet::Detector::from_config(cfg), cfg.backbone};
  });
}

kpdet_status kpdet_model_create_random(const kpdet_config* config, uint64_t seed,
                                       kpdet_model** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    const kpdet::DetectorConfig cfg = to_cpp(*config);
    kpdet::LayerGraph graph = kpdet::build_backbone(cfg.backbone, cfg.model_config());
    kpdet::initialize_random(graph, seed);
    *out = new kpdet_model{kpdet::Detector(std::move(graph), cfg), cfg.backbone};
  });
}

kpdet_status kpdet_model_save(const kpdet_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "null argument");
    kpdet::write_file_bytes(path, kpdet::save_weights(model->detector.graph()));
  });
}

void kpdet_model_destroy(kpdet_model* model) { delete model; }

uint64_t kpdet_model_param_count(const kpdet_model* model) {
  return model ? kpdet::count_params(model->detector.graph()) : 0;
}

kpdet_status kpdet_detect_pixels(const kpdet_model* model, const float* chw, int height,
                                 int width, kpdet_detections** out) {
  return guarded([&] {
    require(model != nullptr && chw != nullptr && out != nullptr, "null argument");
    require(height > 0 && width > 0, "image dimensions must be positive");
    *out = nullptr;
    const std::size_t n = static_cast<std::size_t>(3) * height * width;
    kpdet::Tensor image(kpdet::Shape{3, height, width}, std::vector<float>(chw, chw + n));
    *out = new kpdet_detections{model->detector.detect(image)};
  });
}

kpdet_status kpdet_detect_file(const kpdet_model* model, const char* path,
                               kpdet_detections** out) {
  return guarded([&] {
    require(model != nullptr && path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    *out = new kpdet_detections{model->detector.detect(kpdet::load_pnm(path))};
  });
}

kpdet_status kpdet_detect_files_jsonl(const kpdet_model* model, const char* const* paths,
                                      size_t count, int threads, char** jsonl, char** errors,
                                      size_t* failed) {
  kpdet_status status = KPDET_OK;
  const kpdet_status guard = guarded([&] {
    require(model != nullptr && jsonl != nullptr, "null argument");
    require(count == 0 || paths != nullptr, "null path list");
    std::vector<std::string> list;
    for (size_t i = 0; i < count; ++i) {
      require(paths[i] != nullptr, "null path");
      list.emplace_back(paths[i]);
    }
    const auto results = kpdet::run_detect(model->detector, list, threads);
    std::string err;
    size_t n_failed = 0;
    for (const auto& r : results) {
      if (r.error.empty()) continue;
      ++n_failed;
      err += r.error + "\n";
    }
    *jsonl = dup_string(kpdet::to_jsonl(results));
    if (errors != nullptr) *errors = dup_string(err);
    if (failed != nullptr) *failed = n_failed;
    if (count > 0 && n_failed == count) {
      status = fail(KPDET_ERR_BAD_IMAGE, "all " + std::to_string(count) + " images failed");
    }
  });
  return guard != KPDET_OK ? guard : status;
}

kpdet_status kpdet_decode_heads(const float* scale_probs, int num_scales,
                                const float* landmark_logits, int num_keypoints, int height,
                                int width, int stride, double i_max, const kpdet_config* config,
                                kpdet_detections** out) {
  return guarded([&] {
    require(scale_probs != nullptr && landmark_logits != nullptr && out != nullptr,
            "null argument");
    require(num_scales > 0 && num_keypoints > 0 && height > 0 && width > 0 && stride > 0,
            "dimensions must be positive");
    require(i_max > 0.0, "i_max must be positive");
    *out = nullptr;
    kpdet::DecodeOptions opts;
    if (config != nullptr) {
      const kpdet::DetectorConfig cfg = to_cpp(*config);
      opts.threshold = cfg.scale_threshold;
      opts.nms_iou = cfg.nms_iou;
      opts.max_proposals = cfg.max_proposals;
      opts.face_template = cfg.face_template;
    }
    opts.stride = stride;
    opts.i_max = i_max;
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    kpdet::Tensor probs(kpdet::Shape{num_scales, height, width},
                        std::vector<float>(scale_probs, scale_probs + plane * num_scales));
    kpdet::Tensor marks(kpdet::Shape{num_keypoints, height, width},
                        std::vector<float>(landmark_logits, landmark_logits + plane * num_keypoints));
    *out = new kpdet_detections{kpdet::decode_heads(probs, marks, opts)};
  });
}

size_t kpdet_detections_count(const kpdet_detections* dets) {
  return dets ? dets->items.size() : 0;
}

kpdet_status kpdet_detections_get(const kpdet_detections* dets, size_t index,
                                  kpdet_detection* out) {
  return guarded([&] {
    require(dets != nullptr && out != nullptr, "null argument");
    require(index < dets->items.size(), "detection index out of range");
    const kpdet::Detection& d = dets->items[index];
    out->box[0] = d.box.x1;
    out->box[1] = d.box.y1;
    out->box[2] = d.box.x2;
    out->box[3] = d.box.y2;
    out->score = d.score;
    out->num_keypoints = static_cast<int>(d.keypoints.size());
  });
}

kpdet_status kpdet_detections_keypoints(const kpdet_detections* dets, size_t index, double* xy,
                                        size_t capacity) {
  return guarded([&] {
    require(dets != nullptr && xy != nullptr, "null argument");
    require(index < dets->items.size(), "detection index out of range");
    const auto& kps = dets->items[index].keypoints;
    require(capacity >= 2 * kps.size(), "keypoint buffer too small");
    for (std::size_t i = 0; i < kps.size(); ++i) {
      xy[2 * i] = kps[i].x;
      xy[2 * i + 1] = kps[i].y;
    }
  });
}

void kpdet_detections_destroy(kpdet_detections* dets) { delete dets; }

kpdet_status kpdet_bench(const kpdet_model* model, int batch, int iters, int height, int width,
                         char** report_json) {
  return guarded([&] {
    require(model != nullptr && report_json != nullptr, "null argument");
    require(height > 0 && width > 0 && height % 8 == 0 && width % 8 == 0,
            "bench input must be a positive multiple of 8");
    kpdet::BenchOptions o;
    o.batch = batch;
    o.iters = iters;
    o.height = height;
    o.width = width;
    o.backbone = kpdet::backbone_name(model->backbone);
    *report_json = dup_string(kpdet::to_json(kpdet::run_bench(model->detector.graph(), o)));
  });
}

kpdet_status kpdet_eval(const char* predictions_jsonl, const char* ground_truth_jsonl,
                        const kpdet_eval_options* options, char** report_json) {
  return guarded([&] {
    require(predictions_jsonl != nullptr && ground_truth_jsonl != nullptr &&
                report_json != nullptr,
            "null argument");
    kpdet::EvalOptions o;
    if (options != nullptr) {
      if (options->fp_budgets != nullptr) {
        o.fp_budgets.assign(options->fp_budgets, options->fp_budgets + options->num_fp_budgets);
      }
      if (options->top_k != nullptr) {
        o.top_k.assign(options->top_k, options->top_k + options->num_top_k);
      }
      if (options->iou_threshold > 0.0) o.iou_threshold = options->iou_threshold;
    }
    *report_json = dup_string(kpdet::run_eval(predictions_jsonl, ground_truth_jsonl, o));
  });
}

kpdet_status kpdet_selftest(const char* weights_path, int backbone, char** report,
                            int* all_passed) {
  return guarded([&] {
    require(report != nullptr && all_passed != nullptr, "null argument");
    kpdet::SelftestOptions o;
    if (weights_path != nullptr) o.weights_path = weights_path;
    o.backbone = to_backbone(backbone);
    const auto results = kpdet::run_selftest(o);
    *all_passed = 1;
    for (const auto& r : results) *all_passed &= r.passed ? 1 : 0;
    *report = dup_string(kpdet::format_selftest(results));
  });
}

}  // extern "C"
