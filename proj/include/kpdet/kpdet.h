/* Copyright 2026 The kpdet Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the kpdet face detector. All handles are opaque. Functions
 * return a kpdet_status; on failure kpdet_last_error() describes the problem
 * for the calling thread. Strings returned through char** are owned by the
 * caller and released with kpdet_string_free.
 */

#ifndef KPDET_KPDET_H_
#define KPDET_KPDET_H_

#include <stddef.h>
#include <stdint.h>

#if defined(KPDET_BUILDING_LIBRARY)
#define KPDET_API __attribute__((visibility("default")))
#else
#define KPDET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kpdet_status {
  KPDET_OK = 0,
  KPDET_ERR_INVALID_ARGUMENT = 1,
  KPDET_ERR_SHAPE_MISMATCH = 2,
  KPDET_ERR_IO = 3,
  KPDET_ERR_BAD_MAGIC = 4,
  KPDET_ERR_BAD_VERSION = 5,
  KPDET_ERR_TRUNCATED = 6,
  KPDET_ERR_MISSING_TENSOR = 7,
  KPDET_ERR_MALFORMED = 8,
  KPDET_ERR_BAD_IMAGE = 9,
  KPDET_ERR_DEGENERATE = 10,
  KPDET_ERR_DIVERGED = 11,
  KPDET_ERR_INTERNAL = 12
} kpdet_status;

typedef enum kpdet_backbone {
  KPDET_BACKBONE_DRNET = 0,
  KPDET_BACKBONE_HOURGLASS = 1
} kpdet_backbone;

#define KPDET_PATH_MAX 4096

typedef struct kpdet_config {
  int backbone; /* kpdet_backbone */
  char model_path[KPDET_PATH_MAX];
  int input_long_side;    /* multiple of 8, default 256 */
  double scale_threshold; /* (0, 1], default 0.5 */
  double nms_iou;         /* (0, 1], default 0.6 */
  int has_template;       /* nonzero: use template_points */
  double template_points[10];
  int threads;            /* default 1 */
  size_t max_proposals;   /* 0 = unlimited, default 1000 */
  int num_keypoints;      /* 5 or 19, default 5 */
} kpdet_config;

typedef struct kpdet_model kpdet_model;
typedef struct kpdet_detections kpdet_detections;

typedef struct kpdet_detection {
  double box[4]; /* x1, y1, x2, y2 */
  double score;
  int num_keypoints;
} kpdet_detection;

KPDET_API const char* kpdet_version(void);
KPDET_API const char* kpdet_status_name(kpdet_status status);
/* Message for the last failure on this thread; "" if none. */
KPDET_API const char* kpdet_last_error(void);
KPDET_API void kpdet_string_free(char* s);

KPDET_API void kpdet_config_init(kpdet_config* config);
/* Merges a JSON config file into *config. */
KPDET_API kpdet_status kpdet_config_load_file(kpdet_config* config, const char* path);
/* Applies the thread-count environment override to *threads. */
KPDET_API kpdet_status kpdet_resolve_threads(int* threads);

/* Loads config->model_path. */
KPDET_API kpdet_status kpdet_model_load(const kpdet_config* config, kpdet_model** out);
/* Fresh random weights (He-initialized backbone, small heads with a 0.01
   face prior); config->model_path is ignored. */
KPDET_API kpdet_status kpdet_model_create_random(const kpdet_config* config, uint64_t seed,
                                                 kpdet_model** out);
KPDET_API kpdet_status kpdet_model_save(const kpdet_model* model, const char* path);
KPDET_API void kpdet_model_destroy(kpdet_model* model);
KPDET_API uint64_t kpdet_model_param_count(const kpdet_model* model);

/* chw: 3 x height x width floats in [0, 1]. */
KPDET_API kpdet_status kpdet_detect_pixels(const kpdet_model* model, const float* chw,
                                           int height, int width, kpdet_detections** out);
KPDET_API kpdet_status kpdet_detect_file(const kpdet_model* model, const char* path,
                                         kpdet_detections** out);
/* Runs every image with `threads` workers. *jsonl receives detection lines in
 * input order; *errors (may be NULL) receives one "path: message" line per
 * failed image. Returns KPDET_OK unless every image failed. */
KPDET_API kpdet_status kpdet_detect_files_jsonl(const kpdet_model* model,
                                                const char* const* paths, size_t count,
                                                int threads, char** jsonl, char** errors,
                                                size_t* failed);

/* Decodes head outputs directly, bypassing the backbone. scale_probs is
 * num_scales x height x width (after sigmoid), landmark_logits is
 * num_keypoints x height x width. Coordinates are network-input pixels. */
KPDET_API kpdet_status kpdet_decode_heads(const float* scale_probs, int num_scales,
                                          const float* landmark_logits, int num_keypoints,
                                          int height, int width, int stride, double i_max,
                                          const kpdet_config* config, kpdet_detections** out);

KPDET_API size_t kpdet_detections_count(const kpdet_detections* dets);
KPDET_API kpdet_status kpdet_detections_get(const kpdet_detections* dets, size_t index,
                                            kpdet_detection* out);
/* Writes 2 * num_keypoints doubles (x0, y0, x1, y1, ...) to xy. */
KPDET_API kpdet_status kpdet_detections_keypoints(const kpdet_detections* dets, size_t index,
                                                  double* xy, size_t capacity);
KPDET_API void kpdet_detections_destroy(kpdet_detections* dets);

/* JSON report with online (batch 1) and offline (given batch) timings. */
KPDET_API kpdet_status kpdet_bench(const kpdet_model* model, int batch, int iters, int height,
                                   int width, char** report_json);

typedef struct kpdet_eval_options {
  const size_t* fp_budgets; /* NULL: 0, 10, 50 */
  size_t num_fp_budgets;
  const size_t* top_k; /* NULL: 1, 10, 100 */
  size_t num_top_k;
  double iou_threshold; /* <= 0: 0.5 */
} kpdet_eval_options;

/* Inputs are JSON-lines text. options may be NULL. */
KPDET_API kpdet_status kpdet_eval(const char* predictions_jsonl, const char* ground_truth_jsonl,
                                  const kpdet_eval_options* options, char** report_json);

/* weights_path may be NULL. *all_passed is 1 only if every check passed. */
KPDET_API kpdet_status kpdet_selftest(const char* weights_path, int backbone, char** report,
                                      int* all_passed);

#ifdef __cplusplus
}
#endif

#endif /* KPDET_KPDET_H_ */
