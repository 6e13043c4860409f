// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// kpdet command-line tool. Talks to the library only through kpdet.h.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kpdet/kpdet.h"

namespace {

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // command ran but failed (checks, all images)
constexpr int kExitError = 2;    // bad input, unreadable file, bad flag

struct CommonFlags {
  std::string config_path;
  std::string model;
  std::string backbone = "drnet";
  int long_side = 0;
  double threshold = -1.0;
  double nms_iou = -1.0;
  std::vector<double> face_template;
  int threads = 0;
  long long max_proposals = -1;
  int keypoints = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool detector_flags) {
  cmd->add_option("-c,--config", f.config_path, "JSON config file (flags override it)");
  cmd->add_option("-m,--model", f.model, "weight file");
  cmd->add_option("-b,--backbone", f.backbone, "drnet or hourglass")
      ->check(CLI::IsMember({"drnet", "hourglass"}));
  cmd->add_option("--long-side", f.long_side, "network input long side, multiple of 8");
  cmd->add_option("--keypoints", f.keypoints, "keypoints per face (5 or 19)");
  if (!detector_flags) return;
  cmd->add_option("-t,--threshold", f.threshold, "scale-map threshold in (0, 1]");
  cmd->add_option("--nms-iou", f.nms_iou, "NMS IoU threshold in (0, 1]");
  cmd->add_option("--template", f.face_template, "ten numbers x0 y0 ... x4 y4 in the unit box")
      ->expected(10);
  cmd->add_option("-j,--threads", f.threads, "worker threads (env KPDET_THREADS overrides)");
  cmd->add_option("--max-proposals", f.max_proposals, "proposal cap per image, 0 = none");
}

[[noreturn]] void die(const std::string& cmd, const std::string& msg, int code = kExitError) {
  std::cerr << "kpdet " << cmd << ": " << msg << "\n";
  std::exit(code);
}

void check(kpdet_status s, const std::string& cmd, const std::string& context = "") {
  if (s == KPDET_OK) return;
  std::string msg = kpdet_last_error();
  if (!context.empty()) msg = context + ": " + msg;
  die(cmd, msg + " [" + kpdet_status_name(s) + "]");
}

kpdet_config build_config(const CommonFlags& f, const std::string& cmd) {
  kpdet_config c;
  kpdet_config_init(&c);
  c.backbone = f.backbone == "hourglass" ? KPDET_BACKBONE_HOURGLASS : KPDET_BACKBONE_DRNET;
  if (!f.config_path.empty()) check(kpdet_config_load_file(&c, f.config_path.c_str()), cmd);
  if (!f.model.empty()) {
    if (f.model.size() >= KPDET_PATH_MAX) die(cmd, "--model: path too long");
    std::snprintf(c.model_path, KPDET_PATH_MAX, "%s", f.model.c_str());
  }
  if (f.long_side) c.input_long_side = f.long_side;
  if (f.threshold >= 0) c.scale_threshold = f.threshold;
  if (f.nms_iou >= 0) c.nms_iou = f.nms_iou;
  if (!f.face_template.empty()) {
    c.has_template = 1;
    for (int i = 0; i < 10; ++i) c.template_points[i] = f.face_template[i];
  }
  if (f.threads) c.threads = f.threads;
  if (f.max_proposals >= 0) c.max_proposals = static_cast<size_t>(f.max_proposals);
  if (f.keypoints) c.num_keypoints = f.keypoints;
  check(kpdet_resolve_threads(&c.threads), cmd);
  return c;
}

kpdet_model* open_model(const kpdet_config& c, const std::string& cmd, bool random,
                        uint64_t seed) {
  kpdet_model* m = nullptr;
  if (random) {
    check(kpdet_model_create_random(&c, seed, &m), cmd);
  } else {
    if (c.model_path[0] == '\0') die(cmd, "--model is required (or --random)");
    check(kpdet_model_load(&c, &m), cmd);
  }
  return m;
}

std::string read_text(const std::string& path, const std::string& cmd, const char* flag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die(cmd, std::string(flag) + ": cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text, const std::string& cmd) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) die(cmd, "--output: cannot write " + path);
}

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  kpdet_string_free(s);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kpdet: keypoint-based face detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kpdet_version()));

  CommonFlags detect_f, bench_f, init_f;
  std::vector<std::string> images;
  std::string detect_out;
  bool detect_random = false;
  uint64_t detect_seed = 1;
  auto* detect = app.add_subcommand("detect", "detect faces in PGM/PPM images");
  add_common(detect, detect_f, true);
  detect->add_option("images", images, "input images (P5/P6)")->required();
  detect->add_option("-o,--output", detect_out, "JSON-lines output (default stdout)");
  detect->add_flag("--random", detect_random, "use randomly initialized weights");
  detect->add_option("--seed", detect_seed, "seed for --random");

  int batch = 32, iters = 10, bench_h = 256, bench_w = 256;
  bool bench_random = false;
  uint64_t bench_seed = 1;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "time online (batch 1) and offline forward passes");
  add_common(bench, bench_f, false);
  bench->add_option("--batch", batch, "offline batch size")->check(CLI::PositiveNumber);
  bench->add_option("--iters", iters, "timed iterations")->check(CLI::PositiveNumber);
  bench->add_option("--height", bench_h, "input height")->check(CLI::PositiveNumber);
  bench->add_option("--width", bench_w, "input width")->check(CLI::PositiveNumber);
  bench->add_flag("--random", bench_random, "use randomly initialized weights");
  bench->add_option("--seed", bench_seed, "seed for --random");
  bench->add_option("-o,--output", bench_out, "JSON report (default stdout)");

  std::string pred_path, gt_path, eval_out;
  std::vector<size_t> budgets{0, 10, 50}, top_k{1, 10, 100};
  double eval_iou = 0.5;
  auto* eval = app.add_subcommand("eval", "score detections against ground truth");
  eval->add_option("-p,--predictions", pred_path, "detection JSON lines")->required();
  eval->add_option("-g,--ground-truth", gt_path, "ground-truth JSON lines")->required();
  eval->add_option("--fp-budgets", budgets, "false-positive budgets for recall");
  eval->add_option("--top-k", top_k, "proposal counts for top-k recall");
  eval->add_option("--iou", eval_iou, "match IoU threshold")->check(CLI::Range(1e-9, 1.0));
  eval->add_option("-o,--output", eval_out, "JSON report (default stdout)");

  std::string st_weights, st_backbone = "drnet";
  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant checks");
  selftest->add_option("-m,--model", st_weights, "also load this weight file");
  selftest->add_option("-b,--backbone", st_backbone, "backbone for --model")
      ->check(CLI::IsMember({"drnet", "hourglass"}));

  std::string init_out;
  uint64_t init_seed = 1;
  auto* init = app.add_subcommand("init", "write a randomly initialized weight file");
  add_common(init, init_f, false);
  init->add_option("-o,--output", init_out, "weight file to write")->required();
  init->add_option("--seed", init_seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; usage errors share the error exit code.
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  if (*detect) {
    const kpdet_config c = build_config(detect_f, "detect");
    kpdet_model* m = open_model(c, "detect", detect_random, detect_seed);
    std::vector<const char*> paths;
    for (const auto& p : images) paths.push_back(p.c_str());
    char* jsonl = nullptr;
    char* errors = nullptr;
    size_t failed = 0;
    const kpdet_status s =
        kpdet_detect_files_jsonl(m, paths.data(), paths.size(), c.threads, &jsonl, &errors, &failed);
    const std::string err_text = take(errors);
    if (!err_text.empty()) std::cerr << err_text;
    const std::string out = take(jsonl);
    kpdet_model_destroy(m);
    if (s != KPDET_OK && s != KPDET_ERR_BAD_IMAGE) check(s, "detect");
    write_output(detect_out, out, "detect");
    if (s == KPDET_ERR_BAD_IMAGE) die("detect", kpdet_last_error(), kExitFailure);
    return kExitOk;
  }
  if (*bench) {
    const kpdet_config c = build_config(bench_f, "bench");
    kpdet_model* m = open_model(c, "bench", bench_random, bench_seed);
    char* report = nullptr;
    const kpdet_status s = kpdet_bench(m, batch, iters, bench_h, bench_w, &report);
    kpdet_model_destroy(m);
    check(s, "bench");
    write_output(bench_out, take(report) + "\n", "bench");
    return kExitOk;
  }
  if (*eval) {
    const std::string preds = read_text(pred_path, "eval", "--predictions");
    const std::string gt = read_text(gt_path, "eval", "--ground-truth");
    const kpdet_eval_options o{budgets.data(), budgets.size(), top_k.data(), top_k.size(),
                               eval_iou};
    char* report = nullptr;
    check(kpdet_eval(preds.c_str(), gt.c_str(), &o, &report), "eval");
    write_output(eval_out, take(report) + "\n", "eval");
    return kExitOk;
  }
  if (*selftest) {
    char* report = nullptr;
    int ok = 0;
    check(kpdet_selftest(st_weights.empty() ? nullptr : st_weights.c_str(),
                         st_backbone == "hourglass" ? KPDET_BACKBONE_HOURGLASS
                                                    : KPDET_BACKBONE_DRNET,
                         &report, &ok),
          "selftest");
    std::cout << take(report);
    return ok ? kExitOk : kExitFailure;
  }
  if (*init) {
    const kpdet_config c = build_config(init_f, "init");
    kpdet_model* m = open_model(c, "init", true, init_seed);
    const kpdet_status s = kpdet_model_save(m, init_out.c_str());
    const uint64_t params = kpdet_model_param_count(m);
    kpdet_model_destroy(m);
    check(s, "init", init_out);
    std::cerr << "wrote " << init_out << " (" << params << " params)\n";
    return kExitOk;
  }
  return kExitError;
}
