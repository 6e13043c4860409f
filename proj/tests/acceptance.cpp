// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kpdet/error.hpp"
#include "kpdet/eval.hpp"
#include "kpdet/geometry.hpp"
#include "kpdet/image.hpp"
#include "kpdet/keypoint_decoder.hpp"
#include "kpdet/model.hpp"
#include "kpdet/pipeline.hpp"
#include "kpdet/runner.hpp"
#include "kpdet/scale_codec.hpp"
#include "kpdet/selftest.hpp"
#include "oracles.hpp"

namespace {

using namespace kpdet;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

ScaleProposal proposal(double x1, double y1, double x2, double y2) {
  ScaleProposal s;
  s.x1 = x1;
  s.y1 = y1;
  s.x2 = x2;
  s.y2 = y2;
  return s;
}

ScaleProposal random_proposal(oracle::Rng& rng, int h, int w) {
  const double x1 = oracle::uniform(rng, 0, w - 2), y1 = oracle::uniform(rng, 0, h - 2);
  return proposal(x1, y1, oracle::uniform(rng, x1 + 1.0, w - 1),
                  oracle::uniform(rng, y1 + 1.0, h - 1));
}

// 1. Analytic gradients against central differences.
Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  oracle::Rng rng(101);
  double sa = 0, kl = 0, bce = 0;
  for (int t = 0; t < 100; ++t) {
    const int k = 2, h = oracle::uniform_int(rng, 3, 10), w = oracle::uniform_int(rng, 3, 10);
    std::vector<double> d(static_cast<std::size_t>(k) * h * w);
    for (double& v : d) v = oracle::uniform(rng, -3, 3);
    const ScaleProposal s = random_proposal(rng, h, w);
    const int c = t % k;
    const double gx = oracle::uniform(rng, -1, 1), gy = oracle::uniform(rng, -1, 1);
    const auto g = soft_argmax_grad<double>({d, k, h, w}, s, c, gx, gy);
    const auto fd = oracle::numeric_grad(
        [&](const std::vector<double>& x) {
          const auto r = oracle::soft_argmax(
              std::vector<double>(x.begin() + c * h * w, x.begin() + (c + 1) * h * w), h, w, s.x1,
              s.y1, s.x2, s.y2);
          return gx * r.psi_x + gy * r.psi_y;
        },
        d, 1e-5);
    for (std::size_t i = 0; i < g.size(); ++i) sa = std::max(sa, oracle::rel_err(g[i], fd[i]));
  }
  for (int t = 0; t < 100; ++t) {
    const int n = oracle::uniform_int(rng, 1, 19);
    std::vector<Coord<double>> p(n), g(n);
    std::vector<double> flat;
    for (int i = 0; i < n; ++i) {
      p[i] = {oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1)};
      g[i] = {oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1)};
      flat.insert(flat.end(), {p[i].x, p[i].y});
    }
    const auto grad = keypoint_loss_grad<double>(p, g);
    const auto fd = oracle::numeric_grad(
        [&](const std::vector<double>& x) {
          std::vector<Coord<double>> q(n);
          for (int i = 0; i < n; ++i) q[i] = {x[2 * i], x[2 * i + 1]};
          return keypoint_loss<double>(q, g);
        },
        flat, 1e-4);
    for (int i = 0; i < n; ++i) {
      kl = std::max({kl, oracle::rel_err(grad[i].x, fd[2 * i]),
                     oracle::rel_err(grad[i].y, fd[2 * i + 1])});
    }
  }
  for (int t = 0; t < 100; ++t) {
    std::vector<double> q(4 * 4 * 3), target(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = oracle::uniform(rng, 0.02, 0.98);
      const double u = oracle::uniform(rng, 0, 1);
      target[i] = u < 0.2 ? 0.0 : u < 0.4 ? 1.0 : oracle::uniform(rng, 0, 1);
    }
    const auto g = scale_bce_loss_grad<double>(q, target);
    const auto fd = oracle::numeric_grad(
        [&](const std::vector<double>& x) { return scale_bce_loss<double>(x, target); }, q, 1e-6);
    for (std::size_t i = 0; i < g.size(); ++i) bce = std::max(bce, oracle::rel_err(g[i], fd[i]));
  }
  const double secs = seconds_since(t0);
  return {sa <= 1e-4 && kl <= 1e-6 && bce <= 1e-4 && secs < 10.0,
          fmt("max rel err soft-argmax %.2e, keypoint loss %.2e, scale BCE %.2e; %.2f s", sa, kl,
              bce, secs)};
}

// 2. Masked softmax normalization, support, range and invariances.
Outcome softmax_contract() {
  oracle::Rng rng(202);
  double sum_err = 0, outside = 0, inv = 0;
  bool in_range = true;
  for (int t = 0; t < 1000; ++t) {
    const int h = oracle::uniform_int(rng, 4, 24), w = oracle::uniform_int(rng, 4, 24);
    std::vector<double> d(static_cast<std::size_t>(h) * w);
    const double spread = oracle::uniform(rng, 0.1, 30);
    for (double& v : d) v = oracle::uniform(rng, -spread, spread);
    const ScaleProposal s = random_proposal(rng, h, w);
    const HeatmapView<double> view{d, 1, h, w};
    const auto phi = masked_softmax<double>(view, s, 0);
    const ProposalWindow win = make_window(s, h, w);
    double sum = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = phi[static_cast<std::size_t>(y) * w + x];
        if (x >= win.ix0 && x <= win.ix1 && y >= win.iy0 && y <= win.iy1) {
          sum += v;
        } else {
          outside = std::max(outside, std::abs(v));
        }
      }
    }
    sum_err = std::max(sum_err, std::abs(sum - 1.0));
    const Coord<double> psi = soft_argmax<double>(view, s, 0);
    in_range = in_range && psi.x >= 0 && psi.x <= 1 && psi.y >= 0 && psi.y <= 1;

    auto shifted = d;
    const double k = oracle::uniform(rng, -100, 100);
    for (double& v : shifted) v += k;
    const Coord<double> a = soft_argmax<double>({shifted, 1, h, w}, s, 0);
    inv = std::max({inv, std::abs(a.x - psi.x), std::abs(a.y - psi.y)});

    const int ox = oracle::uniform_int(rng, 1, 6), oy = oracle::uniform_int(rng, 1, 6);
    const int bh = h + oy, bw = w + ox;
    std::vector<double> moved(static_cast<std::size_t>(bh) * bw, -1e3);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) moved[static_cast<std::size_t>(y + oy) * bw + x + ox] = d[y * w + x];
    }
    const Coord<double> b = soft_argmax<double>(
        {moved, 1, bh, bw}, proposal(s.x1 + ox, s.y1 + oy, s.x2 + ox, s.y2 + oy), 0);
    inv = std::max({inv, std::abs(b.x - psi.x), std::abs(b.y - psi.y)});
  }
  return {sum_err <= 1e-6 && outside == 0.0 && in_range && inv <= 1e-6,
          fmt("1000 pairs: |sum-1| <= %.1e, max outside %.1e, invariance err %.1e", sum_err,
              outside, inv) +
              (in_range ? ", psi in [0,1]^2" : ", psi OUT of range")};
}

// 3. paint_target -> decode_proposals recovers size and host cell.
Outcome scale_roundtrip() {
  oracle::Rng rng(303);
  const double lo = std::exp2(-0.05), hi = std::exp2(0.05);
  int bad = 0;
  double worst = 1;
  for (int t = 0; t < 1000; ++t) {
    const double i_max = oracle::uniform(rng, 64, 2048);
    const int map = std::min(96, static_cast<int>(i_max / 2));
    const double size = i_max * std::exp2(oracle::uniform(rng, 5.0, 11.0)) / 2048;
    const GroundTruthFace f{oracle::uniform(rng, 0, 2 * map), oracle::uniform(rng, 0, 2 * map),
                            size * oracle::uniform(rng, 0.3, 1), size};
    const ScaleMap m = paint_target(std::span(&f, 1), map, map, {60, 2, i_max, 0.1});
    const auto p = decode_proposals(m, 0.99);
    if (p.size() != 1) {
      ++bad;
      continue;
    }
    const double ratio = p[0].scale / size;
    worst = std::max(worst, std::max(ratio, 1 / ratio));
    if (ratio < lo || ratio > hi || p[0].cell_x != static_cast<int>(std::floor(f.cx / 2)) ||
        p[0].cell_y != static_cast<int>(std::floor(f.cy / 2))) {
      ++bad;
    }
  }
  return {bad == 0, fmt("1000 faces, %.0f failures, worst size ratio %.4f (bound %.4f)", bad, worst,
                        hi)};
}

// 4. Heatmap logits fitted through the soft-argmax reach random targets.
Outcome differentiable_fit() {
  const auto t0 = Clock::now();
  oracle::Rng rng(404);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    KeypointSet gt(5);
    for (auto& c : gt) c = {oracle::uniform(rng, 0.05, 0.95), oracle::uniform(rng, 0.05, 0.95)};
    const FitResult r = fit_heatmap_to_keypoints(gt, proposal(0, 0, 31, 31), 500, 1.0);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      worst = std::max({worst, std::abs(r.keypoints[i].x - gt[i].x),
                        std::abs(r.keypoints[i].y - gt[i].y)});
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 0.01 && secs < 30.0,
          fmt("20 targets x 5 keypoints, worst coordinate error %.2e, %.2f s", worst, secs)};
}

// 5. Parameter budgets.
Outcome parameter_budgets() {
  const double drnet = static_cast<double>(count_params(build_drnet()));
  const double hourglass = static_cast<double>(count_params(build_hourglass_light()));
  return {drnet >= 920e3 && drnet <= 1120e3 && hourglass >= 940e3 && hourglass <= 1140e3,
          fmt("drnet %.0f, hourglass_light %.0f", drnet, hourglass)};
}

// 6. Head shapes at half resolution.
Outcome shape_contract() {
  std::ostringstream detail;
  bool ok = true;
  for (Backbone bb : {Backbone::kDrnet, Backbone::kHourglass}) {
    LayerGraph g = build_backbone(bb);
    initialize_random(g, 6);
    for (auto [h, w] : {std::pair{256, 256}, std::pair{192, 256}, std::pair{128, 384}}) {
      const HeadOutputs o = forward(g, Tensor(3, h, w, 0.5f));
      ok = ok && o.scale_logits.shape() == Shape{60, h / 2, w / 2} &&
           o.landmark_logits.shape() == Shape{5, h / 2, w / 2};
    }
  }
  detail << "2 backbones x {256x256, 192x256, 128x384} -> 60 + 5 channels at H/2 x W/2";
  return {ok, detail.str()};
}

// 7. Greedy NMS equals the brute-force reference.
Outcome nms_oracle() {
  int mismatches = 0, sets = 0;
  for (double thr : {0.3, 0.6, 0.9}) {
    oracle::Rng rng(700 + static_cast<std::uint64_t>(thr * 10));
    for (int t = 0; t < 1000; ++t, ++sets) {
      std::vector<Box> boxes;
      const int n = oracle::uniform_int(rng, 0, 50);
      for (int i = 0; i < n; ++i) {
        const double x = oracle::uniform(rng, 0, 80), y = oracle::uniform(rng, 0, 80);
        boxes.push_back({x, y, x + oracle::uniform(rng, 2, 30), y + oracle::uniform(rng, 2, 30),
                         oracle::uniform_int(rng, 0, 10) / 10.0});
      }
      if (nms_indices(boxes, thr) != oracle::nms(boxes, thr)) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("%.0f box sets at IoU {0.3, 0.6, 0.9}, %.0f mismatches", sets,
                               mismatches)};
}

// 8. Decoding head outputs built from planted faces.
Outcome synthetic_decode() {
  oracle::Rng rng(808);
  const int map = 128, stride = 2;
  const double i_max = 256;
  double min_iou = 1, max_kp = 0;
  int wrong_count = 0, scenes = 0;
  std::vector<std::vector<PlantedFace>> all{{{60, 70, 64}, {180, 60, 48}, {130, 190, 80}}};
  while (all.size() < 50) {
    std::vector<PlantedFace> faces;
    for (int tries = 0; faces.size() < 3 && tries < 200; ++tries) {
      const double s = oracle::uniform(rng, 32, 96);
      const PlantedFace f{oracle::uniform(rng, s / 2, 256 - s / 2),
                          oracle::uniform(rng, s / 2, 256 - s / 2), s};
      bool clear = true;
      for (const auto& g : faces) {
        const double gap = 0.6 * (f.size + g.size) + 4;
        clear = clear && (std::abs(f.cx - g.cx) > gap || std::abs(f.cy - g.cy) > gap);
      }
      if (clear) faces.push_back(f);
    }
    if (faces.size() == 3) all.push_back(faces);
  }
  for (const auto& faces : all) {
    ++scenes;
    const SyntheticScene s = make_synthetic_scene(faces, map, map, stride, i_max);
    DecodeOptions opt;
    opt.nms_iou = 0.6;
    opt.stride = stride;
    opt.i_max = i_max;
    const auto dets = decode_heads(s.scale_probs, s.landmark_logits, opt);
    if (dets.size() != faces.size()) {
      ++wrong_count;
      continue;
    }
    for (std::size_t f = 0; f < faces.size(); ++f) {
      std::size_t hit = 0;
      double best = -1;
      for (std::size_t d = 0; d < dets.size(); ++d) {
        const double v = iou(dets[d].box, s.boxes[f]);
        if (v > best) {
          best = v;
          hit = d;
        }
      }
      min_iou = std::min(min_iou, best);
      for (std::size_t k = 0; k < s.keypoints[f].size(); ++k) {
        max_kp = std::max(max_kp, std::hypot(dets[hit].keypoints[k].x - s.keypoints[f][k].x,
                                              dets[hit].keypoints[k].y - s.keypoints[f][k].y) /
                                      stride);
      }
    }
  }
  return {wrong_count == 0 && min_iou >= 0.8 && max_kp <= 1.0,
          fmt("%.0f scenes of 3 faces, %.0f with wrong count, min IoU %.3f, max keypoint error "
              "%.3f heatmap px",
              scenes, wrong_count, min_iou, max_kp)};
}

// 9. Metric fixtures and monotonicity.
Outcome metric_fixtures() {
  auto sq = [](double x, double y, double side, double score = 0) {
    return Box{x, y, x + side, y + side, score};
  };
  std::vector<std::string> failures;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) failures.push_back(what);
  };
  // Pooled by score: TP(.9) FP(.8) TP(.7) FP(.6) TP(.5) FP(.4) over four faces.
  CorpusMatches c;
  c.add_image(std::vector<Box>{sq(0, 0, 10, 0.9), sq(100, 100, 10, 0.6)},
              std::vector<Box>{sq(0, 0, 10), sq(20, 0, 10)});
  c.add_image(std::vector<Box>{sq(50, 50, 10, 0.8), sq(1, 0, 10, 0.5)}, std::vector<Box>{sq(0, 0, 10)});
  c.add_image(std::vector<Box>{sq(0, 1, 10, 0.7), sq(70, 0, 10, 0.4)}, std::vector<Box>{sq(0, 0, 10)});
  expect(recall_at_fp(c, 0) == 0.25, "recall@0");
  expect(recall_at_fp(c, 1) == 0.5, "recall@1");
  expect(recall_at_fp(c, 2) == 0.75, "recall@2");

  const std::vector<std::vector<Box>> gt{{sq(0, 0, 10), sq(50, 50, 10)}, {sq(0, 0, 10)}};
  const std::vector<std::vector<Box>> props{
      {sq(50, 50, 10, 0.2), sq(0, 0, 10, 0.9), sq(90, 90, 10, 0.5)},
      {sq(30, 30, 10, 0.8), sq(0, 0, 10, 0.7)}};
  expect(topk_recall(props, gt, 1) == 1.0 / 3, "top1");
  expect(topk_recall(props, gt, 2) == 2.0 / 3, "top2");
  expect(topk_recall(props, gt, 3) == 1.0, "top3");

  FaceAlignment one;
  one.ground_truth = {{50, 50}};
  one.predicted = {{53, 54}};
  one.ground_truth_box = sq(0, 0, 100);
  expect(std::abs(nme(std::vector{one}, NmeNormalization::kFaceSize) - 0.05) < 1e-15, "nme face");
  FaceAlignment five;
  five.ground_truth = {{0, 0}, {50, 0}, {25, 20}, {10, 40}, {40, 40}};
  for (const Point& p : five.ground_truth) five.predicted.push_back({p.x + 0.6, p.y - 0.8});
  five.ground_truth_box = sq(-10, -10, 70);
  expect(std::abs(nme(std::vector{five}, NmeNormalization::kInterOcular) - 0.02) < 1e-15,
         "nme inter-ocular");

  oracle::Rng rng(909);
  int monotone_violations = 0;
  for (int t = 0; t < 200; ++t) {
    CorpusMatches rc;
    std::vector<std::vector<Box>> rg, rp;
    for (int img = 0; img < oracle::uniform_int(rng, 1, 6); ++img) {
      std::vector<Box> g, d;
      for (int i = 0; i < oracle::uniform_int(rng, 1, 4); ++i) {
        g.push_back(sq(oracle::uniform(rng, 0, 60), oracle::uniform(rng, 0, 60), 12));
      }
      for (int i = 0; i < oracle::uniform_int(rng, 0, 12); ++i) {
        d.push_back(sq(oracle::uniform(rng, 0, 60), oracle::uniform(rng, 0, 60), 12,
                       oracle::uniform_int(rng, 1, 8) / 8.0));
      }
      rc.add_image(d, g);
      rg.push_back(g);
      rp.push_back(d);
    }
    double prev = 0;
    for (std::size_t b = 0; b < 15; ++b) {
      const double r = recall_at_fp(rc, b);
      if (r < prev || r > 1) ++monotone_violations;
      prev = r;
    }
    prev = 0;
    for (std::size_t k = 1; k < 15; ++k) {
      const double r = topk_recall(rp, rg, k);
      if (r < prev || r > 1) ++monotone_violations;
      prev = r;
    }
  }
  std::string detail = "fixture recall {0.25, 0.5, 0.75}, top-k {1/3, 2/3, 1}, NME {0.05, 0.02}";
  for (const auto& f : failures) detail += "; mismatch " + f;
  detail += fmt("; 200 random corpora, %.0f monotonicity violations", monotone_violations);
  return {failures.empty() && monotone_violations == 0, detail};
}

// 10. Weight and PNM parsers under mutation.
Outcome format_robustness() {
  std::vector<std::string> failures;
  // Byte-exact round trips on both backbones.
  for (Backbone bb : {Backbone::kDrnet, Backbone::kHourglass}) {
    LayerGraph g = build_backbone(bb);
    initialize_random(g, 10);
    const auto bytes = save_weights(g);
    if (save_weights(load_weights(build_backbone(bb), bytes)) != bytes) {
      failures.push_back(std::string("round trip ") + backbone_name(bb));
    }
  }

  auto code_of = [](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kOk;
  };

  // Designated errors on hand-made corruptions.
  LayerGraph drnet = build_drnet();
  initialize_random(drnet, 11);
  const auto good = save_weights(drnet);
  const LayerGraph blank = build_drnet();
  auto weights_code = [&](std::vector<std::uint8_t> b) {
    return code_of([&] { load_weights(blank, b); });
  };
  auto b = good;
  b[1] = 'Q';
  if (weights_code(b) != ErrorCode::kBadMagic) failures.push_back("bad magic");
  b = good;
  b.resize(good.size() / 2);
  if (weights_code(b) != ErrorCode::kTruncated) failures.push_back("truncated weights");
  ModelConfig k19;
  k19.num_keypoints = 19;
  if (code_of([&] { load_weights(build_drnet(k19), good); }) != ErrorCode::kShapeMismatch) {
    failures.push_back("shape mismatch");
  }
  const std::string bad_pnm = "P7\n1 1\n255\n\x01";
  if (code_of([&] {
        parse_pnm(std::vector<std::uint8_t>(bad_pnm.begin(), bad_pnm.end()));
      }) != ErrorCode::kBadImage) {
    failures.push_back("bad PNM");
  }

  // Mutation fuzzing on a small graph (fast loads) and small PNM files.
  GraphBuilder gb;
  const int c1 = gb.conv("stem", gb.input(), 4, 3, 1, Activation::kRelu, true);
  const int s = gb.conv("scale", c1, 60, 1, 1, Activation::kNone, false, LayerRole::kHead);
  const int l = gb.conv("landmark", c1, 5, 1, 1, Activation::kNone, false, LayerRole::kHead);
  LayerGraph tiny = std::move(gb).finish(s, l, 1);
  initialize_random(tiny, 12);
  const auto tiny_bytes = save_weights(tiny);
  const LayerGraph tiny_blank = [&] {
    GraphBuilder g2;
    const int a = g2.conv("stem", g2.input(), 4, 3, 1, Activation::kRelu, true);
    const int bs = g2.conv("scale", a, 60, 1, 1, Activation::kNone, false, LayerRole::kHead);
    const int bl = g2.conv("landmark", a, 5, 1, 1, Activation::kNone, false, LayerRole::kHead);
    return std::move(g2).finish(bs, bl, 1);
  }();
  Tensor img(3, 6, 5);
  oracle::Rng rng(1010);
  for (float& v : img.data()) v = oracle::uniform_int(rng, 0, 255) / 255.0f;
  auto ppm = encode_ppm(img);
  const std::string pgm_head = "P5\n# fuzz\n4 3\n255\n";
  std::vector<std::uint8_t> pgm(pgm_head.begin(), pgm_head.end());
  for (int i = 0; i < 12; ++i) pgm.push_back(static_cast<std::uint8_t>(i * 20));

  // Bytes that matter to the parsers: zero, sign bits, comment, space, digit.
  static constexpr std::array<std::uint8_t, 7> kSpecialBytes{0x00, 0xff, 0x7f, 0x80, '#', ' ', '9'};
  auto mutate = [&](std::vector<std::uint8_t> v) {
    const int kind = oracle::uniform_int(rng, 0, 5);
    const int edits = oracle::uniform_int(rng, 1, 4);
    for (int e = 0; e < edits && !v.empty(); ++e) {
      const std::size_t at = static_cast<std::size_t>(oracle::uniform_int(rng, 0, static_cast<int>(v.size()) - 1));
      switch (kind) {
        case 0: v[at] ^= static_cast<std::uint8_t>(1u << oracle::uniform_int(rng, 0, 7)); break;
        case 1: v[at] = static_cast<std::uint8_t>(oracle::uniform_int(rng, 0, 255)); break;
        case 2: v.resize(at); break;
        case 3: v.insert(v.begin() + static_cast<std::ptrdiff_t>(at), static_cast<std::uint8_t>(oracle::uniform_int(rng, 0, 255))); break;
        case 4: v.erase(v.begin() + static_cast<std::ptrdiff_t>(at)); break;
        default: v[at] = static_cast<std::uint8_t>(kSpecialBytes[oracle::uniform_int(rng, 0, 6)]); break;
      }
    }
    return v;
  };

  int cases = 0, rejected = 0, unexpected = 0;
  auto run = [&](const std::function<void()>& fn) {
    ++cases;
    try {
      fn();
    } catch (const Error&) {
      ++rejected;
    } catch (...) {
      ++unexpected;
    }
  };
  for (int i = 0; i < 6000; ++i) {
    const auto m = mutate(tiny_bytes);
    run([&] {
      const LayerGraph g = load_weights(tiny_blank, m);
      const HeadOutputs o = forward(g, img);
      for (float v : o.scale_logits.data()) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite output from loaded weights");
      }
    });
  }
  for (int i = 0; i < 200; ++i) {
    const auto m = mutate(good);
    run([&] { load_weights(blank, m); });
  }
  for (int i = 0; i < 5000; ++i) {
    const auto m = mutate(i % 2 ? ppm : pgm);
    run([&] {
      const Tensor t = parse_pnm(m);
      for (float v : t.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) throw std::runtime_error("pixel out of range");
      }
    });
  }
  std::string detail = fmt("round trips byte-exact; %.0f mutated files, %.0f rejected with a "
                           "designated error, %.0f unexpected failures",
                           cases, rejected, unexpected);
  for (const auto& f : failures) detail += "; wrong error for " + f;
  return {failures.empty() && unexpected == 0 && cases >= 10000, detail};
}

// 11. Forward latency and batching amortization.
Outcome performance() {
  LayerGraph g = build_drnet();
  initialize_random(g, 13);
  BenchOptions o;
  o.batch = 32;
  o.iters = 5;
  o.warmup = 1;
  o.backbone = "drnet";
  const BenchReport r = run_bench(g, o);
  return {r.online_median_ms < 250.0 && r.offline_median_ms <= r.online_median_ms,
          fmt("drnet 256x256 online %.1f ms/img, offline (batch 32) %.1f ms/img", r.online_median_ms,
              r.offline_median_ms)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"gradient fidelity", gradient_fidelity}, {"softmax contract", softmax_contract},
      {"scale roundtrip", scale_roundtrip},     {"differentiable fit", differentiable_fit},
      {"parameter budgets", parameter_budgets}, {"shape contract", shape_contract},
      {"NMS oracle", nms_oracle},               {"synthetic decode", synthetic_decode},
      {"metric fixtures", metric_fixtures},     {"format robustness", format_robustness},
      {"performance", performance},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.passed;
    std::printf("%s criterion %zu (%s): %s\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
