// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "kpdet/error.hpp"
#include "kpdet/keypoint_decoder.hpp"
#include "kpdet/pipeline.hpp"
#include "kpdet/scale_codec.hpp"

namespace kpdet {
namespace {

// Saturating logit used for planted keypoints.
constexpr float kPeakLogit = 40.0f;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

std::string fmt(const char* f, double v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

Tensor random_tensor(Rng& rng, int c, int h, int w, double lo = -1.0, double hi = 1.0) {
  Tensor t(c, h, w);
  for (float& v : t.data()) v = static_cast<float>(uniform(rng, lo, hi));
  return t;
}

ScaleProposal random_proposal(Rng& rng, int h, int w) {
  ScaleProposal s;
  s.x1 = uniform(rng, 0.0, w * 0.5);
  s.y1 = uniform(rng, 0.0, h * 0.5);
  s.x2 = std::min<double>(w - 1, s.x1 + uniform(rng, 1.5, w * 0.5));
  s.y2 = std::min<double>(h - 1, s.y1 + uniform(rng, 1.5, h * 0.5));
  return s;
}

// --- individual checks; each returns a detail string or throws on failure ---

struct Failure {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

std::string check_conv_identity(Rng& rng) {
  const Tensor x = random_tensor(rng, 4, 9, 7);
  ConvParams p{4, 4, 1, 1, 1, 0, std::vector<float>(16, 0.0f), std::vector<float>(4, 0.0f)};
  for (int i = 0; i < 4; ++i) p.weights[i * 4 + i] = 1.0f;
  require(conv2d(x, p) == x, "1x1 identity kernel changed the input");
  return "4x9x7";
}

std::string check_conv_direct(Rng& rng) {
  double worst = 0.0;
  for (int stride : {1, 2}) {
    const int cin = 5, cout = 7, h = 11, w = 13;
    const Tensor x = random_tensor(rng, cin, h, w);
    ConvParams p{cout, cin, 3, 3, stride, 1, {}, {}};
    for (int i = 0; i < cout * cin * 9; ++i) p.weights.push_back(static_cast<float>(uniform(rng, -1, 1)));
    for (int i = 0; i < cout; ++i) p.bias.push_back(static_cast<float>(uniform(rng, -1, 1)));
    const Tensor y = conv2d(x, p);
    for (int o = 0; o < cout; ++o) {
      for (int oy = 0; oy < y.height(); ++oy) {
        for (int ox = 0; ox < y.width(); ++ox) {
          double acc = p.bias[o];
          for (int c = 0; c < cin; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * stride - 1 + ky, ix = ox * stride - 1 + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += static_cast<double>(p.weights[((o * cin + c) * 3 + ky) * 3 + kx]) *
                       x.at(c, iy, ix);
              }
            }
          }
          worst = std::max(worst, std::abs(acc - y.at(o, oy, ox)));
        }
      }
    }
  }
  require(worst <= 1e-4, "max abs error " + fmt("%.3g", worst));
  return "max abs error " + fmt("%.2g", worst);
}

std::string check_bn_fold(Rng& rng) {
  const Tensor x = random_tensor(rng, 3, 6, 6);
  ConvParams p{4, 3, 3, 3, 1, 1, {}, {}};
  for (int i = 0; i < 4 * 3 * 9; ++i) p.weights.push_back(static_cast<float>(uniform(rng, -1, 1)));
  for (int i = 0; i < 4; ++i) p.bias.push_back(static_cast<float>(uniform(rng, -1, 1)));
  BnParams bn;
  for (int i = 0; i < 4; ++i) {
    bn.gamma.push_back(static_cast<float>(uniform(rng, 0.5, 2)));
    bn.beta.push_back(static_cast<float>(uniform(rng, -1, 1)));
    bn.running_mean.push_back(static_cast<float>(uniform(rng, -1, 1)));
    bn.running_var.push_back(static_cast<float>(uniform(rng, 0.5, 2)));
  }
  const Tensor raw = conv2d(x, p);
  const Tensor folded = conv2d(x, bn_fold(p, bn));
  double worst = 0.0;
  for (int c = 0; c < 4; ++c) {
    const double scale = bn.gamma[c] / std::sqrt(bn.running_var[c] + bn.epsilon);
    for (int y = 0; y < 6; ++y) {
      for (int xx = 0; xx < 6; ++xx) {
        const double ref = (raw.at(c, y, xx) - bn.running_mean[c]) * scale + bn.beta[c];
        worst = std::max(worst, std::abs(ref - folded.at(c, y, xx)));
      }
    }
  }
  require(worst <= 1e-4, "max abs error " + fmt("%.3g", worst));
  return "max abs error " + fmt("%.2g", worst);
}

std::string check_upsample_pool(Rng& rng) {
  const Tensor x = random_tensor(rng, 3, 5, 4);
  require(maxpool2d(upsample_nearest2(x), 2, 2) == x, "maxpool(upsample(x)) != x");
  return "3x5x4";
}

std::string check_scale_index() {
  struct Case {
    double h, w, i_max;
    int bin;
  };
  const Case cases[] = {{32, 32, 2048, 1}, {45.2548, 32, 2048, 5}, {20, 20, 1280, 1},
                        {2048, 1024, 2048, 60}};
  for (const Case& c : cases) {
    const int b = encode_scale_index(c.h, c.w, c.i_max);
    require(b == c.bin, "bin " + std::to_string(b) + " expected " + std::to_string(c.bin));
  }
  return "4 fixed examples";
}

std::string check_scale_roundtrip(Rng& rng) {
  const double lo = std::pow(2.0, -0.05), hi = std::pow(2.0, 0.05);
  for (int i = 0; i < 200; ++i) {
    const double i_max = uniform(rng, 128, 512);
    const int stride = 2;
    const int map = static_cast<int>(i_max) / stride;
    const double size = i_max * std::pow(2.0, uniform(rng, 5.0, 11.0)) / 2048.0;
    GroundTruthFace f{uniform(rng, 0, map * stride), uniform(rng, 0, map * stride), size,
                      size * uniform(rng, 0.6, 1.0)};
    const ScaleMap m = paint_target(std::span(&f, 1), map, map, {kNumScaleBins, stride, i_max});
    const auto props = decode_proposals(m, 0.99);
    require(props.size() == 1, "expected one proposal, got " + std::to_string(props.size()));
    const double ratio = props[0].scale / size;
    require(ratio >= lo && ratio <= hi, "scale ratio " + fmt("%.4f", ratio));
    require(props[0].cell_x == static_cast<int>(f.cx / stride) &&
                props[0].cell_y == static_cast<int>(f.cy / stride),
            "host cell mismatch");
  }
  return "200 faces";
}

std::string check_bce_grad(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> q(48), p(48);
    for (std::size_t i = 0; i < q.size(); ++i) {
      q[i] = uniform(rng, 0.05, 0.95);
      p[i] = uniform(rng, 0, 1) < 0.3 ? 1.0 : uniform(rng, 0, 1);
    }
    const auto g = scale_bce_loss_grad<double>(q, p);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double h = 1e-6;
      auto qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const double fd = (scale_bce_loss<double>(qp, p) - scale_bce_loss<double>(qm, p)) / (2 * h);
      worst = std::max(worst, rel_err(fd, g[i]));
    }
  }
  require(worst <= 1e-4, "max relative error " + fmt("%.3g", worst));
  return "max relative error " + fmt("%.2g", worst);
}

std::string check_softmax_sum(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int h = 12, w = 15;
    std::vector<double> d(static_cast<std::size_t>(h) * w);
    for (double& v : d) v = uniform(rng, -5, 5);
    const HeatmapView<double> view{d, 1, h, w};
    const auto p = masked_softmax(view, random_proposal(rng, h, w), 0);
    double sum = 0.0;
    for (double v : p) sum += v;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  require(worst <= 1e-6, "sum deviates by " + fmt("%.3g", worst));
  return "100 instances, max deviation " + fmt("%.2g", worst);
}

std::string check_soft_argmax_grad(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int k = 2, h = 9, w = 10;
    std::vector<double> d(static_cast<std::size_t>(k) * h * w);
    for (double& v : d) v = uniform(rng, -2, 2);
    const ScaleProposal s = random_proposal(rng, h, w);
    const int c = t % k;
    const double gx = uniform(rng, -1, 1), gy = uniform(rng, -1, 1);
    const auto grad = soft_argmax_grad<double>({d, k, h, w}, s, c, gx, gy);
    auto f = [&](const std::vector<double>& v) {
      const Coord<double> psi = soft_argmax<double>({v, k, h, w}, s, c);
      return gx * psi.x + gy * psi.y;
    };
    for (std::size_t i = 0; i < d.size(); ++i) {
      auto dp = d, dm = d;
      dp[i] += 1e-5;
      dm[i] -= 1e-5;
      worst = std::max(worst, rel_err((f(dp) - f(dm)) / 2e-5, grad[i]));
    }
  }
  require(worst <= 1e-4, "max relative error " + fmt("%.3g", worst));
  return "max relative error " + fmt("%.2g", worst);
}

std::string check_keypoint_loss_grad(Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    std::vector<Coord<double>> pred(5), gt(5);
    for (int i = 0; i < 5; ++i) {
      pred[i] = {uniform(rng, 0, 1), uniform(rng, 0, 1)};
      gt[i] = {uniform(rng, 0, 1), uniform(rng, 0, 1)};
    }
    const auto g = keypoint_loss_grad<double>(pred, gt);
    for (int i = 0; i < 5; ++i) {
      for (int axis = 0; axis < 2; ++axis) {
        auto pp = pred, pm = pred;
        (axis ? pp[i].y : pp[i].x) += 1e-5;
        (axis ? pm[i].y : pm[i].x) -= 1e-5;
        const double fd =
            (keypoint_loss<double>(pp, gt) - keypoint_loss<double>(pm, gt)) / 2e-5;
        worst = std::max(worst, rel_err(fd, axis ? g[i].y : g[i].x));
      }
    }
  }
  require(worst <= 1e-6, "max relative error " + fmt("%.3g", worst));
  return "max relative error " + fmt("%.2g", worst);
}

std::string check_heatmap_fit() {
  ScaleProposal s;
  s.x2 = 31;
  s.y2 = 31;
  const FitResult r = fit_heatmap_to_keypoints({{0.25, 0.75}}, s, 500, 1.0);
  const double err = std::max(std::abs(r.keypoints[0].x - 0.25), std::abs(r.keypoints[0].y - 0.75));
  require(err <= 0.01, "coordinate error " + fmt("%.4f", err));
  return "target (0.25, 0.75), error " + fmt("%.2g", err);
}

std::vector<std::size_t> nms_reference(const std::vector<Box>& boxes, double thr) {
  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (boxes[a].score != boxes[b].score) return boxes[a].score > boxes[b].score;
    if (boxes[a].x1 != boxes[b].x1) return boxes[a].x1 < boxes[b].x1;
    return boxes[a].y1 < boxes[b].y1;
  });
  std::vector<std::size_t> keep;
  for (std::size_t i : order) {
    bool ok = true;
    for (std::size_t j : keep) ok = ok && iou(boxes[i], boxes[j]) <= thr;
    if (ok) keep.push_back(i);
  }
  return keep;
}

std::string check_nms(Rng& rng) {
  for (int t = 0; t < 200; ++t) {
    std::vector<Box> boxes;
    const int n = 1 + static_cast<int>(uniform(rng, 0, 30));
    for (int i = 0; i < n; ++i) {
      const double x = uniform(rng, 0, 50), y = uniform(rng, 0, 50);
      boxes.push_back({x, y, x + uniform(rng, 2, 20), y + uniform(rng, 2, 20),
                       std::round(uniform(rng, 0, 10)) / 10});
    }
    for (double thr : {0.3, 0.6, 0.9}) {
      require(nms_indices(boxes, thr) == nms_reference(boxes, thr), "differs from reference");
    }
  }
  return "200 random sets x 3 thresholds";
}

std::string check_template_box() {
  const FaceTemplate tpl;
  std::vector<Point> kps(tpl.points.begin(), tpl.points.end());
  Box b = keypoints_to_box(kps, tpl);
  double err = std::max({std::abs(b.x1), std::abs(b.y1), std::abs(b.x2 - 1), std::abs(b.y2 - 1)});
  for (Point& p : kps) p = {p.x * 100 + 50, p.y * 100 + 30};
  b = keypoints_to_box(kps, tpl);
  err = std::max({err, std::abs(b.x1 - 50) / 100, std::abs(b.y1 - 30) / 100,
                  std::abs(b.x2 - 150) / 100, std::abs(b.y2 - 130) / 100});
  require(err <= 1e-6, "box error " + fmt("%.3g", err));
  return "identity and x100 shift";
}

std::string check_params(Backbone b, double lo, double hi) {
  const auto n = static_cast<double>(count_params(build_backbone(b)));
  require(n >= lo && n <= hi, fmt("%.0f params", n));
  return fmt("%.0f params", n);
}

std::string check_weight_roundtrip(Backbone b, std::uint64_t seed) {
  LayerGraph g = build_backbone(b);
  initialize_random(g, seed);
  const auto bytes = save_weights(g);
  const LayerGraph back = load_weights(build_backbone(b), bytes);
  require(save_weights(back) == bytes, "re-encoded bytes differ");
  return std::to_string(bytes.size()) + " bytes";
}

std::string check_synthetic_decode() {
  const int stride = 2, map = 128;
  const std::vector<PlantedFace> faces{{60, 70, 64}, {180, 60, 48}, {130, 190, 80}};
  const SyntheticScene scene = make_synthetic_scene(faces, map, map, stride, 256.0);
  DecodeOptions opts;
  opts.stride = stride;
  opts.i_max = 256.0;
  const auto dets = decode_heads(scene.scale_probs, scene.landmark_logits, opts);
  require(dets.size() == faces.size(), std::to_string(dets.size()) + " detections");
  double worst_iou = 1.0, worst_kp = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    double best = 0.0;
    const Detection* hit = nullptr;
    for (const auto& d : dets) {
      const double v = iou(d.box, scene.boxes[f]);
      if (v > best) best = v, hit = &d;
    }
    worst_iou = std::min(worst_iou, best);
    require(hit != nullptr, "face " + std::to_string(f) + " not found");
    for (std::size_t k = 0; k < hit->keypoints.size(); ++k) {
      worst_kp = std::max(worst_kp, std::hypot(hit->keypoints[k].x - scene.keypoints[f][k].x,
                                               hit->keypoints[k].y - scene.keypoints[f][k].y) /
                                        stride);
    }
  }
  require(worst_iou >= 0.8, "IoU " + fmt("%.3f", worst_iou));
  require(worst_kp <= 1.0, "keypoint error " + fmt("%.3f", worst_kp) + " heatmap px");
  return "min IoU " + fmt("%.3f", worst_iou) + ", max keypoint error " + fmt("%.3f", worst_kp) +
         " heatmap px";
}

std::string check_weights_file(const SelftestOptions& o) {
  const LayerGraph g = load_weights(build_backbone(o.backbone), read_file_bytes(o.weights_path));
  return o.weights_path + ": " + std::to_string(count_params(g)) + " params";
}

}  // namespace

SyntheticScene make_synthetic_scene(const std::vector<PlantedFace>& faces, int map_height,
                                    int map_width, int stride, double i_max,
                                    const FaceTemplate& face_template) {
  SyntheticScene s;
  std::vector<GroundTruthFace> gt;
  for (const PlantedFace& f : faces) gt.push_back({f.cx, f.cy, f.size, f.size});
  s.scale_probs =
      paint_target(gt, map_height, map_width, {kNumScaleBins, stride, i_max}).values;
  const int k = static_cast<int>(face_template.points.size());
  s.landmark_logits = Tensor(k, map_height, map_width);
  for (const PlantedFace& f : faces) {
    const double x1 = f.cx - f.size / 2, y1 = f.cy - f.size / 2;
    s.boxes.push_back({x1, y1, x1 + f.size, y1 + f.size, 1.0});
    std::vector<Point> kps;
    for (int c = 0; c < k; ++c) {
      const Point p{x1 + face_template.points[c].x * f.size, y1 + face_template.points[c].y * f.size};
      kps.push_back(p);
      // Heatmap pixel i covers input px [i * stride, (i + 1) * stride).
      const int hx = std::clamp(static_cast<int>(std::floor(p.x / stride)), 0, map_width - 1);
      const int hy = std::clamp(static_cast<int>(std::floor(p.y / stride)), 0, map_height - 1);
      s.landmark_logits.at(c, hy, hx) = kPeakLogit;
    }
    s.keypoints.push_back(std::move(kps));
  }
  return s;
}

std::vector<CheckResult> run_selftest(const SelftestOptions& options) {
  Rng rng(options.seed);
  std::vector<std::pair<std::string, std::function<std::string()>>> checks = {
      {"conv_identity", [&] { return check_conv_identity(rng); }},
      {"conv_direct_oracle", [&] { return check_conv_direct(rng); }},
      {"bn_fold", [&] { return check_bn_fold(rng); }},
      {"upsample_pool_roundtrip", [&] { return check_upsample_pool(rng); }},
      {"scale_index_examples", [] { return check_scale_index(); }},
      {"scale_roundtrip", [&] { return check_scale_roundtrip(rng); }},
      {"bce_gradient", [&] { return check_bce_grad(rng); }},
      {"softmax_normalization", [&] { return check_softmax_sum(rng); }},
      {"soft_argmax_gradient", [&] { return check_soft_argmax_grad(rng); }},
      {"keypoint_loss_gradient", [&] { return check_keypoint_loss_grad(rng); }},
      {"heatmap_fit", [] { return check_heatmap_fit(); }},
      {"nms_reference", [&] { return check_nms(rng); }},
      {"template_box", [] { return check_template_box(); }},
      {"drnet_params", [] { return check_params(Backbone::kDrnet, 0.92e6, 1.12e6); }},
      {"hourglass_params",
       [] { return check_params(Backbone::kHourglass, 0.94e6, 1.14e6); }},
      {"weight_roundtrip",
       [&] { return check_weight_roundtrip(options.backbone, options.seed); }},
      {"synthetic_decode", [] { return check_synthetic_decode(); }},
  };
  if (!options.weights_path.empty()) {
    checks.push_back({"weights_file", [&] { return check_weights_file(options); }});
  }
  std::vector<CheckResult> results;
  for (auto& [name, fn] : checks) {
    CheckResult r{name, false, ""};
    try {
      r.detail = fn();
      r.passed = true;
    } catch (const Failure& f) {
      r.detail = f.what;
    } catch (const std::exception& e) {
      r.detail = std::string("error: ") + e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_selftest(const std::vector<CheckResult>& results) {
  std::size_t width = 0, passed = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::string out;
  for (const auto& r : results) {
    out += (r.passed ? "PASS  " : "FAIL  ") + r.name + std::string(width - r.name.size() + 2, ' ') +
           r.detail + "\n";
    passed += r.passed;
  }
  out += std::to_string(passed) + "/" + std::to_string(results.size()) + " checks passed\n";
  return out;
}

}  // namespace kpdet
