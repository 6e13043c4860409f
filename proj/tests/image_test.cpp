// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "kpdet/error.hpp"
#include "kpdet/image.hpp"
#include "oracles.hpp"

namespace kpdet {
namespace {

std::vector<std::uint8_t> bytes_of(const std::string& header, std::vector<std::uint8_t> pixels) {
  std::vector<std::uint8_t> b(header.begin(), header.end());
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

ErrorCode code_of(const std::vector<std::uint8_t>& b) {
  try {
    parse_pnm(b);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

TEST(ParsePnm, GrayOnePixel) {
  const Tensor t = parse_pnm(bytes_of("P5\n1 1\n255\n", {255}));
  EXPECT_EQ(t.shape(), (Shape{3, 1, 1}));
  for (float v : t.data()) EXPECT_EQ(v, 1.0f);
}

TEST(ParsePnm, ColorLayoutIsPlanar) {
  const Tensor t = parse_pnm(bytes_of("P6\n2 1\n255\n", {255, 0, 0, 0, 0, 51}));
  EXPECT_EQ(t.shape(), (Shape{3, 1, 2}));
  EXPECT_EQ(t.at(0, 0, 0), 1.0f);
  EXPECT_EQ(t.at(1, 0, 0), 0.0f);
  EXPECT_EQ(t.at(0, 0, 1), 0.0f);
  EXPECT_FLOAT_EQ(t.at(2, 0, 1), 0.2f);
}

TEST(ParsePnm, CommentsAndWhitespace) {
  const Tensor t = parse_pnm(bytes_of("P5 # gray\n# size next\n 2\t1 \n255\n", {0, 255}));
  EXPECT_EQ(t.shape(), (Shape{3, 1, 2}));
  EXPECT_EQ(t.at(1, 0, 1), 1.0f);
}

TEST(ParsePnm, Rejects) {
  EXPECT_EQ(code_of(bytes_of("P3\n1 1\n255\n", {1})), ErrorCode::kBadImage);
  EXPECT_EQ(code_of(bytes_of("P5\n1 1\n65535\n", {1, 1})), ErrorCode::kBadImage);
  EXPECT_EQ(code_of(bytes_of("P5\n1 1\n15\n", {1})), ErrorCode::kBadImage);
  EXPECT_EQ(code_of(bytes_of("P5\n0 1\n255\n", {})), ErrorCode::kBadImage);
  EXPECT_EQ(code_of(bytes_of("P5\n-3 1\n255\n", {})), ErrorCode::kBadImage);
  EXPECT_EQ(code_of(bytes_of("P5\n99999999 99999999\n255\n", {})), ErrorCode::kBadImage);
  EXPECT_EQ(code_of(bytes_of("P6\n2 2\n255\n", {1, 2, 3})), ErrorCode::kTruncated);
  EXPECT_EQ(code_of(bytes_of("P5\n2 2", {})), ErrorCode::kTruncated);
  EXPECT_EQ(code_of({}), ErrorCode::kTruncated);
  EXPECT_THROW(load_pnm("/nonexistent/kpdet.ppm"), Error);
}

TEST(EncodePpm, RoundTrip) {
  oracle::Rng rng(6);
  Tensor t(3, 5, 7);
  for (float& v : t.data()) v = oracle::uniform_int(rng, 0, 255) / 255.0f;
  EXPECT_EQ(parse_pnm(encode_ppm(t)), t);
}

// Reference bilinear resize in double precision.
double ref_sample(const Tensor& img, int c, double sy, double sx) {
  sy = std::clamp(sy, 0.0, img.height() - 1.0);
  sx = std::clamp(sx, 0.0, img.width() - 1.0);
  const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, img.height() - 1), x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
         fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
}

TEST(ResizeBilinear, MatchesReference) {
  oracle::Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const int h = oracle::uniform_int(rng, 1, 30), w = oracle::uniform_int(rng, 1, 30);
    const int oh = oracle::uniform_int(rng, 1, 40), ow = oracle::uniform_int(rng, 1, 40);
    const Tensor img = oracle::random_tensor(rng, 3, h, w, 0, 1);
    const Tensor out = resize_bilinear(img, oh, ow);
    ASSERT_EQ(out.shape(), (Shape{3, oh, ow}));
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const double e = ref_sample(img, c, (y + 0.5) * h / oh - 0.5, (x + 0.5) * w / ow - 0.5);
          ASSERT_NEAR(out.at(c, y, x), e, 1e-5);
        }
      }
    }
  }
  const Tensor flat(3, 4, 6, 0.25f);
  const Tensor squeezed = resize_bilinear(flat, 9, 3);
  for (float v : squeezed.data()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(PrepareImage, LongSideAndPadding) {
  const PreparedImage p = prepare_image(Tensor(3, 200, 300, 0.5f), 256);
  EXPECT_EQ(p.resized_width, 256);
  EXPECT_EQ(p.resized_height, 171);
  EXPECT_EQ(p.tensor.shape(), (Shape{3, 176, 256}));
  EXPECT_EQ(p.tensor.at(0, 170, 255), 0.5f);
  EXPECT_EQ(p.tensor.at(0, 171, 0), 0.0f);
  EXPECT_THROW(prepare_image(Tensor(3, 4, 4), 4), Error);
}

TEST(PrepareImage, CoordinatesRoundTripWithinOnePixel) {
  // A bright square resized to the network and mapped back lands within
  // a pixel of where it started.
  oracle::Rng rng(10);
  for (int t = 0; t < 20; ++t) {
    // Long sides from 64 to 1024 px: resize factors 4 down to 0.25.
    const int h = oracle::uniform_int(rng, 64, 1024), w = oracle::uniform_int(rng, 64, 1024);
    Tensor img(3, h, w);
    const int cx = oracle::uniform_int(rng, 20, w - 21), cy = oracle::uniform_int(rng, 20, h - 21);
    for (int c = 0; c < 3; ++c) {
      for (int y = cy - 10; y < cy + 10; ++y) {
        for (int x = cx - 10; x < cx + 10; ++x) img.at(c, y, x) = 1.0f;
      }
    }
    const PreparedImage p = prepare_image(img, 256);
    double sx = 0, sy = 0, mass = 0;
    for (int y = 0; y < p.resized_height; ++y) {
      for (int x = 0; x < p.resized_width; ++x) {
        const double v = p.tensor.at(0, y, x);
        sx += v * (x + 0.5);
        sy += v * (y + 0.5);
        mass += v;
      }
    }
    const Point back = p.transform.to_original(Point{sx / mass, sy / mass});
    EXPECT_NEAR(back.x, cx, 1.0) << "case " << t;
    EXPECT_NEAR(back.y, cy, 1.0) << "case " << t;
    const Point q{123.25, 45.5};
    const Point rt = p.transform.to_original(p.transform.to_network(q));
    EXPECT_NEAR(rt.x, q.x, 1e-9);
    EXPECT_NEAR(rt.y, q.y, 1e-9);
  }
}

}  // namespace
}  // namespace kpdet
