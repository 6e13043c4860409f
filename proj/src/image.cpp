// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "kpdet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "kpdet/error.hpp"
#include "kpdet/model.hpp"

namespace kpdet {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Skips whitespace and '#' comments running to the end of the line.
  void skip_separators() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_number(const char* field) {
    skip_separators();
    if (pos_ >= bytes_.size()) {
      throw Error(ErrorCode::kTruncated, std::string("PNM header ends before ") + field);
    }
    if (!std::isdigit(bytes_[pos_])) {
      throw Error(ErrorCode::kBadImage, std::string("malformed PNM header: expected ") + field);
    }
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > 1'000'000) {
        throw Error(ErrorCode::kBadImage, std::string("PNM ") + field + " is too large");
      }
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void expect_single_space() {
    if (pos_ >= bytes_.size()) throw Error(ErrorCode::kTruncated, "PNM header ends after maxval");
    if (!std::isspace(bytes_[pos_])) {
      throw Error(ErrorCode::kBadImage, "malformed PNM header: no whitespace after maxval");
    }
    ++pos_;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor parse_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) throw Error(ErrorCode::kTruncated, "PNM file shorter than its magic");
  if (bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw Error(ErrorCode::kBadImage, "not a binary PGM/PPM file (expected P5 or P6)");
  }
  const int samples = bytes[1] == '6' ? 3 : 1;
  HeaderReader r(bytes);
  r.advance(2);
  const long width = r.read_number("width");
  const long height = r.read_number("height");
  const long maxval = r.read_number("maxval");
  r.expect_single_space();
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kBadImage, "PNM dimensions must be positive");
  }
  if (maxval != 255) {
    throw Error(ErrorCode::kBadImage, "only maxval 255 is supported, got " + std::to_string(maxval));
  }
  const std::size_t plane = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t needed = plane * samples;
  if (bytes.size() - r.pos() < needed) {
    throw Error(ErrorCode::kTruncated, "PNM raster truncated: need " + std::to_string(needed) +
                                           " bytes, have " +
                                           std::to_string(bytes.size() - r.pos()));
  }
  Tensor out(3, static_cast<int>(height), static_cast<int>(width));
  const std::uint8_t* px = bytes.data() + r.pos();
  auto data = out.data();
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const std::uint8_t v = samples == 3 ? px[i * 3 + c] : px[i];
      data[c * plane + i] = static_cast<float>(v) / 255.0f;
    }
  }
  return out;
}

Tensor load_pnm(const std::string& path) {
  try {
    return parse_pnm(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  if (image.channels() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "encode_ppm needs a 3-channel tensor");
  }
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& image, int height, int width) {
  Tensor out(image.channels(), height, width);
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  const int max_y = image.height() - 1;
  const int max_x = image.width() - 1;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, max_y);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, max_x);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < image.channels(); ++c) {
        const float top = image.at(c, y0, x0) * (1 - wx) + image.at(c, y0, x1) * wx;
        const float bottom = image.at(c, y1, x0) * (1 - wx) + image.at(c, y1, x1) * wx;
        out.at(c, y, x) = top * (1 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

PreparedImage prepare_image(const Tensor& image, int long_side) {
  if (long_side < 8) throw Error(ErrorCode::kInvalidArgument, "long side must be >= 8");
  const int in_h = image.height();
  const int in_w = image.width();
  const double factor = static_cast<double>(long_side) / std::max(in_h, in_w);
  const int out_h = std::max(1, static_cast<int>(std::lround(in_h * factor)));
  const int out_w = std::max(1, static_cast<int>(std::lround(in_w * factor)));

  PreparedImage p;
  p.resized_height = out_h;
  p.resized_width = out_w;
  p.transform.scale_x = static_cast<double>(out_w) / in_w;
  p.transform.scale_y = static_cast<double>(out_h) / in_h;
  const Tensor resized =
      (out_h == in_h && out_w == in_w) ? image : resize_bilinear(image, out_h, out_w);
  const int pad_h = (out_h + 7) / 8 * 8;
  const int pad_w = (out_w + 7) / 8 * 8;
  p.tensor = Tensor(image.channels(), pad_h, pad_w);
  for (int c = 0; c < image.channels(); ++c) {
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) p.tensor.at(c, y, x) = resized.at(c, y, x);
    }
  }
  return p;
}

}  // namespace kpdet
