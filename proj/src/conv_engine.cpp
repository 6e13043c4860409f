// Copyright 2026 The kpdet Authors
// SPDX-License-Identifier: Apache-2.0

#include "conv_engine.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <vector>

namespace kpdet::detail {
namespace {

#if defined(__AVX512F__)
constexpr int kVecWidth = 16;
constexpr int kMr = 8;
#elif defined(__AVX__)
constexpr int kVecWidth = 8;
constexpr int kMr = 6;
#else
constexpr int kVecWidth = 4;
constexpr int kMr = 4;
#endif
constexpr int kNr = 2 * kVecWidth;
constexpr int kKc = 256;
// An im2col band (k_total x columns floats) is sized to stay resident in L2
// while the micro-kernel sweeps it once per weight panel.
constexpr std::size_t kBandBytes = 512 * 1024;
constexpr int kMinBandColumns = 4 * kNr;
constexpr int kMaxBandColumns = 2048;

typedef float Vec __attribute__((vector_size(kVecWidth * sizeof(float))));

template <typename T>
class AlignedBuffer {
 public:
  void resize(std::size_t n) {
    if (n > capacity_) {
      storage_.assign(n + 64 / sizeof(T), T{});
      capacity_ = n;
    }
    auto addr = reinterpret_cast<std::uintptr_t>(storage_.data());
    std::size_t shift = (64 - addr % 64) % 64 / sizeof(T);
    data_ = storage_.data() + shift;
  }
  T* data() noexcept { return data_; }

 private:
  std::vector<T> storage_;
  std::size_t capacity_ = 0;
  T* data_ = nullptr;
};

inline Vec load(const float* p) {
  Vec v;
  std::memcpy(&v, p, sizeof(Vec));
  return v;
}

inline void store(float* p, Vec v) { std::memcpy(p, &v, sizeof(Vec)); }

inline Vec relu_vec(Vec v) {
  Vec zero = {};
  return v > zero ? v : zero;
}

struct TileArgs {
  int kc;
  const float* a;  // kc x kMr, packed
  const float* b;  // kc x kNr, packed
  float* c;
  std::size_t ldc;
  int m_eff;
  int n_eff;
  const float* bias;  // kMr entries, or null
  bool first;
  bool last;
  bool relu;
};

void micro_kernel(const TileArgs& t) {
  Vec acc[kMr][2] = {};
  const float* a = t.a;
  const float* b = t.b;
  for (int k = 0; k < t.kc; ++k) {
    Vec b0 = load(b);
    Vec b1 = load(b + kVecWidth);
#pragma GCC unroll 8
    for (int r = 0; r < kMr; ++r) {
      Vec av = Vec{} + a[r];
      acc[r][0] += av * b0;
      acc[r][1] += av * b1;
    }
    a += kMr;
    b += kNr;
  }

  if (t.m_eff == kMr && t.n_eff == kNr) {
    for (int r = 0; r < kMr; ++r) {
      float* row = t.c + r * t.ldc;
      Vec c0, c1;
      if (t.first) {
        Vec bias = Vec{} + (t.bias ? t.bias[r] : 0.0f);
        c0 = acc[r][0] + bias;
        c1 = acc[r][1] + bias;
      } else {
        c0 = load(row) + acc[r][0];
        c1 = load(row + kVecWidth) + acc[r][1];
      }
      if (t.last && t.relu) {
        c0 = relu_vec(c0);
        c1 = relu_vec(c1);
      }
      store(row, c0);
      store(row + kVecWidth, c1);
    }
    return;
  }

  alignas(64) float tile[kMr][kNr];
  for (int r = 0; r < kMr; ++r) {
    store(&tile[r][0], acc[r][0]);
    store(&tile[r][kVecWidth], acc[r][1]);
  }
  for (int r = 0; r < t.m_eff; ++r) {
    float* row = t.c + r * t.ldc;
    float bias = (t.first && t.bias) ? t.bias[r] : 0.0f;
    for (int j = 0; j < t.n_eff; ++j) {
      float v = t.first ? tile[r][j] + bias : row[j] + tile[r][j];
      if (t.last && t.relu) v = std::max(v, 0.0f);
      row[j] = v;
    }
  }
}

// im2col for output rows [oy0, oy1) written straight into kNr-column panels.
// Column n of the band lands in panel n / kNr, lane n % kNr.
void pack_band(const Tensor& in, const ConvParams& p, int out_w, int oy0, int oy1,
               int k_total, float* panels) {
  const int cols = (oy1 - oy0) * out_w;
  const int n_panels = (cols + kNr - 1) / kNr;
  const std::size_t panel_stride = static_cast<std::size_t>(k_total) * kNr;
  const int in_h = in.height();
  const int in_w = in.width();
  const float* src = in.data().data();

  // Tail columns of the last panel stay zero.
  if (cols % kNr != 0) {
    float* last = panels + (n_panels - 1) * panel_stride;
    std::fill(last, last + panel_stride, 0.0f);
  }

  int k = 0;
  for (int ci = 0; ci < p.in_channels; ++ci) {
    const float* plane = src + static_cast<std::size_t>(ci) * in_h * in_w;
    for (int ky = 0; ky < p.kernel_h; ++ky) {
      for (int kx = 0; kx < p.kernel_w; ++kx, ++k) {
        float* base = panels + static_cast<std::size_t>(k) * kNr;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * p.stride - p.padding + ky;
          const bool row_ok = iy >= 0 && iy < in_h;
          const float* row = row_ok ? plane + static_cast<std::size_t>(iy) * in_w : plane;
          int n = (oy - oy0) * out_w;
          int ox = 0;
          while (ox < out_w) {
            // Run of columns that stays inside one panel.
            const int lane = n % kNr;
            const int run = std::min(out_w - ox, kNr - lane);
            float* dst = base + static_cast<std::size_t>(n / kNr) * panel_stride + lane;
            if (!row_ok) {
              std::fill(dst, dst + run, 0.0f);
            } else if (p.stride == 1) {
              // ix = ox - padding + kx; split into left zeros, copy, right zeros.
              const int shift = kx - p.padding;
              const int lo = std::clamp(-shift - ox, 0, run);
              const int hi = std::clamp(in_w - shift - ox, lo, run);
              std::fill(dst, dst + lo, 0.0f);
              std::copy(row + ox + shift + lo, row + ox + shift + hi, dst + lo);
              std::fill(dst + hi, dst + run, 0.0f);
            } else {
              for (int j = 0; j < run; ++j) {
                const int ix = (ox + j) * p.stride - p.padding + kx;
                dst[j] = (ix >= 0 && ix < in_w) ? row[ix] : 0.0f;
              }
            }
            ox += run;
            n += run;
          }
        }
      }
    }
  }
}

}  // namespace

// Weights become ceil(M / kMr) panels of K x kMr, zero padded past M.
PackedConv::PackedConv(const ConvParams& params) : params_(&params) {
  const int k_total = params.in_channels * params.kernel_h * params.kernel_w;
  const int m_panels = (params.out_channels + kMr - 1) / kMr;
  weights_.assign(static_cast<std::size_t>(m_panels) * k_total * kMr + 64 / sizeof(float), 0.0f);
  const auto addr = reinterpret_cast<std::uintptr_t>(weights_.data());
  offset_ = (64 - addr % 64) % 64 / sizeof(float);
  float* dst = weights_.data() + offset_;
  for (int ib = 0; ib < m_panels; ++ib) {
    for (int k = 0; k < k_total; ++k) {
      for (int r = 0; r < kMr; ++r) {
        const int m = ib * kMr + r;
        *dst++ = m < params.out_channels
                     ? params.weights[static_cast<std::size_t>(m) * k_total + k]
                     : 0.0f;
      }
    }
  }
  bias_.assign(static_cast<std::size_t>(m_panels) * kMr, 0.0f);
  std::copy(params.bias.begin(), params.bias.end(), bias_.begin());
}

void run_conv(std::span<const Tensor* const> inputs, const ConvParams& params,
              Activation activation, std::span<Tensor* const> outputs) {
  if (inputs.empty()) return;
  run_conv(inputs, PackedConv(params), activation, outputs);
}

void run_conv(std::span<const Tensor* const> inputs, const PackedConv& packed,
              Activation activation, std::span<Tensor* const> outputs) {
  if (inputs.empty()) return;
  const ConvParams& params = packed.params();
  const Shape out_shape = outputs[0]->shape();
  const int k_total = params.in_channels * params.kernel_h * params.kernel_w;
  const int m = params.out_channels;
  const int m_panels = (m + kMr - 1) / kMr;
  const int out_w = out_shape.width;
  const std::size_t ldc = out_shape.plane();
  const bool relu = activation == Activation::kRelu;

  const int band_columns = std::clamp(
      static_cast<int>(kBandBytes / (sizeof(float) * static_cast<std::size_t>(k_total))),
      kMinBandColumns, kMaxBandColumns);
  const int rows_per_band = std::max(1, band_columns / out_w);
  AlignedBuffer<float> b_packed;
  const int max_cols = std::min(rows_per_band, out_shape.height) * out_w;
  b_packed.resize(static_cast<std::size_t>((max_cols + kNr - 1) / kNr) * k_total * kNr);

  for (std::size_t img = 0; img < inputs.size(); ++img) {
    float* out = outputs[img]->data().data();
    for (int oy0 = 0; oy0 < out_shape.height; oy0 += rows_per_band) {
      const int oy1 = std::min(out_shape.height, oy0 + rows_per_band);
      const int cols = (oy1 - oy0) * out_w;
      const int n_panels = (cols + kNr - 1) / kNr;
      pack_band(*inputs[img], params, out_w, oy0, oy1, k_total, b_packed.data());

      const std::size_t band_offset = static_cast<std::size_t>(oy0) * out_w;
      for (int k0 = 0; k0 < k_total; k0 += kKc) {
        const int kc = std::min(kKc, k_total - k0);
        for (int jb = 0; jb < n_panels; ++jb) {
          const float* b = b_packed.data() + static_cast<std::size_t>(jb) * k_total * kNr +
                           static_cast<std::size_t>(k0) * kNr;
          for (int ib = 0; ib < m_panels; ++ib) {
            TileArgs t;
            t.kc = kc;
            t.a = packed.weights() + static_cast<std::size_t>(ib) * k_total * kMr +
                  static_cast<std::size_t>(k0) * kMr;
            t.b = b;
            t.c = out + static_cast<std::size_t>(ib) * kMr * ldc + band_offset +
                  static_cast<std::size_t>(jb) * kNr;
            t.ldc = ldc;
            t.m_eff = std::min(kMr, m - ib * kMr);
            t.n_eff = std::min(kNr, cols - jb * kNr);
            t.bias = packed.bias() + ib * kMr;
            t.first = k0 == 0;
            t.last = k0 + kc == k_total;
            t.relu = relu;
            micro_kernel(t);
          }
        }
      }
    }
  }
}

}  // namespace kpdet::detail
