// Copyright 2026 The OmniSR Toolkit Authors.
//
//    Licensed under the Apache License, Version 2.0 (the "License");
//    you may not use this file except in compliance with the License.
//    You may obtain a copy of the License at
//
//         http://www.apache.org/licenses/LICENSE-2.0
//
//    Unless required by applicable law or agreed to in writing, software
//    distributed under the License is distributed on an "AS IS" BASIS,
//    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//    See the License for the specific language governing permissions and
//    limitations under the License.

#include "omnisr/image.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace omnisr {

namespace {

void require_chw(const Image& img, const char* what) {
  if (img.rank() != 3) throw ShapeError(std::string(what) + " expects [C,H,W], got " + to_string(img.shape()));
}

/// Per output sample: first tap index and normalized weights.
struct Taps {
  std::vector<std::int64_t> first;
  std::vector<std::vector<double>> weights;
};

Taps make_taps(std::int64_t in, std::int64_t out) {
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  const double stretch = std::max(ratio, 1.0);
  const double support = 2.0 * stretch;
  Taps t;
  t.first.resize(static_cast<std::size_t>(out));
  t.weights.resize(static_cast<std::size_t>(out));
  for (std::int64_t i = 0; i < out; ++i) {
    const double centre = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    const auto lo = static_cast<std::int64_t>(std::floor(centre - support)) + 1;
    const auto hi = static_cast<std::int64_t>(std::ceil(centre + support)) - 1;
    std::vector<double> w;
    double total = 0.0;
    for (std::int64_t j = lo; j <= hi; ++j) {
      const double v = cubic_kernel((static_cast<double>(j) - centre) / stretch);
      w.push_back(v);
      total += v;
    }
    for (auto& v : w) v /= total;
    t.first[static_cast<std::size_t>(i)] = lo;
    t.weights[static_cast<std::size_t>(i)] = std::move(w);
  }
  return t;
}

}  // namespace

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

Image bicubic_resize(const Image& img, std::int64_t out_h, std::int64_t out_w) {
  require_chw(img, "bicubic_resize");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("bicubic_resize: target extents must be positive");
  const std::int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const Taps tx = make_taps(w, out_w), ty = make_taps(h, out_h);

  // Horizontal pass into [C, H, out_w], then vertical pass.
  std::vector<double> mid(static_cast<std::size_t>(c * h * out_w));
  const float* src = img.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < h; ++y) {
      const float* row = src + (ch * h + y) * w;
      double* dst = mid.data() + (ch * h + y) * out_w;
      for (std::int64_t x = 0; x < out_w; ++x) {
        const auto& wt = tx.weights[static_cast<std::size_t>(x)];
        const std::int64_t first = tx.first[static_cast<std::size_t>(x)];
        double acc = 0.0;
        for (std::size_t k = 0; k < wt.size(); ++k) {
          const std::int64_t j = std::clamp<std::int64_t>(first + static_cast<std::int64_t>(k), 0, w - 1);
          acc += wt[k] * row[j];
        }
        dst[x] = acc;
      }
    }
  }
  Image out(Shape{c, out_h, out_w});
  float* o = out.data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = 0; y < out_h; ++y) {
      const auto& wt = ty.weights[static_cast<std::size_t>(y)];
      const std::int64_t first = ty.first[static_cast<std::size_t>(y)];
      for (std::int64_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < wt.size(); ++k) {
          const std::int64_t j = std::clamp<std::int64_t>(first + static_cast<std::int64_t>(k), 0, h - 1);
          acc += wt[k] * mid[static_cast<std::size_t>((ch * h + j) * out_w + x)];
        }
        o[(ch * out_h + y) * out_w + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  require_chw(img, "flip_horizontal");
  const std::int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Image out(img.shape());
  for (std::int64_t r = 0; r < c * h; ++r) {
    for (std::int64_t x = 0; x < w; ++x) out[r * w + x] = img[r * w + (w - 1 - x)];
  }
  return out;
}

Image rotate90(const Image& img, int quarter_turns) {
  require_chw(img, "rotate90");
  quarter_turns = ((quarter_turns % 4) + 4) % 4;
  if (quarter_turns == 0) return img.clone();
  const std::int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  // One counter-clockwise turn: out[i][j] = in[j][w - 1 - i], out is w x h.
  Image out(Shape{c, w, h});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < w; ++i) {
      for (std::int64_t j = 0; j < h; ++j) out[(ch * w + i) * h + j] = img[(ch * h + j) * w + (w - 1 - i)];
    }
  }
  return quarter_turns == 1 ? out : rotate90(out, quarter_turns - 1);
}

Image crop_region(const Image& img, std::int64_t y, std::int64_t x, std::int64_t h, std::int64_t w) {
  require_chw(img, "crop_region");
  if (y < 0 || x < 0 || h <= 0 || w <= 0 || y + h > img.dim(1) || x + w > img.dim(2)) {
    throw ShapeError("crop_region: window out of bounds for " + to_string(img.shape()));
  }
  const std::int64_t c = img.dim(0), iw = img.dim(2), ih = img.dim(1);
  Image out(Shape{c, h, w});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t r = 0; r < h; ++r) {
      const float* src = img.data() + (ch * ih + y + r) * iw + x;
      std::copy(src, src + w, out.data() + (ch * h + r) * w);
    }
  }
  return out;
}

Image crop_to_multiple(const Image& img, std::int64_t m) {
  require_chw(img, "crop_to_multiple");
  const std::int64_t h = img.dim(1) / m * m, w = img.dim(2) / m * m;
  if (h == 0 || w == 0) throw ShapeError("crop_to_multiple: image smaller than " + std::to_string(m));
  if (h == img.dim(1) && w == img.dim(2)) return img.clone();
  return crop_region(img, 0, 0, h, w);
}

}  // namespace omnisr
