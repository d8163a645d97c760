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

#include "verify/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "omnisr/params.hpp"

namespace omnisr::verify {

Image synthetic_image(std::uint64_t seed, std::int64_t h, std::int64_t w) {
  SplitMix64 rng(seed * 0x9E3779B97F4A7C15ULL + 1);
  constexpr double kTwoPi = 6.283185307179586;
  struct Wave {
    double fx, fy, phase, amp[3];
  };
  struct Disc {
    double cy, cx, r, tint[3];
  };
  Wave waves[4];
  for (auto& wv : waves) {
    const double angle = kTwoPi * rng.uniform(), period = 3.0 + 14.0 * rng.uniform();
    wv.fx = std::cos(angle) / period;
    wv.fy = std::sin(angle) / period;
    wv.phase = kTwoPi * rng.uniform();
    for (auto& a : wv.amp) a = 0.15 * (rng.uniform() - 0.5);
  }
  Disc discs[5];
  for (auto& d : discs) {
    d.cy = h * rng.uniform();
    d.cx = w * rng.uniform();
    d.r = 3.0 + 0.25 * std::min(h, w) * rng.uniform();
    for (auto& t : d.tint) t = 0.5 * (rng.uniform() - 0.5);
  }
  double base[3], grad_y[3], grad_x[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.3 + 0.4 * rng.uniform();
    grad_y[c] = 0.3 * (rng.uniform() - 0.5) / static_cast<double>(h);
    grad_x[c] = 0.3 * (rng.uniform() - 0.5) / static_cast<double>(w);
  }
  Image img(Shape{3, h, w});
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + grad_y[c] * y + grad_x[c] * x;
        for (const auto& wv : waves) v += wv.amp[c] * std::sin(kTwoPi * (wv.fx * x + wv.fy * y) + wv.phase);
        for (const auto& d : discs) {
          if ((y - d.cy) * (y - d.cy) + (x - d.cx) * (x - d.cx) < d.r * d.r) v += d.tint[c];
        }
        v += 0.01 * (rng.uniform() - 0.5);
        // Quantize to the 8-bit grid so PNG round trips are exact.
        img[(c * h + y) * w + x] = static_cast<float>(std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0);
      }
    }
  }
  return img;
}

}  // namespace omnisr::verify
