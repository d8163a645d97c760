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

#pragma once

// Plain image utilities on [C, H, W] float tensors in [0, 1]. None of these
// record on a tape; they feed the data pipeline and the metrics.

#include <cstdint>

#include "omnisr/tensor.hpp"

namespace omnisr {

using Image = Tensor<float>;

/// Catmull-Rom cubic (a = -0.5).
double cubic_kernel(double x);

/// Separable bicubic resize with half-pixel centres. On downsampling the
/// kernel is stretched by the scale ratio (antialiasing); taps beyond the
/// border are clamped to the edge and weights renormalized to sum to one.
Image bicubic_resize(const Image& img, std::int64_t out_h, std::int64_t out_w);

/// Mirror along the width axis.
Image flip_horizontal(const Image& img);

/// Rotate by quarter_turns * 90 degrees counter-clockwise.
Image rotate90(const Image& img, int quarter_turns);

/// Copy of the window [y, y + h) x [x, x + w).
Image crop_region(const Image& img, std::int64_t y, std::int64_t x, std::int64_t h, std::int64_t w);

/// Top-left crop to the largest extents divisible by `m`.
Image crop_to_multiple(const Image& img, std::int64_t m);

}  // namespace omnisr
