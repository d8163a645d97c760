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

// Measurement protocol: PSNR and SSIM on the BT.601 luma channel with a
// border shave, a histogram entropy diagnostic for hidden features, the
// benchmark runner and the ablation model factory.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "omnisr/image.hpp"
#include "omnisr/network.hpp"

namespace omnisr {

/// Studio-swing luma: Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255 on
/// [3, H, W] input in [0, 1]; returns [1, H, W].
Image rgb_to_y(const Image& img);

/// 10 log10(1 / MSE) on luma after removing `shave` pixels from every border.
/// Three-channel inputs are converted to luma; one-channel inputs are used
/// as is. Identical inputs return +infinity.
double psnr(const Image& a, const Image& b, std::int64_t shave);

/// Single-scale SSIM, 11 x 11 Gaussian window (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2, averaged over valid window positions. Input handling and
/// shave as in psnr.
double ssim(const Image& a, const Image& b, std::int64_t shave);

/// Normalized entropy of [N, C] features: per channel, a `bins`-bin
/// histogram over that channel's min..max, entropy divided by log(bins),
/// averaged over channels. Constant channels contribute 0.
double feature_entropy(const Tensor<float>& features, int bins = 64);

// ---------------------------------------------------------------- benchmark

/// Maps an LR image [3, h, w] to [3, s h, s w]. `reference` is the HR image;
/// real models ignore it, oracle models may use it.
using SrModel = std::function<Image(const Image& lr, const Image& reference)>;

/// Runs `upscale` on overlapping LR tiles of edge `tile` (stride
/// tile - overlap) and averages the overlapping HR outputs.
Image tiled_upscale(const std::function<Image(const Image&)>& upscale, const Image& lr, int scale,
                    std::int64_t tile = 192, std::int64_t overlap = 16);

/// Network inference without gradient recording, tiled as above.
SrModel network_model(const ModelParams<float>& params, const NetworkConfig& cfg, std::int64_t tile = 192,
                      std::int64_t overlap = 16);

SrModel bicubic_model(int scale);

struct ImageResult {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalFailure {
  std::string name;
  std::string error;
};

struct EvalReport {
  int scale = 0;
  std::string fingerprint;
  std::vector<ImageResult> images;  // sorted by name
  std::vector<EvalFailure> failures;
  double runtime = 0.0;  // seconds

  double mean_psnr() const;
  double mean_ssim() const;

  /// One "image" line per result, "failed" lines, then the aggregate footer.
  std::string to_text() const;
};

/// Evaluates every *.png in `dir`: HR cropped to a multiple of the scale, LR
/// by bicubic downsampling, metrics with shave = scale. Unreadable images
/// are recorded as failures and the run continues.
EvalReport run_benchmark(const SrModel& model, const std::string& dir, int scale,
                         const std::string& fingerprint = {});

/// Evaluates in-memory HR images the same way.
EvalReport run_benchmark(const SrModel& model, const std::vector<std::pair<std::string, Image>>& images,
                         int scale, const std::string& fingerprint = {});

/// Network configuration of an ablation variant. The FFN width is
/// re-chosen so the parameter count stays as close as possible to `base`
/// with the full omni attention; kind == omni returns `base` unchanged.
NetworkConfig ablation_variant(AttentionKind kind, const NetworkConfig& base);

}  // namespace omnisr
