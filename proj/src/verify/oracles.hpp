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

// Brute-force reference implementations. They share no code with the
// library kernels: explicit loops over indices, double accumulation, no
// reshapes, no matrix products.

#include <cstdint>
#include <vector>

#include "omnisr/attention.hpp"
#include "omnisr/image.hpp"

namespace omnisr::verify {

/// Literal softmax(q k^T / sqrt(d)) v per head on [B, N, C].
Tensor<double> spatial_attention_loops(const Tensor<double>& q, const Tensor<double>& k, const Tensor<double>& v,
                                       int heads);

/// Literal channel attention on [B, N, C]: per head, L2-normalize every
/// channel of q and k over the tokens, A[i][j] = softmax_j(sum_n k[n][i] q[n][j]
/// / tau), y[n][i] = sum_j A[i][j] v[n][j].
Tensor<double> channel_attention_loops(const Tensor<double>& q, const Tensor<double>& k, const Tensor<double>& v,
                                       int heads, const std::vector<double>& tau);

/// Monolithic omni attention (copy wiring): projections, both stages and
/// the output projection written out as loops.
Tensor<double> omni_attention_loops(const Tensor<double>& x, const AttentionParams<double>& p);

/// Position of pixel (i, j) after partitioning an H x W map.
struct WindowSlot {
  std::int64_t window;
  std::int64_t token;
};
WindowSlot meso_slot(std::int64_t i, std::int64_t j, std::int64_t w, std::int64_t p);
/// Dilated sampling: window = intra-cell offset, token = grid cell.
WindowSlot global_slot(std::int64_t i, std::int64_t j, std::int64_t h, std::int64_t w, std::int64_t g);

/// Bicubic resize as one direct 2-D kernel sum per output pixel.
Image bicubic_direct(const Image& img, std::int64_t out_h, std::int64_t out_w);

/// SSIM of two single-channel planes (already luma, already shaved) by an
/// explicit 11 x 11 weighted sum at every valid position.
double ssim_direct(const Image& a, const Image& b);

/// MSE-based PSNR of single-channel planes by direct summation.
double psnr_direct(const Image& a, const Image& b);

/// Direct-loop 2-D convolution on [B, Cin, H, W].
Tensor<double> conv2d_loops(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                            std::int64_t stride, std::int64_t pad, std::int64_t groups);

}  // namespace omnisr::verify
