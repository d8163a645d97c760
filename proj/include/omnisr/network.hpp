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

// Full model: shallow 3x3 conv, K stacked OSAGs, a 3x3 conv closing the deep
// branch, the long skip X_0 + X_DF, and a 3x3 conv + pixel-shuffle head.
//
// Parameter names (lexicographic order is the canonical order):
//   head.{w,b}              shallow feature extraction
//   osag.<i>.*              i-th aggregation group, see blocks.hpp
//   body_tail.{w,b}         conv closing the deep branch
//   recon.{w,b}             conv to 3 * scale^2 channels before shuffling

#include <cstdint>
#include <string>

#include "omnisr/blocks.hpp"

namespace omnisr {

enum class InitScheme {
  /// Weights per their declared initializer only.
  standard,
  /// standard, then the long skip is made an exact nearest-neighbour
  /// upsampler: the first in_channels shallow features copy the input, the
  /// reconstruction conv copies them to every sub-pixel and body_tail is
  /// zero. Training starts from a sensible image instead of noise.
  skip_dominant,
};

struct NetworkConfig {
  int osag_count = 5;
  int scale = 4;
  std::int64_t in_channels = 3;
  std::uint64_t seed = 0;
  InitScheme init = InitScheme::skip_dominant;
  BlockConfig block;

  bool operator==(const NetworkConfig&) const = default;

  void validate() const {
    if (osag_count < 1) throw ConfigError("network: OSAG count must be >= 1");
    if (scale < 2 || scale > 4) throw ConfigError("network: scale must be 2, 3 or 4");
    if (in_channels <= 0) throw ConfigError("network: in_channels must be positive");
    block.validate();
    if (init == InitScheme::skip_dominant && in_channels > block.channels) {
      throw ConfigError("network: skip_dominant init needs channels >= in_channels");
    }
  }
};

inline ParamLayout network_layout(const NetworkConfig& cfg) {
  cfg.validate();
  ParamLayout layout;
  const std::int64_t c = cfg.block.channels;
  layout.add_conv("head", cfg.in_channels, c, 3);
  for (int i = 0; i < cfg.osag_count; ++i) declare_osag(layout, "osag." + std::to_string(i), cfg.block);
  layout.add_conv("body_tail", c, c, 3);
  layout.add_conv("recon", c, cfg.in_channels * cfg.scale * cfg.scale, 3);
  return layout;
}

/// Exact number of trainable scalars.
inline std::int64_t count_params(const NetworkConfig& cfg) { return network_layout(cfg).total(); }

template <typename Scalar>
void apply_skip_dominant_init(ModelParams<Scalar>& params, const NetworkConfig& cfg) {
  const std::int64_t c = cfg.block.channels, cin = cfg.in_channels, r2 = cfg.scale * cfg.scale;
  auto& head = params.at("head.w");  // [C, cin, 3, 3]
  for (std::int64_t o = 0; o < cin; ++o) {
    for (std::int64_t i = 0; i < cin; ++i) {
      for (std::int64_t k = 0; k < 9; ++k) head[((o * cin + i) * 9) + k] = Scalar(0);
    }
    head[((o * cin + o) * 9) + 4] = Scalar(1);
    params.at("head.b")[o] = Scalar(0);
  }
  for (auto& v : params.at("body_tail.w").values()) v = Scalar(0);
  auto& recon = params.at("recon.w");  // [cin*r2, C, 3, 3]
  for (auto& v : recon.values()) v = Scalar(0);
  for (std::int64_t ch = 0; ch < cin; ++ch) {
    for (std::int64_t s = 0; s < r2; ++s) recon[(((ch * r2 + s) * c + ch) * 9) + 4] = Scalar(1);
  }
}

template <typename Scalar>
ModelParams<Scalar> init_params(const NetworkConfig& cfg) {
  auto params = materialize<Scalar>(network_layout(cfg), cfg.seed);
  if (cfg.init == InitScheme::skip_dominant) apply_skip_dominant_init(params, cfg);
  return params;
}

/// I_HR = Rec(X_0 + Conv(OSAG_K(...OSAG_1(X_0)))), X_0 = Conv(I_LR).
/// Input [B, in_channels, H, W]; output [B, in_channels, scale*H, scale*W].
template <typename Scalar>
Tensor<Scalar> forward(const Tensor<Scalar>& lr, const ModelParams<Scalar>& params, const NetworkConfig& cfg) {
  if (lr.rank() != 4 || lr.dim(1) != cfg.in_channels) {
    throw ShapeError("network input must be [B," + std::to_string(cfg.in_channels) + ",H,W], got " +
                     to_string(lr.shape()));
  }
  const ParamScope<Scalar> root(params, "");
  auto x0 = detail::conv(lr, root.sub("head"), 1);
  Tensor<Scalar> t = x0;
  for (int i = 0; i < cfg.osag_count; ++i) t = osag_forward(t, root.sub("osag." + std::to_string(i)), cfg.block);
  auto fused = add(x0, detail::conv(t, root.sub("body_tail"), 1));
  return pixel_shuffle(detail::conv(fused, root.sub("recon"), 1), cfg.scale);
}

// ------------------------------------------------------------ FLOP counting

/// Multiply-accumulates of one forward pass on a [1, in_channels, H, W]
/// input: every convolution and matrix product, attention included,
/// evaluated on the window-padded extents the forward pass actually uses.
/// Element-wise work (activations, normalization, softmax, pooling,
/// resizing) is not counted.
inline std::uint64_t count_macs(const NetworkConfig& cfg, std::int64_t h, std::int64_t w) {
  cfg.validate();
  const auto& b = cfg.block;
  const std::int64_t c = b.channels;
  auto conv_cost = [](std::int64_t oh, std::int64_t ow, std::int64_t cout, std::int64_t cin_per_group,
                      std::int64_t k) { return oh * ow * cout * cin_per_group * k * k; };
  std::int64_t total = conv_cost(h, w, c, cfg.in_channels, 3);

  std::int64_t osag = 0;
  const std::int64_t e = b.lcb_hidden(), se = b.se_hidden();
  osag += b.lcb_depth * (conv_cost(h, w, e, c, 1) + conv_cost(h, w, e, 1, 3) + se * e + e * se +
                         conv_cost(h, w, c, e, 1));

  const std::int64_t hp = round_up(h, b.window), wp = round_up(w, b.window);
  const std::int64_t tokens = hp * wp, n = b.window * b.window, d = c / b.heads;
  std::int64_t attn = 4 * tokens * c * c;  // q, k, v, out projections
  switch (b.attention) {
    case AttentionKind::omni:
      attn += 2 * tokens * n * c + 2 * tokens * c * d;
      if (b.channel_inputs == ChannelInputs::embed) attn += 3 * tokens * c * c;
      break;
    case AttentionKind::spatial_only:
      attn += 2 * tokens * n * c;
      break;
    case AttentionKind::channel_only:
      attn += 2 * tokens * c * d;
      break;
    case AttentionKind::se_hybrid: {
      const std::int64_t r = std::max<std::int64_t>(1, c / b.se_reduction);
      attn += 2 * tokens * n * c + (tokens / n) * 2 * c * r;
      break;
    }
  }
  const std::int64_t f = b.ffn_hidden();
  const std::int64_t ffn = conv_cost(hp, wp, 2 * f, c, 1) + conv_cost(hp, wp, 2 * f, 1, 3) + conv_cost(hp, wp, c, f, 1);
  osag += 2 * (attn + ffn);
  osag += conv_cost(h, w, c, c, 3);

  const std::int64_t fe = b.esa_channels();
  const std::int64_t dh = (h - 3) / 2 + 1, dw = (w - 3) / 2 + 1;
  const bool pooled = dh >= 7 && dw >= 7;
  const std::int64_t ph = pooled ? (dh - 7) / 3 + 1 : 1, pw = pooled ? (dw - 7) / 3 + 1 : 1;
  osag += conv_cost(h, w, fe, c, 1) + conv_cost(dh, dw, fe, fe, 3) + 3 * conv_cost(ph, pw, fe, fe, 3) +
          conv_cost(h, w, fe, fe, 1) + conv_cost(h, w, c, fe, 1);

  total += cfg.osag_count * osag;
  total += conv_cost(h, w, c, c, 3);
  total += conv_cost(h, w, cfg.in_channels * cfg.scale * cfg.scale, c, 3);
  return static_cast<std::uint64_t>(total);
}

/// FLOPs reported for an output resolution, as multiply-accumulates of the
/// forward pass at input (out_w / scale) x (out_h / scale).
inline std::uint64_t count_flops(const NetworkConfig& cfg, std::int64_t out_w, std::int64_t out_h) {
  return count_macs(cfg, out_h / cfg.scale, out_w / cfg.scale);
}

}  // namespace omnisr
