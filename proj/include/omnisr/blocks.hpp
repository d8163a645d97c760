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

// Building blocks of an omni-scale aggregation group (OSAG):
//
//   LCB        pointwise expand -> depthwise 3x3 -> SE gate -> pointwise
//              project, with a residual connection (local aggregation)
//   OSA block  x + OSA(LN(x)) inside windows, then y + GDFN(LN(y));
//              meso mode uses P x P blocks, global mode a dilated G x G grid
//   ESA        strided, pooled spatial mask refining the group output
//
// Each block has a declare_* function that registers its parameters in a
// ParamLayout and a *_forward function that reads them from a ParamScope.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "omnisr/attention.hpp"
#include "omnisr/conv.hpp"
#include "omnisr/params.hpp"

namespace omnisr {

struct BlockConfig {
  std::int64_t channels = 64;
  int heads = 4;
  std::int64_t window = 8;  // P for meso blocks and G for global blocks
  double ffn_expansion = 0.5;
  double lcb_expansion = 1.25;
  std::int64_t esa_reduction = 2;
  std::int64_t se_reduction = 2;
  int lcb_depth = 1;
  AttentionKind attention = AttentionKind::omni;
  ChannelInputs channel_inputs = ChannelInputs::copy;
  std::int64_t ffn_hidden_override = 0;  // > 0 replaces channels * ffn_expansion

  bool operator==(const BlockConfig&) const = default;

  std::int64_t ffn_hidden() const {
    if (ffn_hidden_override > 0) return ffn_hidden_override;
    return std::max<std::int64_t>(1, std::llround(static_cast<double>(channels) * ffn_expansion));
  }
  std::int64_t lcb_hidden() const {
    return std::max<std::int64_t>(1, std::llround(static_cast<double>(channels) * lcb_expansion));
  }
  std::int64_t se_hidden() const { return std::max<std::int64_t>(1, lcb_hidden() / se_reduction); }
  std::int64_t esa_channels() const { return channels / esa_reduction; }

  void validate() const {
    if (channels <= 0 || heads <= 0 || window <= 0 || lcb_depth <= 0) {
      throw ConfigError("block config: channels, heads, window and lcb depth must be positive");
    }
    if (channels % heads != 0) {
      throw ConfigError("block config: channels " + std::to_string(channels) + " not divisible by heads " +
                        std::to_string(heads));
    }
    if (!(ffn_expansion > 0) || !(lcb_expansion > 0) || se_reduction <= 0 || esa_reduction <= 0) {
      throw ConfigError("block config: expansions and reductions must be positive");
    }
    if (channels % esa_reduction != 0) {
      throw ConfigError("block config: esa_reduction " + std::to_string(esa_reduction) +
                        " does not divide channels " + std::to_string(channels));
    }
  }
};

// ------------------------------------------------------------- declarations

inline void declare_se(ParamLayout& layout, const std::string& prefix, std::int64_t channels,
                       std::int64_t hidden) {
  layout.add_conv(prefix + ".reduce", channels, hidden, 1);
  layout.add_conv(prefix + ".expand", hidden, channels, 1);
}

inline void declare_lcb(ParamLayout& layout, const std::string& prefix, const BlockConfig& cfg) {
  const std::int64_t c = cfg.channels, e = cfg.lcb_hidden();
  for (int j = 0; j < cfg.lcb_depth; ++j) {
    const std::string unit = prefix + "." + std::to_string(j);
    layout.add_conv(unit + ".expand", c, e, 1);
    layout.add_conv(unit + ".dw", e, e, 3, e);
    declare_se(layout, unit + ".se", e, cfg.se_hidden());
    layout.add_conv(unit + ".project", e, c, 1);
  }
}

inline void declare_attention(ParamLayout& layout, const std::string& prefix, const BlockConfig& cfg) {
  const std::int64_t c = cfg.channels;
  layout.add_linear(prefix, c, c, "wq", "bq");
  layout.add_linear(prefix, c, c, "wk", "bk");
  layout.add_linear(prefix, c, c, "wv", "bv");
  layout.add_linear(prefix, c, c, "wout", "bout");
  const bool channel_stage = cfg.attention == AttentionKind::omni || cfg.attention == AttentionKind::channel_only;
  if (channel_stage) layout.add(prefix + ".log_tau", Shape{cfg.heads}, Init::zeros);
  if (cfg.attention == AttentionKind::omni && cfg.channel_inputs == ChannelInputs::embed) {
    layout.add_linear(prefix, c, c, "wq2", "bq2");
    layout.add_linear(prefix, c, c, "wk2", "bk2");
    layout.add_linear(prefix, c, c, "wv2", "bv2");
  }
  if (cfg.attention == AttentionKind::se_hybrid) {
    const std::int64_t r = std::max<std::int64_t>(1, c / cfg.se_reduction);
    layout.add_linear(prefix, c, r, "se_w1", "se_b1");
    layout.add_linear(prefix, r, c, "se_w2", "se_b2");
  }
}

inline void declare_gdfn(ParamLayout& layout, const std::string& prefix, const BlockConfig& cfg) {
  const std::int64_t c = cfg.channels, f = cfg.ffn_hidden();
  layout.add_conv(prefix + ".project_in", c, 2 * f, 1);
  layout.add_conv(prefix + ".dw", 2 * f, 2 * f, 3, 2 * f);
  layout.add_conv(prefix + ".project_out", f, c, 1);
}

inline void declare_osa_block(ParamLayout& layout, const std::string& prefix, const BlockConfig& cfg) {
  layout.add_norm(prefix + ".norm1", cfg.channels);
  declare_attention(layout, prefix + ".attn", cfg);
  layout.add_norm(prefix + ".norm2", cfg.channels);
  declare_gdfn(layout, prefix + ".ffn", cfg);
}

inline void declare_esa(ParamLayout& layout, const std::string& prefix, const BlockConfig& cfg) {
  const std::int64_t c = cfg.channels, f = cfg.esa_channels();
  layout.add_conv(prefix + ".reduce", c, f, 1);
  layout.add_conv(prefix + ".skip", f, f, 1);
  layout.add_conv(prefix + ".down", f, f, 3);
  for (int j = 0; j < 3; ++j) layout.add_conv(prefix + ".group." + std::to_string(j), f, f, 3);
  layout.add_conv(prefix + ".expand", f, c, 1);
}

inline void declare_osag(ParamLayout& layout, const std::string& prefix, const BlockConfig& cfg) {
  cfg.validate();
  declare_lcb(layout, prefix + ".lcb", cfg);
  declare_osa_block(layout, prefix + ".meso", cfg);
  declare_osa_block(layout, prefix + ".global", cfg);
  layout.add_conv(prefix + ".conv", cfg.channels, cfg.channels, 3);
  declare_esa(layout, prefix + ".esa", cfg);
}

// ------------------------------------------------------------------ forward

namespace detail {
template <typename Scalar>
Tensor<Scalar> conv(const Tensor<Scalar>& x, const ParamScope<Scalar>& s, int padding = 0, int stride = 1,
                    int groups = 1) {
  return conv2d(x, s["w"], s["b"], Conv2dOptions{stride, padding, groups});
}
}  // namespace detail

/// Squeeze-and-excitation: pool -> 1x1 reduce -> ReLU -> 1x1 expand ->
/// sigmoid -> per-channel scale of x.
template <typename Scalar>
Tensor<Scalar> se_attention(const Tensor<Scalar>& x, const ParamScope<Scalar>& p) {
  auto s = detail::conv(mean_spatial(x), p.sub("reduce"));
  s = sigmoid(detail::conv(relu(s), p.sub("expand")));
  return mul(x, s);
}

template <typename Scalar>
Tensor<Scalar> lcb_forward(const Tensor<Scalar>& x, const ParamScope<Scalar>& p, const BlockConfig& cfg) {
  Tensor<Scalar> y = x;
  for (int j = 0; j < cfg.lcb_depth; ++j) {
    const auto unit = p.sub(std::to_string(j));
    auto u = gelu(detail::conv(y, unit.sub("expand")));
    const auto e = u.dim(1);
    u = gelu(detail::conv(u, unit.sub("dw"), 1, 1, static_cast<int>(e)));
    u = se_attention(u, unit.sub("se"));
    y = add(y, detail::conv(u, unit.sub("project")));
  }
  return y;
}

/// Gated depthwise feed-forward: GELU(branch1) * branch2, projected back.
template <typename Scalar>
Tensor<Scalar> gdfn_forward(const Tensor<Scalar>& x, const ParamScope<Scalar>& p) {
  auto t = detail::conv(x, p.sub("project_in"));
  const auto two_f = t.dim(1);
  t = detail::conv(t, p.sub("dw"), 1, 1, static_cast<int>(two_f));
  auto gate = mul(gelu(slice(t, 1, 0, two_f / 2)), slice(t, 1, two_f / 2, two_f / 2));
  return detail::conv(gate, p.sub("project_out"));
}

template <typename Scalar>
AttentionParams<Scalar> attention_params(const ParamScope<Scalar>& p, const BlockConfig& cfg) {
  AttentionParams<Scalar> a;
  a.heads = cfg.heads;
  a.wq = p["wq"];
  a.bq = p["bq"];
  a.wk = p["wk"];
  a.bk = p["bk"];
  a.wv = p["wv"];
  a.bv = p["bv"];
  a.wout = p["wout"];
  a.bout = p["bout"];
  if (p.contains("log_tau")) a.log_tau = p["log_tau"];
  if (p.contains("wq2")) {
    a.wq2 = p["wq2"];
    a.bq2 = p["bq2"];
    a.wk2 = p["wk2"];
    a.bk2 = p["bk2"];
    a.wv2 = p["wv2"];
    a.bv2 = p["bv2"];
  }
  if (p.contains("se_w1")) {
    a.se_w1 = p["se_w1"];
    a.se_b1 = p["se_b1"];
    a.se_w2 = p["se_w2"];
    a.se_b2 = p["se_b2"];
  }
  return a;
}

/// Rounds `n` up to a multiple of `m`.
inline std::int64_t round_up(std::int64_t n, std::int64_t m) { return (n + m - 1) / m * m; }

/// Transformer-style block around omni self-attention. Pads H and W up to a
/// multiple of the window (reflect), runs y = x + OSA(LN(x)) per window and
/// y = y + GDFN(LN(y)) on the merged map, then crops the padding.
template <typename Scalar>
Tensor<Scalar> osa_block_forward(const Tensor<Scalar>& x, PartitionMode mode, const ParamScope<Scalar>& p,
                                 const BlockConfig& cfg) {
  if (x.rank() != 4) throw ShapeError("osa block expects [B,C,H,W], got " + to_string(x.shape()));
  const std::int64_t h = x.dim(2), w = x.dim(3);
  const WindowSpec spec{mode, cfg.window, cfg.window};
  auto xp = pad_reflect(x, round_up(h, cfg.window) - h, round_up(w, cfg.window) - w);
  auto t = permute(xp, {0, 2, 3, 1});
  const Shape bhwc = t.shape();
  auto win = partition(t, spec);
  const auto n1 = p.sub("norm1");
  auto attended = omni_self_attention(layernorm(win, n1["gamma"], n1["beta"]),
                                      attention_params(p.sub("attn"), cfg), cfg.attention, cfg.channel_inputs);
  t = merge(add(win, attended), bhwc, spec);
  const auto n2 = p.sub("norm2");
  auto u = permute(layernorm(t, n2["gamma"], n2["beta"]), {0, 3, 1, 2});
  auto y = add(permute(t, {0, 3, 1, 2}), gdfn_forward(u, p.sub("ffn")));
  return crop(y, h, w);
}

/// Enhanced spatial attention. When the strided map is smaller than the
/// 7x7 pooling window on either axis, pooling covers the whole map instead.
/// Inputs need H, W >= 3.
template <typename Scalar>
Tensor<Scalar> esa_forward(const Tensor<Scalar>& x, const ParamScope<Scalar>& p) {
  const std::int64_t h = x.dim(2), w = x.dim(3);
  auto reduced = detail::conv(x, p.sub("reduce"));
  auto down = detail::conv(reduced, p.sub("down"), 0, 2);
  const std::int64_t dh = down.dim(2), dw = down.dim(3);
  auto v = (dh >= 7 && dw >= 7) ? max_pool2d(down, 7, 7, 3) : max_pool2d(down, dh, dw, 1);
  v = relu(detail::conv(v, p.sub("group.0"), 1));
  v = relu(detail::conv(v, p.sub("group.1"), 1));
  v = detail::conv(v, p.sub("group.2"), 1);
  auto up = resize_bilinear(v, h, w);
  auto mask = sigmoid(detail::conv(add(up, detail::conv(reduced, p.sub("skip"))), p.sub("expand")));
  return mul(x, mask);
}

/// X_res = Global(Meso(LCB(X))); X_out = ESA(Conv(X_res + X)).
template <typename Scalar>
Tensor<Scalar> osag_forward(const Tensor<Scalar>& x, const ParamScope<Scalar>& p, const BlockConfig& cfg) {
  auto r = lcb_forward(x, p.sub("lcb"), cfg);
  r = osa_block_forward(r, PartitionMode::meso, p.sub("meso"), cfg);
  r = osa_block_forward(r, PartitionMode::global, p.sub("global"), cfg);
  auto s = detail::conv(add(r, x), p.sub("conv"), 1);
  return esa_forward(s, p.sub("esa"));
}

}  // namespace omnisr
