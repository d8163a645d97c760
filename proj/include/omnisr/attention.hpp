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

// Omni self-attention: a spatial (token x token) attention stage cascaded
// into a channel (channel x channel) attention stage, the latter obtained by
// rotating the token and channel axes. Also hosts the two window partition
// strategies that feed it: contiguous P x P blocks ("meso") and a dilated
// G x G grid ("global").

#include <cmath>
#include <cstdint>
#include <string>

#include "omnisr/conv.hpp"
#include "omnisr/ops.hpp"

namespace omnisr {

enum class PartitionMode { meso, global };

/// How windows are cut from a feature map. `window` is the block edge P in
/// meso mode, `grid` the lattice size G in global mode.
struct WindowSpec {
  PartitionMode mode = PartitionMode::meso;
  std::int64_t window = 8;
  std::int64_t grid = 8;

  std::int64_t extent() const { return mode == PartitionMode::meso ? window : grid; }
  std::int64_t tokens() const { return extent() * extent(); }
};

/// Which attention stages run inside the operator. `omni` is the full
/// cascade; the others are the reduced variants used for ablation.
enum class AttentionKind { omni, spatial_only, channel_only, se_hybrid };

/// Inputs of the channel stage: `copy` reuses the spatial query and key and
/// takes the spatial output as value; `embed` projects the spatial output
/// with three extra matrices.
enum class ChannelInputs { copy, embed };

/// Weights of one attention operator. Projections act on row vectors
/// (y = x W + b); all square matrices are C x C. `log_tau` holds one entry
/// per head and the channel-stage temperature is exp(log_tau).
template <typename Scalar>
struct AttentionParams {
  Tensor<Scalar> wq, bq, wk, bk, wv, bv, wout, bout;
  Tensor<Scalar> log_tau;
  // ChannelInputs::embed only.
  Tensor<Scalar> wq2, bq2, wk2, bk2, wv2, bv2;
  // AttentionKind::se_hybrid only.
  Tensor<Scalar> se_w1, se_b1, se_w2, se_b2;
  int heads = 1;
};

namespace detail {

inline Shape as_bhwc(const Shape& s) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  if (s.size() == 4) return s;
  throw ShapeError("window partition expects [H,W,C] or [B,H,W,C], got " + to_string(s));
}

inline void check_divisible(const Shape& bhwc, std::int64_t e, const char* what) {
  if (e <= 0 || bhwc[1] % e != 0 || bhwc[2] % e != 0) {
    throw PartitionError(std::string(what) + ": extents " + to_string(bhwc) +
                         " not divisible by " + std::to_string(e));
  }
}

}  // namespace detail

/// (H, W, C) -> (H/P x P, W/P x P, C) -> (HW/P^2, P^2, C). A leading batch
/// axis folds into the window axis. Window index is row-major over blocks.
template <typename Scalar>
Tensor<Scalar> meso_partition(const Tensor<Scalar>& x, std::int64_t p) {
  const Shape s = detail::as_bhwc(x.shape());
  detail::check_divisible(s, p, "meso_partition");
  const std::int64_t b = s[0], h = s[1], w = s[2], c = s[3];
  auto t = reshape(x, Shape{b, h / p, p, w / p, p, c});
  t = permute(t, {0, 1, 3, 2, 4, 5});
  return reshape(t, Shape{b * (h / p) * (w / p), p * p, c});
}

/// Inverse of meso_partition; `original` is the unpartitioned shape.
template <typename Scalar>
Tensor<Scalar> meso_merge(const Tensor<Scalar>& windows, const Shape& original, std::int64_t p) {
  const Shape s = detail::as_bhwc(original);
  detail::check_divisible(s, p, "meso_merge");
  const std::int64_t b = s[0], h = s[1], w = s[2], c = s[3];
  auto t = reshape(windows, Shape{b, h / p, w / p, p, p, c});
  t = permute(t, {0, 1, 3, 2, 4, 5});
  return reshape(t, original);
}

/// (H, W, C) -> (G x H/G, G x W/G, C) -> (G^2, HW/G^2, C) -> (HW/G^2, G^2, C).
/// Window (i, j) collects positions (g1 * H/G + i, g2 * W/G + j): one sample
/// per grid cell at a common intra-cell offset.
template <typename Scalar>
Tensor<Scalar> global_partition(const Tensor<Scalar>& x, std::int64_t g) {
  const Shape s = detail::as_bhwc(x.shape());
  detail::check_divisible(s, g, "global_partition");
  const std::int64_t b = s[0], h = s[1], w = s[2], c = s[3];
  auto t = reshape(x, Shape{b, g, h / g, g, w / g, c});
  t = permute(t, {0, 2, 4, 1, 3, 5});
  return reshape(t, Shape{b * (h / g) * (w / g), g * g, c});
}

template <typename Scalar>
Tensor<Scalar> global_merge(const Tensor<Scalar>& windows, const Shape& original, std::int64_t g) {
  const Shape s = detail::as_bhwc(original);
  detail::check_divisible(s, g, "global_merge");
  const std::int64_t b = s[0], h = s[1], w = s[2], c = s[3];
  auto t = reshape(windows, Shape{b, h / g, w / g, g, g, c});
  t = permute(t, {0, 3, 1, 4, 2, 5});
  return reshape(t, original);
}

template <typename Scalar>
Tensor<Scalar> partition(const Tensor<Scalar>& x, const WindowSpec& spec) {
  return spec.mode == PartitionMode::meso ? meso_partition(x, spec.window) : global_partition(x, spec.grid);
}

template <typename Scalar>
Tensor<Scalar> merge(const Tensor<Scalar>& windows, const Shape& original, const WindowSpec& spec) {
  return spec.mode == PartitionMode::meso ? meso_merge(windows, original, spec.window)
                                          : global_merge(windows, original, spec.grid);
}

/// x W + b over the last axis.
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b) {
  auto y = matmul(x, w);
  return b.defined() ? add(y, b) : y;
}

namespace detail {

inline void check_heads(const Shape& s, int heads, const char* what) {
  if (s.size() != 3) throw ShapeError(std::string(what) + " expects [B,N,C], got " + to_string(s));
  if (heads <= 0 || s[2] % heads != 0) {
    throw ConfigError(std::string(what) + ": " + std::to_string(s[2]) + " channels not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

/// [B,N,C] -> [B,heads,N,C/heads]
template <typename Scalar>
Tensor<Scalar> split_heads(const Tensor<Scalar>& x, int heads) {
  const std::int64_t b = x.dim(0), n = x.dim(1), c = x.dim(2);
  return permute(reshape(x, Shape{b, n, heads, c / heads}), {0, 2, 1, 3});
}

template <typename Scalar>
Tensor<Scalar> join_heads(const Tensor<Scalar>& x) {
  const std::int64_t b = x.dim(0), h = x.dim(1), n = x.dim(2), d = x.dim(3);
  return reshape(permute(x, {0, 2, 1, 3}), Shape{b, n, h * d});
}

/// Mean over the token axis: [B,N,C] -> [B,1,C].
template <typename Scalar>
Tensor<Scalar> mean_tokens(const Tensor<Scalar>& x) {
  const std::int64_t b = x.dim(0), n = x.dim(1), c = x.dim(2);
  auto t = reshape(rotate(x), Shape{b, c, n, 1});
  return reshape(mean_spatial(t), Shape{b, 1, c});
}

}  // namespace detail

/// Multi-head spatial self-attention: SoftMax(Q K^T / sqrt(d)) V per head,
/// d = C / heads. The attention map of each head is N x N.
template <typename Scalar>
Tensor<Scalar> spatial_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                                 int heads) {
  detail::check_heads(q.shape(), heads, "spatial_attention");
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    throw ShapeError("spatial_attention: q " + to_string(q.shape()) + ", k " + to_string(k.shape()) +
                     ", v " + to_string(v.shape()) + " must match");
  }
  const auto d = static_cast<Scalar>(q.dim(2) / heads);
  auto qh = detail::split_heads(q, heads);
  auto kh = detail::split_heads(k, heads);
  auto vh = detail::split_heads(v, heads);
  auto logits = scale(matmul_nt(qh, kh), Scalar(1) / std::sqrt(d));
  auto attn = softmax_lastdim(logits);
  return detail::join_heads(matmul(attn, vh));
}

/// Channel self-attention on rotated inputs. Per head, with Q^c, K^c, V^c
/// the [d, N] rotated slices: SoftMax(K^c Q^cT / tau) V^c, where the rows of
/// K^c and Q^c are L2-normalized and tau = exp(log_tau[head]). The map of
/// each head is d x d. The result is rotated back to [B,N,C].
template <typename Scalar>
Tensor<Scalar> channel_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                                 int heads, const Tensor<Scalar>& log_tau) {
  detail::check_heads(q.shape(), heads, "channel_attention");
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    throw ShapeError("channel_attention: q " + to_string(q.shape()) + ", k " + to_string(k.shape()) +
                     ", v " + to_string(v.shape()) + " must match");
  }
  if (log_tau.numel() != heads) {
    throw ShapeError("channel_attention: temperature " + to_string(log_tau.shape()) + " for " +
                     std::to_string(heads) + " heads");
  }
  const std::int64_t b = q.dim(0), n = q.dim(1), c = q.dim(2), d = c / heads;
  auto to_heads = [&](const Tensor<Scalar>& t) { return reshape(rotate(t), Shape{b, heads, d, n}); };
  auto qc = l2_normalize_lastdim(to_heads(q));
  auto kc = l2_normalize_lastdim(to_heads(k));
  auto vc = to_heads(v);
  auto inv_tau = exp(scale(reshape(log_tau, Shape{1, heads, 1, 1}), Scalar(-1)));
  auto attn = softmax_lastdim(mul(matmul_nt(kc, qc), inv_tau));
  auto yc = reshape(matmul(attn, vc), Shape{b, c, n});
  return rotate_inverse(yc);
}

/// Omni self-attention on windowed tokens x [B,N,C]: project to Q, K, V;
/// spatial stage; channel stage on (Q, K, Y_s) per `inputs`; output
/// projection. `kind` selects the reduced ablation variants.
template <typename Scalar>
Tensor<Scalar> omni_self_attention(const Tensor<Scalar>& x, const AttentionParams<Scalar>& p,
                                   AttentionKind kind = AttentionKind::omni,
                                   ChannelInputs inputs = ChannelInputs::copy) {
  detail::check_heads(x.shape(), p.heads, "omni_self_attention");
  auto q = linear(x, p.wq, p.bq);
  auto k = linear(x, p.wk, p.bk);
  auto v = linear(x, p.wv, p.bv);
  Tensor<Scalar> y;
  switch (kind) {
    case AttentionKind::omni: {
      auto ys = spatial_attention(q, k, v, p.heads);
      if (inputs == ChannelInputs::copy) {
        y = channel_attention(q, k, ys, p.heads, p.log_tau);
      } else {
        y = channel_attention(linear(ys, p.wq2, p.bq2), linear(ys, p.wk2, p.bk2), linear(ys, p.wv2, p.bv2),
                              p.heads, p.log_tau);
      }
      break;
    }
    case AttentionKind::spatial_only:
      y = spatial_attention(q, k, v, p.heads);
      break;
    case AttentionKind::channel_only:
      y = channel_attention(q, k, v, p.heads, p.log_tau);
      break;
    case AttentionKind::se_hybrid: {
      auto ys = spatial_attention(q, k, v, p.heads);
      auto pooled = detail::mean_tokens(ys);
      auto gate = sigmoid(linear(relu(linear(pooled, p.se_w1, p.se_b1)), p.se_w2, p.se_b2));
      y = mul(ys, gate);
      break;
    }
  }
  return linear(y, p.wout, p.bout);
}

}  // namespace omnisr
