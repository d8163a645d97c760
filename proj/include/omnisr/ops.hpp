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

// Differentiable tensor primitives: broadcasting arithmetic, activations,
// reductions, layout changes, matrix products, softmax and normalization.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "omnisr/flop_counter.hpp"
#include "omnisr/tensor.hpp"

namespace omnisr {

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const RowMatrix<Scalar>>;

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shapes " + to_string(a) + " and " + to_string(b) +
                       " are not broadcast-compatible");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

/// Row-major strides of `shape` aligned to `out`, zero on broadcast axes.
inline std::vector<std::int64_t> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<std::int64_t> strides(out.size(), 0);
  std::int64_t s = 1;
  const std::size_t off = out.size() - shape.size();
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[i + off] = shape[i] == 1 ? 0 : s;
    s *= shape[i];
  }
  return strides;
}

/// Calls f(out_index, a_offset, b_offset) for every element of `out`.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, F&& f) {
  const std::size_t r = out.size();
  const std::int64_t n = numel_of(out);
  if (r == 0) {
    f(std::int64_t{0}, std::int64_t{0}, std::int64_t{0});
    return;
  }
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t ia = 0, ib = 0;
  const std::int64_t inner = out[r - 1];
  const std::int64_t ia_step = sa[r - 1], ib_step = sb[r - 1];
  for (std::int64_t i = 0; i < n; i += inner) {
    std::int64_t a = ia, b = ib;
    for (std::int64_t k = 0; k < inner; ++k, a += ia_step, b += ib_step) f(i + k, a, b);
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

template <typename Scalar, typename Fwd, typename DA, typename DB>
Tensor<Scalar> binary_op(const Tensor<Scalar>& a, const Tensor<Scalar>& b, Fwd fwd, DA da, DB db) {
  if (a.shape() == b.shape()) {
    Tensor<Scalar> out(a.shape());
    const Scalar* pa = a.data();
    const Scalar* pb = b.data();
    Scalar* po = out.data();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
    if (auto* tape = recording<Scalar>(a, b)) {
      out.set_requires_grad();
      tape->record([an = a.node(), bn = b.node(), on = out.node(), da, db] {
        if (on->grad.empty()) return;
        const auto& g = on->grad;
        const std::size_t m = g.size();
        if (an->requires_grad) {
          auto& ga = an->grad_buffer();
          for (std::size_t i = 0; i < m; ++i) ga[i] += g[i] * da(an->value[i], bn->value[i]);
        }
        if (bn->requires_grad) {
          auto& gb = bn->grad_buffer();
          for (std::size_t i = 0; i < m; ++i) gb[i] += g[i] * db(an->value[i], bn->value[i]);
        }
      });
    }
    return out;
  }
  const Shape shape = broadcast_shape(a.shape(), b.shape());
  const auto sa = broadcast_strides(a.shape(), shape);
  const auto sb = broadcast_strides(b.shape(), shape);
  Tensor<Scalar> out(shape);
  {
    const Scalar* pa = a.data();
    const Scalar* pb = b.data();
    Scalar* po = out.data();
    for_each_broadcast(shape, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      po[i] = fwd(pa[ia], pb[ib]);
    });
  }
  if (auto* tape = recording<Scalar>(a, b)) {
    out.set_requires_grad();
    tape->record([an = a.node(), bn = b.node(), on = out.node(), shape, sa, sb, da, db] {
      if (on->grad.empty()) return;
      const auto& g = on->grad;
      const Scalar* pa = an->value.data();
      const Scalar* pb = bn->value.data();
      Scalar* ga = an->requires_grad ? an->grad_buffer().data() : nullptr;
      Scalar* gb = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
      for_each_broadcast(shape, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
        if (ga) ga[ia] += g[static_cast<std::size_t>(i)] * da(pa[ia], pb[ib]);
        if (gb) gb[ib] += g[static_cast<std::size_t>(i)] * db(pa[ia], pb[ib]);
      });
    });
  }
  return out;
}

/// y = f(x) elementwise with derivative df(x, y).
template <typename Scalar, typename Fwd, typename Deriv>
Tensor<Scalar> unary_op(const Tensor<Scalar>& x, Fwd fwd, Deriv deriv) {
  Tensor<Scalar> out(x.shape());
  const Scalar* px = x.data();
  Scalar* po = out.data();
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
  if (auto* tape = recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), deriv] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      const auto& g = on->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xn->value[i], on->value[i]);
    });
  }
  return out;
}

inline std::vector<std::int64_t> row_major_strides(const Shape& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------- arithmetic

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary_op(
      a, b, [](Scalar x, Scalar y) { return x + y; }, [](Scalar, Scalar) { return Scalar(1); },
      [](Scalar, Scalar) { return Scalar(1); });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary_op(
      a, b, [](Scalar x, Scalar y) { return x - y; }, [](Scalar, Scalar) { return Scalar(1); },
      [](Scalar, Scalar) { return Scalar(-1); });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::binary_op(
      a, b, [](Scalar x, Scalar y) { return x * y; }, [](Scalar, Scalar y) { return y; },
      [](Scalar x, Scalar) { return x; });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar s) {
  return detail::unary_op(
      x, [s](Scalar v) { return v * s; }, [s](Scalar, Scalar) { return s; });
}

template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& x, Scalar s) {
  return detail::unary_op(
      x, [s](Scalar v) { return v + s; }, [](Scalar, Scalar) { return Scalar(1); });
}

// --------------------------------------------------------------- activations

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return detail::unary_op(
      x, [](Scalar v) { return v > Scalar(0) ? v : Scalar(0); },
      [](Scalar v, Scalar) { return v > Scalar(0) ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  return detail::unary_op(
      x, [](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); },
      [](Scalar, Scalar y) { return y * (Scalar(1) - y); });
}

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& x) {
  return detail::unary_op(
      x, [](Scalar v) { return std::exp(v); }, [](Scalar, Scalar y) { return y; });
}

/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) {
  constexpr Scalar kAlpha = Scalar(0.7978845608028654);  // sqrt(2/pi)
  constexpr Scalar kBeta = Scalar(0.044715);
  return detail::unary_op(
      x,
      [](Scalar v) {
        return Scalar(0.5) * v * (Scalar(1) + std::tanh(kAlpha * (v + kBeta * v * v * v)));
      },
      [](Scalar v, Scalar) {
        const Scalar t = std::tanh(kAlpha * (v + kBeta * v * v * v));
        return Scalar(0.5) * (Scalar(1) + t) +
               Scalar(0.5) * v * (Scalar(1) - t * t) * kAlpha * (Scalar(1) + Scalar(3) * kBeta * v * v);
      });
}

// ---------------------------------------------------------------- reductions

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  Scalar acc = 0;
  for (Scalar v : x.values()) acc += v;
  Tensor<Scalar> out = Tensor<Scalar>::scalar(acc);
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node()] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      const Scalar g = on->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(x.numel()));
}

/// Mean over the two trailing (spatial) axes: [B,C,H,W] -> [B,C,1,1].
template <typename Scalar>
Tensor<Scalar> mean_spatial(const Tensor<Scalar>& x) {
  if (x.rank() != 4) throw ShapeError("mean_spatial expects [B,C,H,W], got " + to_string(x.shape()));
  const std::int64_t planes = x.dim(0) * x.dim(1);
  const std::int64_t hw = x.dim(2) * x.dim(3);
  Tensor<Scalar> out(Shape{x.dim(0), x.dim(1), 1, 1});
  for (std::int64_t p = 0; p < planes; ++p) {
    Scalar acc = 0;
    const Scalar* src = x.data() + p * hw;
    for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
    out[p] = acc / static_cast<Scalar>(hw);
  }
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), planes, hw] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      for (std::int64_t p = 0; p < planes; ++p) {
        const Scalar g = on->grad[static_cast<std::size_t>(p)] / static_cast<Scalar>(hw);
        for (std::int64_t i = 0; i < hw; ++i) gx[static_cast<std::size_t>(p * hw + i)] += g;
      }
    });
  }
  return out;
}

// ------------------------------------------------------------------- layout

/// Same elements under a new shape of equal size.
template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
  }
  Tensor<Scalar> out(std::move(shape), std::vector<Scalar>(x.values().begin(), x.values().end()));
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      detail::accumulate<Scalar>(*xn, on->grad);
    });
  }
  return out;
}

/// Reorders axes: output axis i is input axis `axes[i]`.
template <typename Scalar>
Tensor<Scalar> permute(const Tensor<Scalar>& x, const std::vector<int>& axes) {
  const int r = x.rank();
  if (static_cast<int>(axes.size()) != r) {
    throw ShapeError("permute: " + std::to_string(axes.size()) + " axes for shape " +
                     to_string(x.shape()));
  }
  std::vector<bool> seen(static_cast<std::size_t>(r), false);
  Shape shape(static_cast<std::size_t>(r));
  const auto in_strides = detail::row_major_strides(x.shape());
  std::vector<std::int64_t> gather_strides(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const int a = axes[static_cast<std::size_t>(i)];
    if (a < 0 || a >= r || seen[static_cast<std::size_t>(a)]) {
      throw ShapeError("permute: invalid axis list for shape " + to_string(x.shape()));
    }
    seen[static_cast<std::size_t>(a)] = true;
    shape[static_cast<std::size_t>(i)] = x.dim(a);
    gather_strides[static_cast<std::size_t>(i)] = in_strides[static_cast<std::size_t>(a)];
  }
  Tensor<Scalar> out(shape);
  const std::vector<std::int64_t> zero(static_cast<std::size_t>(r), 0);
  {
    const Scalar* src = x.data();
    Scalar* dst = out.data();
    detail::for_each_broadcast(shape, gather_strides, zero,
                               [&](std::int64_t i, std::int64_t s, std::int64_t) { dst[i] = src[s]; });
  }
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), shape, gather_strides, zero] {
      if (on->grad.empty() || !xn->requires_grad) return;
      Scalar* gx = xn->grad_buffer().data();
      const Scalar* g = on->grad.data();
      detail::for_each_broadcast(shape, gather_strides, zero,
                                 [&](std::int64_t i, std::int64_t s, std::int64_t) { gx[s] += g[i]; });
    });
  }
  return out;
}

/// Contiguous range [start, start+length) along `axis`.
template <typename Scalar>
Tensor<Scalar> slice(const Tensor<Scalar>& x, int axis, std::int64_t start, std::int64_t length) {
  if (axis < 0) axis += x.rank();
  if (axis < 0 || axis >= x.rank() || start < 0 || length <= 0 || start + length > x.dim(axis)) {
    throw ShapeError("slice out of range on shape " + to_string(x.shape()));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::int64_t extent = x.dim(axis);
  Shape shape = x.shape();
  shape[static_cast<std::size_t>(axis)] = length;
  Tensor<Scalar> out(shape);
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(x.data() + (o * extent + start) * inner, length * inner, out.data() + o * length * inner);
  }
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), outer, inner, extent, start, length] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      for (std::int64_t o = 0; o < outer; ++o) {
        Scalar* dst = gx.data() + (o * extent + start) * inner;
        const Scalar* src = on->grad.data() + o * length * inner;
        for (std::int64_t i = 0; i < length * inner; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

/// Swaps the two trailing axes of a rank-3 tensor: [B,S,C] -> [B,C,S].
/// This is the token/channel rotation used by channel self-attention.
template <typename Scalar>
Tensor<Scalar> rotate(const Tensor<Scalar>& x) {
  if (x.rank() != 3) throw ShapeError("rotate expects a rank-3 tensor, got " + to_string(x.shape()));
  return permute(x, {0, 2, 1});
}

/// Inverse of rotate: [B,C,S] -> [B,S,C].
template <typename Scalar>
Tensor<Scalar> rotate_inverse(const Tensor<Scalar>& x) {
  if (x.rank() != 3) {
    throw ShapeError("rotate_inverse expects a rank-3 tensor, got " + to_string(x.shape()));
  }
  return permute(x, {0, 2, 1});
}

/// Per-plane index remap on the two trailing axes: out[.., i] = x[.., map[i]].
/// Used by padding and cropping; the backward pass scatters.
template <typename Scalar>
Tensor<Scalar> remap_plane(const Tensor<Scalar>& x, std::int64_t out_h, std::int64_t out_w,
                           std::vector<std::int64_t> source) {
  if (x.rank() < 2) throw ShapeError("remap_plane needs rank >= 2, got " + to_string(x.shape()));
  const std::int64_t in_plane = x.dim(-2) * x.dim(-1);
  const std::int64_t out_plane = out_h * out_w;
  const std::int64_t planes = x.numel() / in_plane;
  Shape shape = x.shape();
  shape[shape.size() - 2] = out_h;
  shape[shape.size() - 1] = out_w;
  Tensor<Scalar> out(shape);
  for (std::int64_t p = 0; p < planes; ++p) {
    const Scalar* src = x.data() + p * in_plane;
    Scalar* dst = out.data() + p * out_plane;
    for (std::int64_t i = 0; i < out_plane; ++i) dst[i] = src[source[static_cast<std::size_t>(i)]];
  }
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), source = std::move(source), planes, in_plane, out_plane] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      for (std::int64_t p = 0; p < planes; ++p) {
        Scalar* dst = gx.data() + p * in_plane;
        const Scalar* src = on->grad.data() + p * out_plane;
        for (std::int64_t i = 0; i < out_plane; ++i) dst[source[static_cast<std::size_t>(i)]] += src[i];
      }
    });
  }
  return out;
}

/// Reflect-pads the bottom and right edges of the trailing two axes.
template <typename Scalar>
Tensor<Scalar> pad_reflect(const Tensor<Scalar>& x, std::int64_t pad_h, std::int64_t pad_w) {
  if (pad_h == 0 && pad_w == 0) return x;
  const std::int64_t h = x.dim(-2), w = x.dim(-1);
  auto reflect = [](std::int64_t i, std::int64_t n) {
    if (n == 1) return std::int64_t{0};
    const std::int64_t period = 2 * (n - 1);
    i %= period;
    return i < n ? i : period - i;
  };
  const std::int64_t oh = h + pad_h, ow = w + pad_w;
  std::vector<std::int64_t> source(static_cast<std::size_t>(oh * ow));
  for (std::int64_t i = 0; i < oh; ++i) {
    for (std::int64_t j = 0; j < ow; ++j) {
      source[static_cast<std::size_t>(i * ow + j)] = reflect(i, h) * w + reflect(j, w);
    }
  }
  return remap_plane(x, oh, ow, std::move(source));
}

/// Top-left crop of the trailing two axes.
template <typename Scalar>
Tensor<Scalar> crop(const Tensor<Scalar>& x, std::int64_t out_h, std::int64_t out_w) {
  const std::int64_t h = x.dim(-2), w = x.dim(-1);
  if (out_h == h && out_w == w) return x;
  if (out_h > h || out_w > w) {
    throw ShapeError("crop to (" + std::to_string(out_h) + ", " + std::to_string(out_w) +
                     ") exceeds shape " + to_string(x.shape()));
  }
  std::vector<std::int64_t> source(static_cast<std::size_t>(out_h * out_w));
  for (std::int64_t i = 0; i < out_h; ++i) {
    for (std::int64_t j = 0; j < out_w; ++j) source[static_cast<std::size_t>(i * out_w + j)] = i * w + j;
  }
  return remap_plane(x, out_h, out_w, std::move(source));
}

// ----------------------------------------------------------- matrix product

namespace detail {

template <typename Scalar>
Tensor<Scalar> matmul_impl(const Tensor<Scalar>& a, const Tensor<Scalar>& b, bool trans_b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const std::int64_t m = a.dim(-2), k = a.dim(-1);
  const std::int64_t kb = trans_b ? b.dim(-1) : b.dim(-2);
  const std::int64_t n = trans_b ? b.dim(-2) : b.dim(-1);
  if (k != kb) {
    throw ShapeError("matmul inner dimensions disagree: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()) + (trans_b ? "^T" : ""));
  }
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  try {
    batch = broadcast_shape(batch_a, batch_b);
  } catch (const ShapeError&) {
    throw ShapeError("matmul batch dimensions not broadcast-compatible: " + to_string(a.shape()) +
                     " x " + to_string(b.shape()));
  }
  // Fold a's batch into rows when b is a shared matrix.
  if (batch_b.empty() && !batch_a.empty()) {
    const std::int64_t rows = numel_of(batch_a) * m;
    Tensor<Scalar> out([&] {
      Shape s = batch_a;
      s.push_back(m);
      s.push_back(n);
      return s;
    }());
    count_macs(static_cast<std::uint64_t>(rows * n * k));
    ConstMatMap<Scalar> A(a.data(), rows, k);
    MatMap<Scalar> Y(out.data(), rows, n);
    if (trans_b) {
      Y.noalias() = A * ConstMatMap<Scalar>(b.data(), n, k).transpose();
    } else {
      Y.noalias() = A * ConstMatMap<Scalar>(b.data(), k, n);
    }
    if (auto* tape = recording<Scalar>(a, b)) {
      out.set_requires_grad();
      tape->record([an = a.node(), bn = b.node(), on = out.node(), rows, k, n, trans_b] {
        if (on->grad.empty()) return;
        ConstMatMap<Scalar> G(on->grad.data(), rows, n);
        ConstMatMap<Scalar> A(an->value.data(), rows, k);
        if (an->requires_grad) {
          MatMap<Scalar> GA(an->grad_buffer().data(), rows, k);
          if (trans_b) {
            GA.noalias() += G * ConstMatMap<Scalar>(bn->value.data(), n, k);
          } else {
            GA.noalias() += G * ConstMatMap<Scalar>(bn->value.data(), k, n).transpose();
          }
        }
        if (bn->requires_grad) {
          if (trans_b) {
            MatMap<Scalar>(bn->grad_buffer().data(), n, k).noalias() += G.transpose() * A;
          } else {
            MatMap<Scalar>(bn->grad_buffer().data(), k, n).noalias() += A.transpose() * G;
          }
        }
      });
    }
    return out;
  }

  Shape shape = batch;
  shape.push_back(m);
  shape.push_back(n);
  Tensor<Scalar> out(shape);
  const std::int64_t nb = numel_of(batch);
  const auto sa = broadcast_strides(batch_a, batch);
  const auto sb = broadcast_strides(batch_b, batch);
  std::vector<std::int64_t> off_a(static_cast<std::size_t>(nb)), off_b(static_cast<std::size_t>(nb));
  if (batch.empty()) {
    off_a[0] = off_b[0] = 0;
  } else {
    for_each_broadcast(batch, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      off_a[static_cast<std::size_t>(i)] = ia;
      off_b[static_cast<std::size_t>(i)] = ib;
    });
  }
  const std::int64_t size_a = m * k, size_b = k * n, size_y = m * n;
  count_macs(static_cast<std::uint64_t>(nb * m * n * k));
  for (std::int64_t i = 0; i < nb; ++i) {
    ConstMatMap<Scalar> A(a.data() + off_a[static_cast<std::size_t>(i)] * size_a, m, k);
    MatMap<Scalar> Y(out.data() + i * size_y, m, n);
    const Scalar* pb = b.data() + off_b[static_cast<std::size_t>(i)] * size_b;
    if (trans_b) {
      Y.noalias() = A * ConstMatMap<Scalar>(pb, n, k).transpose();
    } else {
      Y.noalias() = A * ConstMatMap<Scalar>(pb, k, n);
    }
  }
  if (auto* tape = recording<Scalar>(a, b)) {
    out.set_requires_grad();
    tape->record([an = a.node(), bn = b.node(), on = out.node(), off_a, off_b, nb, m, k, n, trans_b] {
      if (on->grad.empty()) return;
      const std::int64_t size_a = m * k, size_b = k * n, size_y = m * n;
      Scalar* ga = an->requires_grad ? an->grad_buffer().data() : nullptr;
      Scalar* gb = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
      for (std::int64_t i = 0; i < nb; ++i) {
        const std::int64_t oa = off_a[static_cast<std::size_t>(i)] * size_a;
        const std::int64_t ob = off_b[static_cast<std::size_t>(i)] * size_b;
        ConstMatMap<Scalar> G(on->grad.data() + i * size_y, m, n);
        ConstMatMap<Scalar> A(an->value.data() + oa, m, k);
        if (ga) {
          MatMap<Scalar> GA(ga + oa, m, k);
          if (trans_b) {
            GA.noalias() += G * ConstMatMap<Scalar>(bn->value.data() + ob, n, k);
          } else {
            GA.noalias() += G * ConstMatMap<Scalar>(bn->value.data() + ob, k, n).transpose();
          }
        }
        if (gb) {
          if (trans_b) {
            MatMap<Scalar>(gb + ob, n, k).noalias() += G.transpose() * A;
          } else {
            MatMap<Scalar>(gb + ob, k, n).noalias() += A.transpose() * G;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace detail

/// Batched matrix product [..,M,K] x [..,K,N] -> [..,M,N] with broadcast
/// batch axes. A rank-2 right operand is shared across the batch.
template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::matmul_impl(a, b, false);
}

/// a · bᵀ for b of shape [..,N,K].
template <typename Scalar>
Tensor<Scalar> matmul_nt(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return detail::matmul_impl(a, b, true);
}

// ------------------------------------------------------- rowwise operations

/// Softmax over the last axis with max subtraction.
template <typename Scalar>
Tensor<Scalar> softmax_lastdim(const Tensor<Scalar>& x) {
  const std::int64_t n = x.dim(-1);
  const std::int64_t rows = x.numel() / n;
  Tensor<Scalar> out(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const Scalar* src = x.data() + r * n;
    Scalar* dst = out.data() + r * n;
    const Scalar mx = *std::max_element(src, src + n);
    Scalar total = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      dst[i] = std::exp(src[i] - mx);
      total += dst[i];
    }
    const Scalar inv = Scalar(1) / total;
    for (std::int64_t i = 0; i < n; ++i) dst[i] *= inv;
  }
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), rows, n] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* y = on->value.data() + r * n;
        const Scalar* g = on->grad.data() + r * n;
        Scalar dot = 0;
        for (std::int64_t i = 0; i < n; ++i) dot += y[i] * g[i];
        Scalar* dst = gx.data() + r * n;
        for (std::int64_t i = 0; i < n; ++i) dst[i] += y[i] * (g[i] - dot);
      }
    });
  }
  return out;
}

/// LayerNorm over the last axis: gamma * (x - mean) / sqrt(var + eps) + beta.
template <typename Scalar>
Tensor<Scalar> layernorm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                         Scalar eps = Scalar(1e-6)) {
  const std::int64_t c = x.dim(-1);
  if (gamma.numel() != c || beta.numel() != c) {
    throw ShapeError("layernorm affine parameters " + to_string(gamma.shape()) + "/" +
                     to_string(beta.shape()) + " do not match input " + to_string(x.shape()));
  }
  const std::int64_t rows = x.numel() / c;
  Tensor<Scalar> out(x.shape());
  std::vector<Scalar> xhat(static_cast<std::size_t>(x.numel()));
  std::vector<Scalar> inv_std(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const Scalar* src = x.data() + r * c;
    Scalar mu = 0;
    for (std::int64_t i = 0; i < c; ++i) mu += src[i];
    mu /= static_cast<Scalar>(c);
    Scalar var = 0;
    for (std::int64_t i = 0; i < c; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<Scalar>(c);
    const Scalar is = Scalar(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    Scalar* xh = xhat.data() + r * c;
    Scalar* dst = out.data() + r * c;
    for (std::int64_t i = 0; i < c; ++i) {
      xh[i] = (src[i] - mu) * is;
      dst[i] = gamma[i] * xh[i] + beta[i];
    }
  }
  if (auto* tape = detail::recording<Scalar>(x, gamma, beta)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node(),
                  xhat = std::move(xhat), inv_std = std::move(inv_std), rows, c] {
      if (on->grad.empty()) return;
      Scalar* gx = xn->requires_grad ? xn->grad_buffer().data() : nullptr;
      Scalar* gg = gn->requires_grad ? gn->grad_buffer().data() : nullptr;
      Scalar* gb = bn->requires_grad ? bn->grad_buffer().data() : nullptr;
      std::vector<Scalar> dxhat(static_cast<std::size_t>(c));
      for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* g = on->grad.data() + r * c;
        const Scalar* xh = xhat.data() + r * c;
        Scalar mean_d = 0, mean_dx = 0;
        for (std::int64_t i = 0; i < c; ++i) {
          if (gg) gg[i] += g[i] * xh[i];
          if (gb) gb[i] += g[i];
          dxhat[static_cast<std::size_t>(i)] = g[i] * gn->value[static_cast<std::size_t>(i)];
          mean_d += dxhat[static_cast<std::size_t>(i)];
          mean_dx += dxhat[static_cast<std::size_t>(i)] * xh[i];
        }
        if (!gx) continue;
        mean_d /= static_cast<Scalar>(c);
        mean_dx /= static_cast<Scalar>(c);
        const Scalar is = inv_std[static_cast<std::size_t>(r)];
        Scalar* dst = gx + r * c;
        for (std::int64_t i = 0; i < c; ++i) {
          dst[i] += is * (dxhat[static_cast<std::size_t>(i)] - mean_d - xh[i] * mean_dx);
        }
      }
    });
  }
  return out;
}

/// Rows divided by max(||row||_2, eps).
template <typename Scalar>
Tensor<Scalar> l2_normalize_lastdim(const Tensor<Scalar>& x, Scalar eps = Scalar(1e-12)) {
  const std::int64_t n = x.dim(-1);
  const std::int64_t rows = x.numel() / n;
  Tensor<Scalar> out(x.shape());
  std::vector<Scalar> denom(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const Scalar* src = x.data() + r * n;
    Scalar ss = 0;
    for (std::int64_t i = 0; i < n; ++i) ss += src[i] * src[i];
    const Scalar d = std::max(std::sqrt(ss), eps);
    denom[static_cast<std::size_t>(r)] = d;
    Scalar* dst = out.data() + r * n;
    for (std::int64_t i = 0; i < n; ++i) dst[i] = src[i] / d;
  }
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), denom = std::move(denom), rows, n, eps] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* y = on->value.data() + r * n;
        const Scalar* g = on->grad.data() + r * n;
        const Scalar d = denom[static_cast<std::size_t>(r)];
        Scalar* dst = gx.data() + r * n;
        if (d > eps) {
          Scalar dot = 0;
          for (std::int64_t i = 0; i < n; ++i) dot += y[i] * g[i];
          for (std::int64_t i = 0; i < n; ++i) dst[i] += (g[i] - y[i] * dot) / d;
        } else {
          for (std::int64_t i = 0; i < n; ++i) dst[i] += g[i] / d;
        }
      }
    });
  }
  return out;
}

}  // namespace omnisr
