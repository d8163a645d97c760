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

// Spatial kernels on NCHW tensors: grouped convolution, max pooling,
// bilinear / nearest resizing and depth-to-space rearrangement.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "omnisr/ops.hpp"

namespace omnisr {

struct Conv2dOptions {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

namespace detail {

struct ConvGeometry {
  std::int64_t batch, cin, h, w, cout, kh, kw, oh, ow;
  int stride, padding, groups;
  std::int64_t cin_g() const { return cin / groups; }
  std::int64_t cout_g() const { return cout / groups; }
  std::int64_t patch() const { return cin_g() * kh * kw; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && padding == 0; }
  bool depthwise() const { return groups == cin && cout == cin && groups > 1; }
};

template <typename Scalar>
ConvGeometry conv_geometry(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Conv2dOptions& o) {
  if (x.rank() != 4 || w.rank() != 4) {
    throw ShapeError("conv2d expects x [B,C,H,W] and w [O,C/g,kh,kw], got " + to_string(x.shape()) +
                     " and " + to_string(w.shape()));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), 0, 0,
                 o.stride, o.padding, o.groups};
  if (o.groups <= 0 || g.cin % o.groups != 0 || g.cout % o.groups != 0) {
    throw ConfigError("conv2d: channels in=" + std::to_string(g.cin) + " out=" + std::to_string(g.cout) +
                      " not divisible by groups=" + std::to_string(o.groups));
  }
  if (w.dim(1) != g.cin / o.groups) {
    throw ConfigError("conv2d: weight " + to_string(w.shape()) + " expects " +
                      std::to_string(w.dim(1) * o.groups) + " input channels, input has " +
                      std::to_string(g.cin));
  }
  if (o.stride <= 0 || o.padding < 0) throw ConfigError("conv2d: invalid stride or padding");
  const std::int64_t ph = g.h + 2 * o.padding, pw = g.w + 2 * o.padding;
  if (ph < g.kh || pw < g.kw) {
    throw ShapeError("conv2d: kernel " + to_string(w.shape()) + " does not fit input " +
                     to_string(x.shape()) + " with padding " + std::to_string(o.padding));
  }
  g.oh = (ph - g.kh) / o.stride + 1;
  g.ow = (pw - g.kw) / o.stride + 1;
  return g;
}

/// Unfolds one group of one image into [cin_g*kh*kw, oh*ow].
template <typename Scalar>
void im2col(const Scalar* img, const ConvGeometry& g, Scalar* col) {
  const std::int64_t ohw = g.oh * g.ow;
  for (std::int64_t c = 0; c < g.cin_g(); ++c) {
    const Scalar* plane = img + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        Scalar* row = col + ((c * g.kh + ki) * g.kw + kj) * ohw;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ki;
          Scalar* dst = row + oy * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.ow, Scalar(0));
            continue;
          }
          const Scalar* src = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kj;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const Scalar* col, const ConvGeometry& g, Scalar* img) {
  const std::int64_t ohw = g.oh * g.ow;
  for (std::int64_t c = 0; c < g.cin_g(); ++c) {
    Scalar* plane = img + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        const Scalar* row = col + ((c * g.kh + ki) * g.kw + kj) * ohw;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t iy = oy * g.stride - g.padding + ki;
          if (iy < 0 || iy >= g.h) continue;
          const Scalar* src = row + oy * g.ow;
          Scalar* dst = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t ix = ox * g.stride - g.padding + kj;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void depthwise_forward(const Scalar* x, const Scalar* w, const ConvGeometry& g, Scalar* y) {
  for (std::int64_t b = 0; b < g.batch; ++b) {
    for (std::int64_t c = 0; c < g.cin; ++c) {
      const Scalar* plane = x + (b * g.cin + c) * g.h * g.w;
      const Scalar* k = w + c * g.kh * g.kw;
      Scalar* out = y + (b * g.cin + c) * g.oh * g.ow;
      for (std::int64_t oy = 0; oy < g.oh; ++oy) {
        for (std::int64_t ox = 0; ox < g.ow; ++ox) {
          Scalar acc = 0;
          for (std::int64_t ki = 0; ki < g.kh; ++ki) {
            const std::int64_t iy = oy * g.stride - g.padding + ki;
            if (iy < 0 || iy >= g.h) continue;
            for (std::int64_t kj = 0; kj < g.kw; ++kj) {
              const std::int64_t ix = ox * g.stride - g.padding + kj;
              if (ix < 0 || ix >= g.w) continue;
              acc += k[ki * g.kw + kj] * plane[iy * g.w + ix];
            }
          }
          out[oy * g.ow + ox] += acc;
        }
      }
    }
  }
}

template <typename Scalar>
void depthwise_backward(const Scalar* x, const Scalar* w, const Scalar* gy, const ConvGeometry& g,
                        Scalar* gx, Scalar* gw) {
  for (std::int64_t b = 0; b < g.batch; ++b) {
    for (std::int64_t c = 0; c < g.cin; ++c) {
      const Scalar* plane = x + (b * g.cin + c) * g.h * g.w;
      const Scalar* k = w + c * g.kh * g.kw;
      const Scalar* go = gy + (b * g.cin + c) * g.oh * g.ow;
      Scalar* gplane = gx ? gx + (b * g.cin + c) * g.h * g.w : nullptr;
      Scalar* gk = gw ? gw + c * g.kh * g.kw : nullptr;
      for (std::int64_t oy = 0; oy < g.oh; ++oy) {
        for (std::int64_t ox = 0; ox < g.ow; ++ox) {
          const Scalar d = go[oy * g.ow + ox];
          for (std::int64_t ki = 0; ki < g.kh; ++ki) {
            const std::int64_t iy = oy * g.stride - g.padding + ki;
            if (iy < 0 || iy >= g.h) continue;
            for (std::int64_t kj = 0; kj < g.kw; ++kj) {
              const std::int64_t ix = ox * g.stride - g.padding + kj;
              if (ix < 0 || ix >= g.w) continue;
              if (gplane) gplane[iy * g.w + ix] += d * k[ki * g.kw + kj];
              if (gk) gk[ki * g.kw + kj] += d * plane[iy * g.w + ix];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Cross-correlation with zero padding. `bias` may be an undefined tensor.
/// groups == 1 is a dense convolution, groups == C a depthwise one.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& bias,
                      Conv2dOptions opt = {}) {
  const auto g = detail::conv_geometry(x, w, opt);
  if (bias.defined() && bias.numel() != g.cout) {
    throw ShapeError("conv2d bias " + to_string(bias.shape()) + " does not match " +
                     std::to_string(g.cout) + " output channels");
  }
  Tensor<Scalar> out(Shape{g.batch, g.cout, g.oh, g.ow});
  const std::int64_t ohw = g.oh * g.ow;
  count_macs(static_cast<std::uint64_t>(g.batch * g.cout * ohw * g.patch()));
  if (bias.defined()) {
    for (std::int64_t b = 0; b < g.batch; ++b) {
      for (std::int64_t c = 0; c < g.cout; ++c) {
        std::fill_n(out.data() + (b * g.cout + c) * ohw, ohw, bias[c]);
      }
    }
  }
  if (g.depthwise()) {
    detail::depthwise_forward(x.data(), w.data(), g, out.data());
  } else {
    std::vector<Scalar> col(g.pointwise() ? 0 : static_cast<std::size_t>(g.patch() * ohw));
    for (std::int64_t b = 0; b < g.batch; ++b) {
      for (std::int64_t gi = 0; gi < g.groups; ++gi) {
        const Scalar* img = x.data() + (b * g.cin + gi * g.cin_g()) * g.h * g.w;
        const Scalar* cols = img;
        if (!g.pointwise()) {
          detail::im2col(img, g, col.data());
          cols = col.data();
        }
        detail::ConstMatMap<Scalar> W(w.data() + gi * g.cout_g() * g.patch(), g.cout_g(), g.patch());
        detail::ConstMatMap<Scalar> X(cols, g.patch(), ohw);
        detail::MatMap<Scalar> Y(out.data() + (b * g.cout + gi * g.cout_g()) * ohw, g.cout_g(), ohw);
        Y.noalias() += W * X;
      }
    }
  }
  if (auto* tape = detail::recording<Scalar>(x, w, bias)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), wn = w.node(), bn = bias.defined() ? bias.node() : nullptr,
                  on = out.node(), g] {
      if (on->grad.empty()) return;
      const std::int64_t ohw = g.oh * g.ow;
      const Scalar* gy = on->grad.data();
      if (bn && bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (std::int64_t b = 0; b < g.batch; ++b) {
          for (std::int64_t c = 0; c < g.cout; ++c) {
            const Scalar* src = gy + (b * g.cout + c) * ohw;
            Scalar acc = 0;
            for (std::int64_t i = 0; i < ohw; ++i) acc += src[i];
            gb[static_cast<std::size_t>(c)] += acc;
          }
        }
      }
      Scalar* gx = xn->requires_grad ? xn->grad_buffer().data() : nullptr;
      Scalar* gw = wn->requires_grad ? wn->grad_buffer().data() : nullptr;
      if (!gx && !gw) return;
      if (g.depthwise()) {
        detail::depthwise_backward(xn->value.data(), wn->value.data(), gy, g, gx, gw);
        return;
      }
      std::vector<Scalar> col(g.pointwise() ? 0 : static_cast<std::size_t>(g.patch() * ohw));
      std::vector<Scalar> dcol(g.pointwise() || !gx ? 0 : static_cast<std::size_t>(g.patch() * ohw));
      for (std::int64_t b = 0; b < g.batch; ++b) {
        for (std::int64_t gi = 0; gi < g.groups; ++gi) {
          const std::int64_t in_off = (b * g.cin + gi * g.cin_g()) * g.h * g.w;
          detail::ConstMatMap<Scalar> G(gy + (b * g.cout + gi * g.cout_g()) * ohw, g.cout_g(), ohw);
          detail::ConstMatMap<Scalar> W(wn->value.data() + gi * g.cout_g() * g.patch(), g.cout_g(),
                                        g.patch());
          if (gw) {
            const Scalar* cols = xn->value.data() + in_off;
            if (!g.pointwise()) {
              detail::im2col(xn->value.data() + in_off, g, col.data());
              cols = col.data();
            }
            detail::MatMap<Scalar> GW(gw + gi * g.cout_g() * g.patch(), g.cout_g(), g.patch());
            GW.noalias() += G * detail::ConstMatMap<Scalar>(cols, g.patch(), ohw).transpose();
          }
          if (gx) {
            if (g.pointwise()) {
              detail::MatMap<Scalar>(gx + in_off, g.patch(), ohw).noalias() += W.transpose() * G;
            } else {
              detail::MatMap<Scalar>(dcol.data(), g.patch(), ohw).noalias() = W.transpose() * G;
              detail::col2im_add(dcol.data(), g, gx + in_off);
            }
          }
        }
      }
    });
  }
  return out;
}

/// Max pooling without padding; kernel (kh, kw), stride s.
/// Ties resolve to the first maximum in row-major window order.
template <typename Scalar>
Tensor<Scalar> max_pool2d(const Tensor<Scalar>& x, std::int64_t kh, std::int64_t kw, std::int64_t stride) {
  if (x.rank() != 4) throw ShapeError("max_pool2d expects [B,C,H,W], got " + to_string(x.shape()));
  const std::int64_t h = x.dim(2), w = x.dim(3);
  if (kh > h || kw > w || stride <= 0) {
    throw ShapeError("max_pool2d window (" + std::to_string(kh) + ", " + std::to_string(kw) +
                     ") larger than input " + to_string(x.shape()));
  }
  const std::int64_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
  const std::int64_t planes = x.dim(0) * x.dim(1);
  Tensor<Scalar> out(Shape{x.dim(0), x.dim(1), oh, ow});
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.numel()));
  for (std::int64_t p = 0; p < planes; ++p) {
    const Scalar* src = x.data() + p * h * w;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        std::int64_t best = (oy * stride) * w + ox * stride;
        for (std::int64_t i = 0; i < kh; ++i) {
          for (std::int64_t j = 0; j < kw; ++j) {
            const std::int64_t idx = (oy * stride + i) * w + ox * stride + j;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::int64_t o = (p * oh + oy) * ow + ox;
        out[o] = src[best];
        argmax[static_cast<std::size_t>(o)] = p * h * w + best;
      }
    }
  }
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), argmax = std::move(argmax)] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[static_cast<std::size_t>(argmax[i])] += on->grad[i];
    });
  }
  return out;
}

namespace detail {
struct LinearTaps {
  std::vector<std::int64_t> i0, i1;
  std::vector<double> frac;
};

/// Half-pixel-centre sampling positions (align_corners = false).
inline LinearTaps linear_taps(std::int64_t in, std::int64_t out) {
  LinearTaps t;
  t.i0.resize(static_cast<std::size_t>(out));
  t.i1.resize(static_cast<std::size_t>(out));
  t.frac.resize(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::int64_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    auto i0 = static_cast<std::int64_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    t.i0[static_cast<std::size_t>(o)] = i0;
    t.i1[static_cast<std::size_t>(o)] = std::min(i0 + 1, in - 1);
    t.frac[static_cast<std::size_t>(o)] = src - static_cast<double>(i0);
  }
  return t;
}
}  // namespace detail

/// Bilinear resize of the trailing two axes, half-pixel centres.
template <typename Scalar>
Tensor<Scalar> resize_bilinear(const Tensor<Scalar>& x, std::int64_t out_h, std::int64_t out_w) {
  if (x.rank() != 4) throw ShapeError("resize_bilinear expects [B,C,H,W], got " + to_string(x.shape()));
  const std::int64_t h = x.dim(2), w = x.dim(3);
  const auto ty = detail::linear_taps(h, out_h);
  const auto tx = detail::linear_taps(w, out_w);
  const std::int64_t planes = x.dim(0) * x.dim(1);
  Tensor<Scalar> out(Shape{x.dim(0), x.dim(1), out_h, out_w});
  for (std::int64_t p = 0; p < planes; ++p) {
    const Scalar* src = x.data() + p * h * w;
    Scalar* dst = out.data() + p * out_h * out_w;
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      const auto fy = static_cast<Scalar>(ty.frac[static_cast<std::size_t>(oy)]);
      const Scalar* r0 = src + ty.i0[static_cast<std::size_t>(oy)] * w;
      const Scalar* r1 = src + ty.i1[static_cast<std::size_t>(oy)] * w;
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        const auto fx = static_cast<Scalar>(tx.frac[static_cast<std::size_t>(ox)]);
        const auto x0 = tx.i0[static_cast<std::size_t>(ox)], x1 = tx.i1[static_cast<std::size_t>(ox)];
        const Scalar top = r0[x0] + (r0[x1] - r0[x0]) * fx;
        const Scalar bot = r1[x0] + (r1[x1] - r1[x0]) * fx;
        dst[oy * out_w + ox] = top + (bot - top) * fy;
      }
    }
  }
  if (auto* tape = detail::recording<Scalar>(x)) {
    out.set_requires_grad();
    tape->record([xn = x.node(), on = out.node(), ty, tx, planes, h, w, out_h, out_w] {
      if (on->grad.empty() || !xn->requires_grad) return;
      auto& gx = xn->grad_buffer();
      for (std::int64_t p = 0; p < planes; ++p) {
        Scalar* dst = gx.data() + p * h * w;
        const Scalar* g = on->grad.data() + p * out_h * out_w;
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
          const auto fy = static_cast<Scalar>(ty.frac[static_cast<std::size_t>(oy)]);
          Scalar* r0 = dst + ty.i0[static_cast<std::size_t>(oy)] * w;
          Scalar* r1 = dst + ty.i1[static_cast<std::size_t>(oy)] * w;
          for (std::int64_t ox = 0; ox < out_w; ++ox) {
            const auto fx = static_cast<Scalar>(tx.frac[static_cast<std::size_t>(ox)]);
            const auto x0 = tx.i0[static_cast<std::size_t>(ox)], x1 = tx.i1[static_cast<std::size_t>(ox)];
            const Scalar d = g[oy * out_w + ox];
            r0[x0] += d * (Scalar(1) - fy) * (Scalar(1) - fx);
            r0[x1] += d * (Scalar(1) - fy) * fx;
            r1[x0] += d * fy * (Scalar(1) - fx);
            r1[x1] += d * fy * fx;
          }
        }
      }
    });
  }
  return out;
}

/// Nearest-neighbour resize: source index floor(o * in / out).
template <typename Scalar>
Tensor<Scalar> resize_nearest(const Tensor<Scalar>& x, std::int64_t out_h, std::int64_t out_w) {
  const std::int64_t h = x.dim(-2), w = x.dim(-1);
  std::vector<std::int64_t> source(static_cast<std::size_t>(out_h * out_w));
  for (std::int64_t i = 0; i < out_h; ++i) {
    const std::int64_t sy = std::min(i * h / out_h, h - 1);
    for (std::int64_t j = 0; j < out_w; ++j) {
      source[static_cast<std::size_t>(i * out_w + j)] = sy * w + std::min(j * w / out_w, w - 1);
    }
  }
  return remap_plane(x, out_h, out_w, std::move(source));
}

/// Depth-to-space: [B, C*r*r, H, W] -> [B, C, r*H, r*W].
template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& x, std::int64_t r) {
  if (x.rank() != 4) throw ShapeError("pixel_shuffle expects [B,C,H,W], got " + to_string(x.shape()));
  if (r <= 0 || x.dim(1) % (r * r) != 0) {
    throw ConfigError("pixel_shuffle: channels " + std::to_string(x.dim(1)) + " not divisible by r^2 = " +
                      std::to_string(r * r));
  }
  if (r == 1) return x;
  const std::int64_t b = x.dim(0), c = x.dim(1) / (r * r), h = x.dim(2), w = x.dim(3);
  auto t = reshape(x, Shape{b, c, r, r, h, w});
  t = permute(t, {0, 1, 4, 2, 5, 3});
  return reshape(t, Shape{b, c, h * r, w * r});
}

/// Space-to-depth, the inverse of pixel_shuffle.
template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& x, std::int64_t r) {
  if (x.rank() != 4) throw ShapeError("pixel_unshuffle expects [B,C,H,W], got " + to_string(x.shape()));
  if (r <= 0 || x.dim(2) % r != 0 || x.dim(3) % r != 0) {
    throw ConfigError("pixel_unshuffle: spatial extent of " + to_string(x.shape()) +
                      " not divisible by " + std::to_string(r));
  }
  if (r == 1) return x;
  const std::int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2) / r, w = x.dim(3) / r;
  auto t = reshape(x, Shape{b, c, h, r, w, r});
  t = permute(t, {0, 1, 3, 5, 2, 4});
  return reshape(t, Shape{b, c * r * r, h, w});
}

}  // namespace omnisr
