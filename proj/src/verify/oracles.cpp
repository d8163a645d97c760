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

#include "verify/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace omnisr::verify {

namespace {

double& at3(Tensor<double>& t, std::int64_t b, std::int64_t n, std::int64_t c) {
  return t.data()[(b * t.dim(1) + n) * t.dim(2) + c];
}
double at3(const Tensor<double>& t, std::int64_t b, std::int64_t n, std::int64_t c) {
  return t.data()[(b * t.dim(1) + n) * t.dim(2) + c];
}

/// y = x W + b on [B, N, Cin] with W [Cin, Cout].
Tensor<double> affine_loops(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& bias) {
  const std::int64_t bsz = x.dim(0), n = x.dim(1), cin = x.dim(2), cout = w.dim(1);
  Tensor<double> y(Shape{bsz, n, cout});
  for (std::int64_t b = 0; b < bsz; ++b) {
    for (std::int64_t t = 0; t < n; ++t) {
      for (std::int64_t o = 0; o < cout; ++o) {
        double acc = bias[o];
        for (std::int64_t i = 0; i < cin; ++i) acc += at3(x, b, t, i) * w[i * cout + o];
        at3(y, b, t, o) = acc;
      }
    }
  }
  return y;
}

}  // namespace

Tensor<double> spatial_attention_loops(const Tensor<double>& q, const Tensor<double>& k, const Tensor<double>& v,
                                       int heads) {
  const std::int64_t bsz = q.dim(0), n = q.dim(1), c = q.dim(2), d = c / heads;
  Tensor<double> y(q.shape());
  std::vector<double> logit(static_cast<std::size_t>(n));
  for (std::int64_t b = 0; b < bsz; ++b) {
    for (int h = 0; h < heads; ++h) {
      for (std::int64_t i = 0; i < n; ++i) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::int64_t e = 0; e < d; ++e) s += at3(q, b, i, h * d + e) * at3(k, b, j, h * d + e);
          logit[static_cast<std::size_t>(j)] = s / std::sqrt(static_cast<double>(d));
          top = std::max(top, logit[static_cast<std::size_t>(j)]);
        }
        double z = 0.0;
        for (auto& l : logit) {
          l = std::exp(l - top);
          z += l;
        }
        for (std::int64_t e = 0; e < d; ++e) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < n; ++j) acc += logit[static_cast<std::size_t>(j)] / z * at3(v, b, j, h * d + e);
          at3(y, b, i, h * d + e) = acc;
        }
      }
    }
  }
  return y;
}

Tensor<double> channel_attention_loops(const Tensor<double>& q, const Tensor<double>& k, const Tensor<double>& v,
                                       int heads, const std::vector<double>& tau) {
  const std::int64_t bsz = q.dim(0), n = q.dim(1), c = q.dim(2), d = c / heads;
  Tensor<double> y(q.shape());
  for (std::int64_t b = 0; b < bsz; ++b) {
    for (int h = 0; h < heads; ++h) {
      std::vector<double> qn(static_cast<std::size_t>(d)), kn(static_cast<std::size_t>(d));
      for (std::int64_t e = 0; e < d; ++e) {
        double sq = 0.0, sk = 0.0;
        for (std::int64_t t = 0; t < n; ++t) {
          sq += at3(q, b, t, h * d + e) * at3(q, b, t, h * d + e);
          sk += at3(k, b, t, h * d + e) * at3(k, b, t, h * d + e);
        }
        qn[static_cast<std::size_t>(e)] = std::max(std::sqrt(sq), 1e-12);
        kn[static_cast<std::size_t>(e)] = std::max(std::sqrt(sk), 1e-12);
      }
      for (std::int64_t i = 0; i < d; ++i) {
        std::vector<double> a(static_cast<std::size_t>(d));
        double top = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < d; ++j) {
          double s = 0.0;
          for (std::int64_t t = 0; t < n; ++t) {
            s += at3(k, b, t, h * d + i) / kn[static_cast<std::size_t>(i)] * at3(q, b, t, h * d + j) /
                 qn[static_cast<std::size_t>(j)];
          }
          a[static_cast<std::size_t>(j)] = s / tau[static_cast<std::size_t>(h)];
          top = std::max(top, a[static_cast<std::size_t>(j)]);
        }
        double z = 0.0;
        for (auto& l : a) {
          l = std::exp(l - top);
          z += l;
        }
        for (std::int64_t t = 0; t < n; ++t) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < d; ++j) acc += a[static_cast<std::size_t>(j)] / z * at3(v, b, t, h * d + j);
          at3(y, b, t, h * d + i) = acc;
        }
      }
    }
  }
  return y;
}

Tensor<double> omni_attention_loops(const Tensor<double>& x, const AttentionParams<double>& p) {
  const auto q = affine_loops(x, p.wq, p.bq);
  const auto k = affine_loops(x, p.wk, p.bk);
  const auto v = affine_loops(x, p.wv, p.bv);
  const auto ys = spatial_attention_loops(q, k, v, p.heads);
  std::vector<double> tau;
  for (std::int64_t h = 0; h < p.heads; ++h) tau.push_back(std::exp(p.log_tau[h]));
  const auto yc = channel_attention_loops(q, k, ys, p.heads, tau);
  return affine_loops(yc, p.wout, p.bout);
}

WindowSlot meso_slot(std::int64_t i, std::int64_t j, std::int64_t w, std::int64_t p) {
  return {(i / p) * (w / p) + (j / p), (i % p) * p + (j % p)};
}

WindowSlot global_slot(std::int64_t i, std::int64_t j, std::int64_t h, std::int64_t w, std::int64_t g) {
  const std::int64_t ch = h / g, cw = w / g;  // grid cell extents
  return {(i % ch) * cw + (j % cw), (i / ch) * g + (j / cw)};
}

Image bicubic_direct(const Image& img, std::int64_t out_h, std::int64_t out_w) {
  const std::int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const double ry = static_cast<double>(h) / out_h, rx = static_cast<double>(w) / out_w;
  const double sy = std::max(ry, 1.0), sx = std::max(rx, 1.0);
  Image out(Shape{c, out_h, out_w});
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t oy = 0; oy < out_h; ++oy) {
      for (std::int64_t ox = 0; ox < out_w; ++ox) {
        const double cy = (oy + 0.5) * ry - 0.5, cx = (ox + 0.5) * rx - 0.5;
        double acc = 0.0, norm = 0.0;
        // Every integer tap within two stretched kernel radii.
        for (auto ty = static_cast<std::int64_t>(std::floor(cy - 2 * sy)); ty <= cy + 2 * sy; ++ty) {
          for (auto tx = static_cast<std::int64_t>(std::floor(cx - 2 * sx)); tx <= cx + 2 * sx; ++tx) {
            const double wgt = cubic_kernel((ty - cy) / sy) * cubic_kernel((tx - cx) / sx);
            const std::int64_t yy = std::clamp<std::int64_t>(ty, 0, h - 1), xx = std::clamp<std::int64_t>(tx, 0, w - 1);
            acc += wgt * img[(ch * h + yy) * w + xx];
            norm += wgt;
          }
        }
        out[(ch * out_h + oy) * out_w + ox] = static_cast<float>(acc / norm);
      }
    }
  }
  return out;
}

double ssim_direct(const Image& a, const Image& b) {
  const std::int64_t h = a.dim(1), w = a.dim(2);
  constexpr int kWin = 11;
  constexpr double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double win[kWin][kWin];
  double z = 0.0;
  for (int y = 0; y < kWin; ++y) {
    for (int x = 0; x < kWin; ++x) {
      const double dy = y - 5, dx = x - 5;
      win[y][x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      z += win[y][x];
    }
  }
  double total = 0.0;
  std::int64_t count = 0;
  for (std::int64_t y0 = 0; y0 + kWin <= h; ++y0) {
    for (std::int64_t x0 = 0; x0 + kWin <= w; ++x0) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = 0; y < kWin; ++y) {
        for (int x = 0; x < kWin; ++x) {
          const double wt = win[y][x] / z;
          const double va = a[(y0 + y) * w + x0 + x], vb = b[(y0 + y) * w + x0 + x];
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double psnr_direct(const Image& a, const Image& b) {
  double se = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) se += (static_cast<double>(a[i]) - b[i]) * (static_cast<double>(a[i]) - b[i]);
  return 10.0 * std::log10(static_cast<double>(a.numel()) / se);
}

Tensor<double> conv2d_loops(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                            std::int64_t stride, std::int64_t pad, std::int64_t groups) {
  const std::int64_t bsz = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::int64_t cout = w.dim(0), k = w.dim(2);
  const std::int64_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  const std::int64_t cin_g = cin / groups, cout_g = cout / groups;
  Tensor<double> y(Shape{bsz, cout, oh, ow});
  for (std::int64_t n = 0; n < bsz; ++n) {
    for (std::int64_t o = 0; o < cout; ++o) {
      const std::int64_t g = o / cout_g;
      for (std::int64_t r = 0; r < oh; ++r) {
        for (std::int64_t s = 0; s < ow; ++s) {
          double acc = b.defined() ? b[o] : 0.0;
          for (std::int64_t i = 0; i < cin_g; ++i) {
            for (std::int64_t u = 0; u < k; ++u) {
              for (std::int64_t v = 0; v < k; ++v) {
                const std::int64_t yy = r * stride - pad + u, xx = s * stride - pad + v;
                if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
                acc += w[((o * cin_g + i) * k + u) * k + v] * x[((n * cin + g * cin_g + i) * h + yy) * wd + xx];
              }
            }
          }
          y[((n * cout + o) * oh + r) * ow + s] = acc;
        }
      }
    }
  }
  return y;
}

}  // namespace omnisr::verify
