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

#include "omnisr/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "omnisr/png_io.hpp"

namespace omnisr {

Image rgb_to_y(const Image& img) {
  if (img.rank() != 3 || img.dim(0) != 3) throw ShapeError("rgb_to_y expects [3,H,W], got " + to_string(img.shape()));
  const std::int64_t hw = img.dim(1) * img.dim(2);
  Image y(Shape{1, img.dim(1), img.dim(2)});
  const float* r = img.data();
  const float* g = r + hw;
  const float* b = g + hw;
  for (std::int64_t i = 0; i < hw; ++i) {
    const double v = (65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i] + 16.0) / 255.0;
    y[i] = static_cast<float>(v);
  }
  return y;
}

namespace {

/// Shaved luma plane as doubles, row-major with extents h x w.
struct Plane {
  std::vector<double> v;
  std::int64_t h = 0, w = 0;
  double at(std::int64_t y, std::int64_t x) const { return v[static_cast<std::size_t>(y * w + x)]; }
};

Plane luma_plane(const Image& img, std::int64_t shave, const char* what) {
  if (img.rank() != 3 || (img.dim(0) != 3 && img.dim(0) != 1)) {
    throw ShapeError(std::string(what) + " expects [3,H,W] or [1,H,W], got " + to_string(img.shape()));
  }
  const Image y = img.dim(0) == 3 ? rgb_to_y(img) : img;
  const std::int64_t h = y.dim(1), w = y.dim(2);
  if (shave < 0 || 2 * shave >= h || 2 * shave >= w) {
    throw ShapeError(std::string(what) + ": shave " + std::to_string(shave) + " leaves no pixels");
  }
  Plane p;
  p.h = h - 2 * shave;
  p.w = w - 2 * shave;
  p.v.reserve(static_cast<std::size_t>(p.h * p.w));
  for (std::int64_t r = shave; r < h - shave; ++r) {
    for (std::int64_t c = shave; c < w - shave; ++c) p.v.push_back(y[r * w + c]);
  }
  return p;
}

void require_same(const Image& a, const Image& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

/// Separable blur with a normalized 1-D kernel, valid region only.
std::vector<double> filter_valid(const std::vector<double>& src, std::int64_t h, std::int64_t w,
                                 const std::vector<double>& k) {
  const auto n = static_cast<std::int64_t>(k.size());
  const std::int64_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> mid(static_cast<std::size_t>(h * ow));
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < n; ++j) acc += k[static_cast<std::size_t>(j)] * src[static_cast<std::size_t>(y * w + x + j)];
      mid[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (std::int64_t y = 0; y < oh; ++y) {
    for (std::int64_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < n; ++j) acc += k[static_cast<std::size_t>(j)] * mid[static_cast<std::size_t>((y + j) * ow + x)];
      out[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  }
  return out;
}

std::vector<double> gaussian_1d(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= total;
  return k;
}

}  // namespace

double psnr(const Image& a, const Image& b, std::int64_t shave) {
  require_same(a, b, "psnr");
  const Plane pa = luma_plane(a, shave, "psnr"), pb = luma_plane(b, shave, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < pa.v.size(); ++i) {
    const double d = pa.v[i] - pb.v[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(pa.v.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b, std::int64_t shave) {
  require_same(a, b, "ssim");
  const Plane pa = luma_plane(a, shave, "ssim"), pb = luma_plane(b, shave, "ssim");
  constexpr int kWin = 11;
  if (pa.h < kWin || pa.w < kWin) throw ShapeError("ssim: image smaller than the 11x11 window after shaving");
  const auto k = gaussian_1d(kWin, 1.5);
  const std::size_t n = pa.v.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = pa.v[i] * pa.v[i];
    bb[i] = pb.v[i] * pb.v[i];
    ab[i] = pa.v[i] * pb.v[i];
  }
  const auto mu_a = filter_valid(pa.v, pa.h, pa.w, k), mu_b = filter_valid(pb.v, pa.h, pa.w, k);
  const auto e_aa = filter_valid(aa, pa.h, pa.w, k), e_bb = filter_valid(bb, pa.h, pa.w, k),
             e_ab = filter_valid(ab, pa.h, pa.w, k);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(mu_a.size());
}

double feature_entropy(const Tensor<float>& features, int bins) {
  if (features.rank() != 2 || features.dim(0) < 2) {
    throw ShapeError("feature_entropy expects [N,C] with N >= 2, got " + to_string(features.shape()));
  }
  if (bins < 2) throw ConfigError("feature_entropy: need at least two bins");
  const std::int64_t n = features.dim(0), c = features.dim(1);
  double total = 0.0;
  std::vector<std::int64_t> hist(static_cast<std::size_t>(bins));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    float lo = features[ch], hi = features[ch];
    for (std::int64_t i = 1; i < n; ++i) {
      lo = std::min(lo, features[i * c + ch]);
      hi = std::max(hi, features[i * c + ch]);
    }
    if (!(hi > lo)) continue;
    std::fill(hist.begin(), hist.end(), 0);
    const double width = (static_cast<double>(hi) - lo) / bins;
    for (std::int64_t i = 0; i < n; ++i) {
      auto bin = static_cast<std::int64_t>((static_cast<double>(features[i * c + ch]) - lo) / width);
      ++hist[static_cast<std::size_t>(std::clamp<std::int64_t>(bin, 0, bins - 1))];
    }
    double h = 0.0;
    for (auto count : hist) {
      if (count == 0) continue;
      const double p = static_cast<double>(count) / static_cast<double>(n);
      h -= p * std::log(p);
    }
    total += h / std::log(static_cast<double>(bins));
  }
  return total / static_cast<double>(c);
}

// ---------------------------------------------------------------- benchmark

namespace {

std::vector<std::int64_t> tile_starts(std::int64_t extent, std::int64_t tile, std::int64_t overlap) {
  if (extent <= tile) return {0};
  std::vector<std::int64_t> s;
  const std::int64_t stride = tile - overlap;
  for (std::int64_t p = 0;; p += stride) {
    if (p + tile >= extent) {
      s.push_back(extent - tile);
      break;
    }
    s.push_back(p);
  }
  return s;
}

}  // namespace

Image tiled_upscale(const std::function<Image(const Image&)>& upscale, const Image& lr, int scale,
                    std::int64_t tile, std::int64_t overlap) {
  if (tile <= 0 || overlap < 0 || overlap >= tile) throw ConfigError("tiled_upscale: need tile > overlap >= 0");
  const std::int64_t c = lr.dim(0), h = lr.dim(1), w = lr.dim(2);
  if (h <= tile && w <= tile) return upscale(lr);
  const std::int64_t th = std::min(tile, h), tw = std::min(tile, w);
  const std::int64_t oh = h * scale, ow = w * scale;
  std::vector<double> acc(static_cast<std::size_t>(c * oh * ow), 0.0);
  std::vector<double> weight(static_cast<std::size_t>(oh * ow), 0.0);
  for (auto y0 : tile_starts(h, th, overlap)) {
    for (auto x0 : tile_starts(w, tw, overlap)) {
      const Image out = upscale(crop_region(lr, y0, x0, th, tw));
      const std::int64_t sh = th * scale, sw = tw * scale;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        for (std::int64_t y = 0; y < sh; ++y) {
          for (std::int64_t x = 0; x < sw; ++x) {
            acc[static_cast<std::size_t>((ch * oh + y0 * scale + y) * ow + x0 * scale + x)] += out[(ch * sh + y) * sw + x];
          }
        }
      }
      for (std::int64_t y = 0; y < sh; ++y) {
        for (std::int64_t x = 0; x < sw; ++x) weight[static_cast<std::size_t>((y0 * scale + y) * ow + x0 * scale + x)] += 1.0;
      }
    }
  }
  Image out(Shape{c, oh, ow});
  for (std::int64_t i = 0; i < c * oh * ow; ++i) {
    out[i] = static_cast<float>(acc[static_cast<std::size_t>(i)] / weight[static_cast<std::size_t>(i % (oh * ow))]);
  }
  return out;
}

SrModel network_model(const ModelParams<float>& params, const NetworkConfig& cfg, std::int64_t tile,
                      std::int64_t overlap) {
  auto run = [&params, cfg](const Image& lr) {
    NoGradScope<float> no_grad;
    const Tensor<float> x = reshape(lr, Shape{1, lr.dim(0), lr.dim(1), lr.dim(2)});
    const Tensor<float> y = forward(x, params, cfg);
    return reshape(y, Shape{y.dim(1), y.dim(2), y.dim(3)});
  };
  return [run, scale = cfg.scale, tile, overlap](const Image& lr, const Image&) {
    return tiled_upscale(run, lr, scale, tile, overlap);
  };
}

SrModel bicubic_model(int scale) {
  return [scale](const Image& lr, const Image&) { return bicubic_resize(lr, lr.dim(1) * scale, lr.dim(2) * scale); };
}

double EvalReport::mean_psnr() const {
  if (images.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : images) acc += r.psnr;
  return acc / static_cast<double>(images.size());
}

double EvalReport::mean_ssim() const {
  if (images.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : images) acc += r.ssim;
  return acc / static_cast<double>(images.size());
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  os << "# omnisr eval report\n";
  os << "scale " << scale << '\n';
  os << "fingerprint " << (fingerprint.empty() ? "-" : fingerprint) << '\n';
  for (const auto& r : images) os << "image " << r.name << " psnr " << num(r.psnr) << " ssim " << num(r.ssim) << '\n';
  for (const auto& f : failures) os << "failed " << f.name << " error " << f.error << '\n';
  os << "count " << images.size() << '\n';
  os << "failures " << failures.size() << '\n';
  os << "mean_psnr " << num(mean_psnr()) << '\n';
  os << "mean_ssim " << num(mean_ssim()) << '\n';
  os << "runtime " << num(runtime) << '\n';
  return os.str();
}

namespace {

ImageResult evaluate_one(const SrModel& model, const std::string& name, const Image& hr_in, int scale) {
  const Image hr = crop_to_multiple(hr_in, scale);
  const Image lr = bicubic_resize(hr, hr.dim(1) / scale, hr.dim(2) / scale);
  Image sr = model(lr, hr);
  if (sr.shape() != hr.shape()) {
    throw ShapeError("model output " + to_string(sr.shape()) + " does not match HR " + to_string(hr.shape()));
  }
  for (auto& v : sr.values()) v = std::clamp(v, 0.0f, 1.0f);
  return {name, psnr(sr, hr, scale), ssim(sr, hr, scale)};
}

}  // namespace

EvalReport run_benchmark(const SrModel& model, const std::vector<std::pair<std::string, Image>>& images, int scale,
                         const std::string& fingerprint) {
  const auto start = std::chrono::steady_clock::now();
  EvalReport rep;
  rep.scale = scale;
  rep.fingerprint = fingerprint;
  for (const auto& [name, hr] : images) {
    try {
      rep.images.push_back(evaluate_one(model, name, hr, scale));
    } catch (const std::exception& e) {
      rep.failures.push_back({name, e.what()});
    }
  }
  std::sort(rep.images.begin(), rep.images.end(), [](const auto& x, const auto& y) { return x.name < y.name; });
  rep.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

EvalReport run_benchmark(const SrModel& model, const std::string& dir, int scale, const std::string& fingerprint) {
  namespace fs = std::filesystem;
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(dir + ": not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && ext == ".png") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  EvalReport rep;
  rep.scale = scale;
  rep.fingerprint = fingerprint;
  for (const auto& path : paths) {
    const std::string name = fs::path(path).filename().string();
    try {
      rep.images.push_back(evaluate_one(model, name, png_read(path), scale));
    } catch (const std::exception& e) {
      rep.failures.push_back({name, e.what()});
    }
  }
  rep.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

NetworkConfig ablation_variant(AttentionKind kind, const NetworkConfig& base) {
  NetworkConfig full = base;
  full.block.attention = AttentionKind::omni;
  if (kind == AttentionKind::omni) return full;
  const std::int64_t target = count_params(full);
  NetworkConfig v = full;
  v.block.attention = kind;
  std::int64_t best_f = full.block.ffn_hidden(), best_gap = -1;
  for (std::int64_t f = 1; f <= 4 * full.block.channels; ++f) {
    v.block.ffn_hidden_override = f;
    const std::int64_t gap = std::abs(count_params(v) - target);
    if (best_gap < 0 || gap < best_gap) {
      best_gap = gap;
      best_f = f;
    }
  }
  v.block.ffn_hidden_override = best_f;
  return v;
}

}  // namespace omnisr
