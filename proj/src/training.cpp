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

#include "omnisr/training.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "omnisr/checkpoint.hpp"
#include "omnisr/config.hpp"
#include "omnisr/evalkit.hpp"
#include "omnisr/png_io.hpp"

namespace omnisr {

void TrainConfig::validate(std::int64_t window) const {
  if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (total_iters < 0) throw ConfigError("train: total_iters must be >= 0");
  if (!(base_lr > 0)) throw ConfigError("train: base_lr must be > 0");
  if (halve_every <= 0) throw ConfigError("train: halve_every must be positive");
  if (crop <= 0 || crop % window != 0) {
    throw ConfigError("train: crop " + std::to_string(crop) + " must be a positive multiple of the window " +
                      std::to_string(window));
  }
  if (weight_decay < 0 || !(eps > 0)) throw ConfigError("train: need weight_decay >= 0 and eps > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("train: betas must be in [0, 1)");
  if (log_every <= 0 || checkpoint_every <= 0) throw ConfigError("train: log and checkpoint intervals must be positive");
  if (prefetch < 0) throw ConfigError("train: prefetch must be >= 0");
}

double lr_at(std::int64_t t, const TrainConfig& cfg) {
  return std::ldexp(cfg.base_lr, -static_cast<int>(t / cfg.halve_every));
}

// --------------------------------------------------------------------- data

bool Dataset::add(std::string name, const Image& hr, std::int64_t min_lr) {
  if (hr.rank() != 3 || hr.dim(0) != 3) {
    throw ShapeError(name + ": training images must be [3,H,W], got " + to_string(hr.shape()));
  }
  if (hr.dim(1) / scale_ < min_lr || hr.dim(2) / scale_ < min_lr) {
    std::cerr << "warning: skipping " << name << ": " << hr.dim(2) << "x" << hr.dim(1)
              << " is smaller than the " << min_lr * scale_ << " pixel HR crop\n";
    return false;
  }
  TrainPair p;
  p.name = std::move(name);
  p.hr = crop_to_multiple(hr, scale_);
  p.lr = bicubic_resize(p.hr, p.hr.dim(1) / scale_, p.hr.dim(2) / scale_);
  pairs_.push_back(std::move(p));
  return true;
}

namespace {

std::vector<std::string> png_files(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(dir + ": not a directory");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Dataset Dataset::from_directories(const std::vector<std::string>& roots, int scale, std::int64_t min_lr) {
  Dataset d(scale);
  for (const auto& root : roots) {
    for (const auto& path : png_files(root)) d.add(path, png_read(path), min_lr);
  }
  return d;
}

Augment draw_augment(AugmentLaw law, SplitMix64& rng) {
  Augment a;
  if (law == AugmentLaw::none) return a;
  a.flip = rng.uniform() < 0.5;
  const double r = rng.uniform();
  if (law == AugmentLaw::flip_rotate) {
    a.quarter_turns = r < 0.5 ? 0 : (r < 0.75 ? 1 : 3);
  } else {
    a.quarter_turns = static_cast<int>(r * 4.0);
  }
  return a;
}

Image apply_augment(const Image& img, const Augment& a) {
  Image out = a.flip ? flip_horizontal(img) : img;
  return a.quarter_turns == 0 ? out : rotate90(out, a.quarter_turns);
}

Batch sample_batch(const Dataset& data, const TrainConfig& cfg, SplitMix64& rng, std::vector<CropRecord>* records) {
  if (data.empty()) throw ConfigError("sample_batch: dataset is empty");
  const std::int64_t s = data.scale(), c = cfg.crop, hc = cfg.crop * s;
  Batch batch{Tensor<float>(Shape{cfg.batch_size, 3, c, c}), Tensor<float>(Shape{cfg.batch_size, 3, hc, hc})};
  if (records) records->clear();
  for (std::int64_t b = 0; b < cfg.batch_size; ++b) {
    CropRecord rec;
    rec.image = static_cast<std::size_t>(rng.next() % data.size());
    const TrainPair& pair = data[rec.image];
    const std::int64_t lh = pair.lr.dim(1), lw = pair.lr.dim(2);
    if (lh < c || lw < c) throw ShapeError(pair.name + ": LR image smaller than the crop");
    rec.lr_y = static_cast<std::int64_t>(rng.next() % static_cast<std::uint64_t>(lh - c + 1));
    rec.lr_x = static_cast<std::int64_t>(rng.next() % static_cast<std::uint64_t>(lw - c + 1));
    rec.augment = draw_augment(cfg.augment, rng);
    const Image lr = apply_augment(crop_region(pair.lr, rec.lr_y, rec.lr_x, c, c), rec.augment);
    const Image hr = apply_augment(crop_region(pair.hr, rec.lr_y * s, rec.lr_x * s, hc, hc), rec.augment);
    std::copy(lr.values().begin(), lr.values().end(), batch.lr.data() + b * lr.numel());
    std::copy(hr.values().begin(), hr.values().end(), batch.hr.data() + b * hr.numel());
    if (records) records->push_back(rec);
  }
  return batch;
}

// ---------------------------------------------------------------- optimizer

TrainState initial_state(const NetworkConfig& net, const TrainConfig& cfg) {
  TrainState st;
  st.params = init_params<float>(net);
  for (const auto& [name, p] : st.params) {
    st.m.emplace(name, Tensor<float>(p.shape()));
    st.v.emplace(name, Tensor<float>(p.shape()));
  }
  st.rng_state = cfg.seed;
  return st;
}

void adamw_step(TrainState& state, double lr, const TrainConfig& cfg) {
  for (const auto& [name, p] : state.params) {
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("adamw: non-finite gradient " + std::to_string(g[i]) + " in " + name + "[" +
                           std::to_string(i) + "] at iteration " + std::to_string(state.iteration) +
                           "; step aborted, parameters unchanged");
      }
    }
  }
  const double t = static_cast<double>(state.iteration + 1);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - lr * cfg.weight_decay;
  for (auto& [name, p] : state.params) {
    auto& m = state.m.at(name);
    auto& v = state.v.at(name);
    const bool has = p.has_grad();
    const std::int64_t n = p.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      const double g = has ? static_cast<double>(p.grad()[static_cast<std::size_t>(i)]) : 0.0;
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double step = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps);
      p[i] = static_cast<float>(static_cast<double>(p[i]) * decay - step);
    }
  }
  ++state.iteration;
}

// -------------------------------------------------------------------- loop

std::string MetricRecord::format() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "iter=%lld lr=%.6e loss=%.8f psnr=%.4f wall=%.3f", static_cast<long long>(iter),
                lr, loss, psnr, wall);
  return buf;
}

double batch_psnr(const Tensor<float>& pred, const Tensor<float>& hr, std::int64_t shave) {
  const std::int64_t b = pred.dim(0), plane = pred.numel() / b;
  const Shape item{pred.dim(1), pred.dim(2), pred.dim(3)};
  double acc = 0.0;
  for (std::int64_t i = 0; i < b; ++i) {
    std::vector<float> p(pred.data() + i * plane, pred.data() + (i + 1) * plane);
    for (auto& v : p) v = std::clamp(v, 0.0f, 1.0f);
    std::vector<float> h(hr.data() + i * plane, hr.data() + (i + 1) * plane);
    acc += psnr(Image(item, std::move(p)), Image(item, std::move(h)), shave);
  }
  return acc / static_cast<double>(b);
}

namespace {

struct Sampled {
  Batch batch;
  std::uint64_t rng_after;
};

/// Batch producer. With depth > 0 a worker thread runs ahead by at most
/// `depth` batches; the sequence is the same either way because the
/// sampler owns its RNG and draws strictly in order.
class BatchSource {
 public:
  BatchSource(const Dataset& data, const TrainConfig& cfg, std::uint64_t rng_state)
      : data_(data), cfg_(cfg), rng_(rng_state), depth_(static_cast<std::size_t>(cfg.prefetch)) {
    if (depth_ > 0) worker_ = std::thread([this] { produce(); });
  }

  ~BatchSource() {
    if (worker_.joinable()) {
      {
        std::lock_guard<std::mutex> lock(mu_);
        stop_ = true;
      }
      cv_.notify_all();
      worker_.join();
    }
  }

  BatchSource(const BatchSource&) = delete;
  BatchSource& operator=(const BatchSource&) = delete;

  Sampled next() {
    if (depth_ == 0) return draw();
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return !queue_.empty() || error_; });
    if (queue_.empty()) std::rethrow_exception(error_);
    Sampled s = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    return s;
  }

 private:
  Sampled draw() {
    Batch b = sample_batch(data_, cfg_, rng_);
    return {std::move(b), rng_.state()};
  }

  void produce() {
    try {
      for (;;) {
        {
          std::unique_lock<std::mutex> lock(mu_);
          cv_.wait(lock, [this] { return stop_ || queue_.size() < depth_; });
          if (stop_) return;
        }
        Sampled s = draw();
        std::lock_guard<std::mutex> lock(mu_);
        queue_.push_back(std::move(s));
        cv_.notify_all();
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      error_ = std::current_exception();
      cv_.notify_all();
    }
  }

  const Dataset& data_;
  TrainConfig cfg_;
  SplitMix64 rng_;
  std::size_t depth_;
  std::thread worker_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Sampled> queue_;
  std::exception_ptr error_;
  bool stop_ = false;
};

}  // namespace

std::vector<float> train_steps(TrainState& state, const NetworkConfig& net, const TrainConfig& cfg,
                               const Dataset& data, std::int64_t until,
                               const std::function<void(const StepInfo&)>& on_step) {
  std::vector<float> losses;
  if (state.iteration >= until) return losses;
  BatchSource source(data, cfg, state.rng_state);
  while (state.iteration < until) {
    Sampled s = source.next();
    for (auto& [name, p] : state.params) p.zero_grad();
    const double lr = lr_at(state.iteration, cfg);
    Tape<float> tape;
    TapeScope<float> scope(tape);
    auto pred = forward(s.batch.lr, state.params, net);
    auto loss = l1_loss(pred, s.batch.hr);
    if (!std::isfinite(loss.item())) {
      throw NumericError("training loss is not finite at iteration " + std::to_string(state.iteration));
    }
    backward(loss);
    adamw_step(state, lr, cfg);
    state.rng_state = s.rng_after;
    losses.push_back(loss.item());
    if (on_step) on_step(StepInfo{state.iteration, lr, loss.item(), pred, s.batch.hr});
  }
  for (auto& [name, p] : state.params) p.zero_grad();
  return losses;
}

namespace {

TrainState state_from_checkpoint(const Checkpoint& ckpt, const Config& cfg, const std::string& path) {
  const Config stored = parse_config(ckpt.config_text, path + " (embedded config)");
  if (!(stored.network == cfg.network)) {
    throw ConfigError(path + ": checkpoint network configuration differs from the requested one");
  }
  if (!ckpt.optimizer) throw ConfigError(path + ": checkpoint has no optimizer state to resume from");
  TrainState st;
  st.params = ckpt.params;
  for (auto& [name, p] : st.params) p.set_requires_grad();
  st.m = ckpt.optimizer->m;
  st.v = ckpt.optimizer->v;
  st.iteration = ckpt.optimizer->iteration;
  st.rng_state = ckpt.optimizer->rng_state;
  const auto layout = network_layout(cfg.network);
  for (const auto& spec : layout.specs()) {
    for (const auto* set : {&st.params, &st.m, &st.v}) {
      auto it = set->find(spec.name);
      if (it == set->end() || it->second.shape() != spec.shape) {
        throw ConfigError(path + ": parameter " + spec.name + " missing or misshapen in checkpoint");
      }
    }
  }
  return st;
}

Checkpoint to_checkpoint(const TrainState& st, const Config& cfg) {
  Checkpoint ck;
  ck.config_text = serialize_config(cfg);
  for (const auto& [name, p] : st.params) ck.params.emplace(name, p.clone());
  OptimizerState os;
  for (const auto& [name, t] : st.m) os.m.emplace(name, t.clone());
  for (const auto& [name, t] : st.v) os.v.emplace(name, t.clone());
  os.iteration = st.iteration;
  os.rng_state = st.rng_state;
  ck.optimizer = std::move(os);
  return ck;
}

}  // namespace

TrainState train_loop(const Config& cfg, const Dataset& data, const std::string& resume, std::ostream* progress) {
  cfg.validate();
  if (data.empty()) throw ConfigError("train: no usable training images");
  if (data.scale() != cfg.network.scale) throw ConfigError("train: dataset scale differs from network scale");
  TrainState state = resume.empty() ? initial_state(cfg.network, cfg.train)
                                    : state_from_checkpoint(checkpoint_load(resume), cfg, resume);
  namespace fs = std::filesystem;
  const fs::path out_dir(cfg.io.output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir.string() + ": cannot create output directory: " + ec.message());
  const std::string log_path = (out_dir / "metrics.log").string();
  std::ofstream log(log_path, std::ios::app);
  if (!log) throw IoError(log_path + ": cannot open metrics log");

  const auto start = std::chrono::steady_clock::now();
  double interval_loss = 0.0;
  std::int64_t interval_steps = 0;
  auto on_step = [&](const StepInfo& info) {
    interval_loss += info.loss;
    ++interval_steps;
    if (info.iter % cfg.train.log_every != 0) return;
    MetricRecord rec;
    rec.iter = info.iter;
    rec.lr = info.lr;
    rec.loss = interval_loss / static_cast<double>(interval_steps);
    rec.psnr = batch_psnr(info.pred, info.hr, cfg.network.scale);
    rec.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log << rec.format() << '\n';
    log.flush();
    if (!log) throw IoError(log_path + ": write failed");
    if (progress) *progress << rec.format() << std::endl;
    interval_loss = 0.0;
    interval_steps = 0;
  };

  const std::int64_t every = cfg.train.checkpoint_every;
  while (state.iteration < cfg.train.total_iters) {
    const std::int64_t next = std::min(cfg.train.total_iters, (state.iteration / every + 1) * every);
    train_steps(state, cfg.network, cfg.train, data, next, on_step);
    const Checkpoint ck = to_checkpoint(state, cfg);
    checkpoint_save((out_dir / ("ckpt_" + std::to_string(state.iteration) + ".osr")).string(), ck);
    checkpoint_save((out_dir / "last.osr").string(), ck);
  }
  return state;
}

}  // namespace omnisr
