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

// Training protocol: bicubic-degraded LR/HR pairs, aligned random crops with
// flip/rotation augmentation, mean L1 objective, AdamW with decoupled weight
// decay and a step-halving learning rate.

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <functional>
#include <string>
#include <vector>

#include "omnisr/image.hpp"
#include "omnisr/network.hpp"

namespace omnisr {

/// Augmentation law. `flip_rotate`: horizontal flip with p = 1/2 and, independently,
/// no rotation with p = 1/2 or a 90 / 270 degree turn with p = 1/4 each.
/// `dihedral`: flip with p = 1/2 and a uniform quarter turn, i.e. all eight
/// poses equally likely.
enum class AugmentLaw { none, flip_rotate, dihedral };

struct TrainConfig {
  std::int64_t batch_size = 64;
  std::int64_t total_iters = 800000;
  double base_lr = 5e-4;
  std::int64_t halve_every = 200000;
  std::int64_t crop = 64;  // LR patch edge; the HR patch is crop * scale
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::vector<std::string> datasets;
  AugmentLaw augment = AugmentLaw::flip_rotate;
  std::int64_t log_every = 100;
  std::int64_t checkpoint_every = 10000;
  int prefetch = 0;  // batches prepared ahead on a worker thread

  bool operator==(const TrainConfig&) const = default;

  void validate(std::int64_t window) const;
};

/// lr = base * 0.5^floor(t / halve_every).
double lr_at(std::int64_t t, const TrainConfig& cfg);

// --------------------------------------------------------------------- data

struct TrainPair {
  std::string name;
  Image hr;  // cropped to a multiple of the scale
  Image lr;  // bicubic downsample of hr
};

class Dataset {
 public:
  explicit Dataset(int scale) : scale_(scale) {}

  /// Loads every *.png under the given directories (sorted by path). Images
  /// whose LR side would be smaller than `min_lr` are skipped with a warning.
  static Dataset from_directories(const std::vector<std::string>& roots, int scale, std::int64_t min_lr);

  /// Adds an HR image; returns false (and warns) when it is undersized.
  bool add(std::string name, const Image& hr, std::int64_t min_lr);

  int scale() const { return scale_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const TrainPair& operator[](std::size_t i) const { return pairs_[i]; }

 private:
  int scale_;
  std::vector<TrainPair> pairs_;
};

struct Augment {
  bool flip = false;
  int quarter_turns = 0;  // counter-clockwise
};

Augment draw_augment(AugmentLaw law, SplitMix64& rng);

/// Flip first, then rotate.
Image apply_augment(const Image& img, const Augment& a);

struct Batch {
  Tensor<float> lr;  // [B, 3, crop, crop]
  Tensor<float> hr;  // [B, 3, crop * scale, crop * scale]
};

/// One crop record per batch item, for inspection and tests.
struct CropRecord {
  std::size_t image = 0;
  std::int64_t lr_y = 0, lr_x = 0;
  Augment augment;
};

/// Draws image index, LR offset and augmentation per item from `rng`. The
/// HR window sits at scale times the LR offset.
Batch sample_batch(const Dataset& data, const TrainConfig& cfg, SplitMix64& rng,
                   std::vector<CropRecord>* records = nullptr);

// --------------------------------------------------------------------- loss

/// Mean absolute error. d/dpred = sign(pred - target) / numel with sign(0) = 0.
template <typename Scalar>
Tensor<Scalar> l1_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("l1_loss: shape mismatch " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  }
  const std::int64_t n = pred.numel();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  auto out = Tensor<Scalar>::scalar(static_cast<Scalar>(acc / static_cast<double>(n)));
  if (auto* tape = detail::recording<Scalar>(pred, target)) {
    out.set_requires_grad();
    tape->record([pn = pred.node(), tn = target.node(), on = out.node(), n] {
      if (on->grad.empty()) return;
      const Scalar g = on->grad[0] / static_cast<Scalar>(n);
      for (std::size_t i = 0; i < pn->value.size(); ++i) {
        const Scalar d = pn->value[i] - tn->value[i];
        const Scalar s = d > Scalar(0) ? g : (d < Scalar(0) ? -g : Scalar(0));
        if (pn->requires_grad) pn->grad_buffer()[i] += s;
        if (tn->requires_grad) tn->grad_buffer()[i] -= s;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- optimizer

struct TrainState {
  ModelParams<float> params;
  ModelParams<float> m;  // first moments, same shapes as params
  ModelParams<float> v;  // second moments
  std::int64_t iteration = 0;
  std::uint64_t rng_state = 0;
};

/// Fresh parameters from the network seed, zero moments, sampler seeded
/// from the training seed.
TrainState initial_state(const NetworkConfig& net, const TrainConfig& cfg);

/// One AdamW update from the gradients held by state.params:
///   theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps).
/// Increments state.iteration. Throws NumericError, leaving the state
/// untouched, if any gradient is not finite.
void adamw_step(TrainState& state, double lr, const TrainConfig& cfg);

// -------------------------------------------------------------------- loop

struct MetricRecord {
  std::int64_t iter = 0;
  double lr = 0.0;
  double loss = 0.0;   // mean training loss over the interval
  double psnr = 0.0;   // Y-channel PSNR of the interval's last batch
  double wall = 0.0;   // seconds since the loop started

  /// "iter=.. lr=.. loss=.. psnr=.. wall=..", wall always last.
  std::string format() const;
};

/// What a training step exposes to observers.
struct StepInfo {
  std::int64_t iter;  // iterations completed, this step included
  double lr;
  float loss;
  const Tensor<float>& pred;
  const Tensor<float>& hr;
};

/// Runs iterations until state.iteration reaches `until`; returns the
/// per-step losses. Batches come from the sampler seeded by state.rng_state,
/// prepared cfg.prefetch batches ahead on a worker thread when positive.
std::vector<float> train_steps(TrainState& state, const NetworkConfig& net, const TrainConfig& cfg,
                               const Dataset& data, std::int64_t until,
                               const std::function<void(const StepInfo&)>& on_step = {});

/// Mean Y-channel PSNR over the items of a [B, 3, H, W] batch, predictions
/// clamped to [0, 1].
double batch_psnr(const Tensor<float>& pred, const Tensor<float>& hr, std::int64_t shave);

struct Config;

/// Full protocol: trains to cfg.train.total_iters, appending one metrics
/// record per interval to <output_dir>/metrics.log and writing checkpoints
/// <output_dir>/ckpt_<iter>.osr plus <output_dir>/last.osr. Resumes from
/// `resume` when it is non-empty. Metric lines are also echoed to
/// `progress` when given.
TrainState train_loop(const Config& cfg, const Dataset& data, const std::string& resume = {},
                      std::ostream* progress = nullptr);

}  // namespace omnisr
