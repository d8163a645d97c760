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

// Central finite differences on the 64-bit path against tape gradients.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "omnisr/params.hpp"

namespace omnisr::verify {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t checked = 0;
  std::int64_t kinks = 0;  // coordinates skipped as non-differentiable points
  bool pass = false;
};

struct GradCheckOptions {
  double tol = 1e-4;
  /// Check at most this many coordinates per input (spread evenly); <= 0
  /// checks every coordinate.
  std::int64_t max_coords = 0;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

using LossFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Differentiates `loss(inputs)` on a tape and compares every selected
/// coordinate with (f(x + h) - f(x - h)) / 2h. The step starts at 1e-3 and
/// is refined to 1e-4 and 1e-5 while the estimate has not converged.
/// Coordinates where the one-sided slopes disagree at every step (a ReLU or
/// max-pool switch inside the stencil) are counted as kinks, not failures.
GradCheckResult gradcheck(const std::string& name, const LossFn& loss, std::vector<Tensor<double>> inputs,
                          const GradCheckOptions& opt = {});

/// Random tensor with N(0, sd^2) entries.
Tensor<double> random_tensor(const Shape& shape, SplitMix64& rng, double sd = 1.0);

/// sum(y * r) for a fixed random r seeded by `seed`, so every output
/// element carries a distinct weight.
Tensor<double> project(const Tensor<double>& y, std::uint64_t seed = 7);

}  // namespace omnisr::verify
