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

// OSR1 checkpoint container, all integers and floats little-endian:
//
//   "OSR1" | u32 version | u64 n + n bytes of config text
//   | u32 count | count x record | u8 has_optimizer
//   [ | i64 iteration | u64 rng_state | count x record (m) | count x record (v) ]
//   | u32 CRC-32 of every preceding byte
//
//   record = u32 n + n bytes of name | u32 rank | rank x u64 dims | f32 data

#include <cstdint>
#include <optional>
#include <string>

#include "omnisr/params.hpp"

namespace omnisr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct OptimizerState {
  ModelParams<float> m;
  ModelParams<float> v;
  std::int64_t iteration = 0;
  std::uint64_t rng_state = 0;
};

struct Checkpoint {
  std::string config_text;
  ModelParams<float> params;
  std::optional<OptimizerState> optimizer;
};

std::string encode_checkpoint(const Checkpoint& ckpt);

/// Validates magic, checksum and version before decoding anything.
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

void checkpoint_save(const std::string& path, const Checkpoint& ckpt);
Checkpoint checkpoint_load(const std::string& path);

/// FNV-1a over names, shapes and float bit patterns in name order.
std::uint64_t param_hash(const ModelParams<float>& params);

}  // namespace omnisr
