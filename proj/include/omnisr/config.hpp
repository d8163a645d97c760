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

// Flat INI configuration: [network], [train], [eval] and [io] sections of
// key = value lines. '#' and ';' start comments. Unknown sections or keys are
// rejected so typos never silently fall back to defaults.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "omnisr/network.hpp"
#include "omnisr/training.hpp"

namespace omnisr {

struct EvalConfig {
  std::vector<std::string> datasets;
  std::int64_t tile = 192;
  std::int64_t overlap = 16;

  bool operator==(const EvalConfig&) const = default;
};

struct IoConfig {
  std::string output_dir = "runs/omnisr";

  bool operator==(const IoConfig&) const = default;
};

struct Config {
  NetworkConfig network;
  TrainConfig train;
  EvalConfig eval;
  IoConfig io;

  bool operator==(const Config&) const = default;

  void validate() const;
};

/// Parses and validates. `origin` prefixes error messages.
Config parse_config(std::string_view text, const std::string& origin = "<config>");
Config load_config(const std::string& path);

/// Every field, in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const Config& cfg);

/// FNV-1a of the serialized form, as 16 hex digits.
std::string config_fingerprint(const Config& cfg);

std::string to_string(AttentionKind k);
std::string to_string(AugmentLaw a);

}  // namespace omnisr
