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

// Procedural test imagery: smooth shading, oriented gratings, hard-edged
// discs and a little grain. Deterministic in the seed.

#include <cstdint>

#include "omnisr/image.hpp"

namespace omnisr::verify {

Image synthetic_image(std::uint64_t seed, std::int64_t h, std::int64_t w);

}  // namespace omnisr::verify
