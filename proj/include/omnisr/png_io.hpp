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

// PNG codec for the 8-bit subset benchmark datasets use. Grayscale is
// replicated to three channels, alpha and palettes are expanded then alpha is
// dropped, 16-bit samples are reduced to 8 bits with a warning.

#include <cstdint>
#include <string>

#include "omnisr/image.hpp"

namespace omnisr {

/// Decodes to [3, H, W] with values byte / 255.
Image png_read(const std::string& path);

/// Encodes [3, H, W] (or [1, H, W]) as 8-bit RGB (or gray). Values are
/// clamped to [0, 1] and rounded half away from zero. Written atomically.
void png_write(const std::string& path, const Image& img);

/// Float sample to byte: clamp, scale by 255, round half away from zero.
std::uint8_t to_byte(float v);

}  // namespace omnisr
