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

#include "omnisr/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <vector>

#include "omnisr/file_io.hpp"

namespace omnisr {

namespace {

// libpng reports errors through longjmp. Everything with a destructor lives
// in these contexts, owned by the caller, so no C++ frame is skipped.
struct Codec {
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  std::string encoded;
  const png_byte* input = nullptr;
  std::size_t input_size = 0;
  std::size_t cursor = 0;
  char message[256] = {0};
};

void on_error(png_structp png, png_const_charp msg) {
  auto* ctx = static_cast<Codec*>(png_get_error_ptr(png));
  std::snprintf(ctx->message, sizeof(ctx->message), "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_bytes(png_structp png, png_bytep out, png_size_t n) {
  auto* ctx = static_cast<Codec*>(png_get_io_ptr(png));
  if (ctx->cursor + n > ctx->input_size) png_error(png, "unexpected end of file");
  std::memcpy(out, ctx->input + ctx->cursor, n);
  ctx->cursor += n;
}

void write_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* ctx = static_cast<Codec*>(png_get_io_ptr(png));
  ctx->encoded.append(reinterpret_cast<const char*>(data), n);
}

void flush_nothing(png_structp) {}

struct Decoded {
  png_uint_32 width = 0, height = 0;
  int source_depth = 0;
};

bool decode(Codec* ctx, Decoded* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, ctx, on_error, on_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, ctx, read_bytes);
  png_read_info(png, info);
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->source_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && out->source_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (out->source_depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8) {
    png_error(png, "unsupported pixel layout after conversion");
  }
  const std::size_t stride = png_get_rowbytes(png, info);
  ctx->pixels.resize(stride * out->height);
  ctx->rows.resize(out->height);
  for (png_uint_32 y = 0; y < out->height; ++y) ctx->rows[y] = ctx->pixels.data() + y * stride;
  png_read_image(png, ctx->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode(Codec* ctx, png_uint_32 width, png_uint_32 height, int color_type) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, ctx, on_error, on_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, ctx, write_bytes, flush_nothing);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, ctx->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

std::uint8_t to_byte(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
  return static_cast<std::uint8_t>(std::round(c));
}

Image png_read(const std::string& path) {
  const std::string bytes = read_file(path);
  Codec ctx;
  ctx.input = reinterpret_cast<const png_byte*>(bytes.data());
  ctx.input_size = bytes.size();
  if (bytes.size() < 8 || png_sig_cmp(ctx.input, 0, 8) != 0) throw IoError(path + ": not a PNG file");
  Decoded d;
  if (!decode(&ctx, &d)) throw IoError(path + ": PNG decode error: " + ctx.message);
  if (d.source_depth == 16) {
    std::cerr << "warning: " << path << ": 16-bit PNG reduced to 8 bits per sample\n";
  }
  const std::int64_t h = d.height, w = d.width;
  Image img(Shape{3, h, w});
  float* dst = img.data();
  for (std::int64_t y = 0; y < h; ++y) {
    const png_byte* row = ctx.rows[static_cast<std::size_t>(y)];
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t c = 0; c < 3; ++c) dst[(c * h + y) * w + x] = static_cast<float>(row[x * 3 + c]) / 255.0f;
    }
  }
  return img;
}

void png_write(const std::string& path, const Image& img) {
  if (img.rank() != 3 || (img.dim(0) != 3 && img.dim(0) != 1)) {
    throw ShapeError(path + ": png_write expects [3,H,W] or [1,H,W], got " + to_string(img.shape()));
  }
  const std::int64_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Codec ctx;
  ctx.pixels.resize(static_cast<std::size_t>(c * h * w));
  ctx.rows.resize(static_cast<std::size_t>(h));
  for (std::int64_t y = 0; y < h; ++y) {
    png_byte* row = ctx.pixels.data() + y * w * c;
    ctx.rows[static_cast<std::size_t>(y)] = row;
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t ch = 0; ch < c; ++ch) row[x * c + ch] = to_byte(img[(ch * h + y) * w + x]);
    }
  }
  const int color = c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  if (!encode(&ctx, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), color)) {
    throw IoError(path + ": PNG encode error: " + ctx.message);
  }
  write_file_atomic(path, ctx.encoded);
}

}  // namespace omnisr
