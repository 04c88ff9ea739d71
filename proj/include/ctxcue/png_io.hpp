/*
 * Copyright 2026 The ctxcue Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// PNG reading through libpng and a small deterministic PNG writer.
//
// The writer emits filter type 0 scanlines inside stored (uncompressed)
// deflate blocks, so identical pixels always produce identical file bytes,
// independent of the zlib build. Files are larger than compressed PNGs; the
// toolkit favors byte-stable goldens over size.

#pragma once

#include <png.h>
#include <zlib.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctxcue/error.hpp"
#include "ctxcue/image.hpp"
#include "ctxcue/text_util.hpp"

namespace ctxcue {

/// Gray 16-bit image, row-major.
struct Gray16Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> values;
};

namespace detail {

inline void put_u32be(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

inline void put_chunk(std::string& out, const char type[4],
                      std::string_view data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_pos = out.size();
  out.append(type, 4);
  out.append(data);
  const auto* p = reinterpret_cast<const Bytef*>(out.data() + type_pos);
  const uLong crc = ::crc32(0L, p, static_cast<uInt>(4 + data.size()));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

/// zlib stream made only of stored blocks.
inline std::string stored_zlib(std::string_view raw) {
  std::string z;
  z.push_back(static_cast<char>(0x78));
  z.push_back(static_cast<char>(0x01));
  std::size_t pos = 0;
  do {
    const std::size_t n = std::min<std::size_t>(65535, raw.size() - pos);
    const bool final_block = pos + n == raw.size();
    z.push_back(static_cast<char>(final_block ? 1 : 0));
    z.push_back(static_cast<char>(n & 0xff));
    z.push_back(static_cast<char>((n >> 8) & 0xff));
    z.push_back(static_cast<char>(~n & 0xff));
    z.push_back(static_cast<char>((~n >> 8) & 0xff));
    z.append(raw.substr(pos, n));
    pos += n;
  } while (pos < raw.size());
  const uLong adler = ::adler32(
      ::adler32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(raw.data()),
      static_cast<uInt>(raw.size()));
  put_u32be(z, static_cast<std::uint32_t>(adler));
  return z;
}

inline std::string encode_png_raw(int width, int height, int bit_depth,
                                  int color_type, int bytes_per_row,
                                  const std::string& rows) {
  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(width));
  put_u32be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(static_cast<char>(bit_depth));
  ihdr.push_back(static_cast<char>(color_type));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // interlace
  put_chunk(png, "IHDR", ihdr);

  std::string raw;
  raw.reserve(static_cast<std::size_t>(height) * (bytes_per_row + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    raw.append(rows, static_cast<std::size_t>(y) * bytes_per_row,
               bytes_per_row);
  }
  put_chunk(png, "IDAT", stored_zlib(raw));
  put_chunk(png, "IEND", {});
  return png;
}

}  // namespace detail

inline std::string encode_png(const ImageBuffer& img) {
  const auto b = img.bytes();
  return detail::encode_png_raw(img.width(), img.height(), 8, 2,
                                img.width() * 3,
                                std::string(b.begin(), b.end()));
}

inline std::string encode_png_gray16(const Gray16Image& img) {
  std::string rows;
  rows.reserve(img.values.size() * 2);
  for (std::uint16_t v : img.values) {
    rows.push_back(static_cast<char>(v >> 8));
    rows.push_back(static_cast<char>(v & 0xff));
  }
  return detail::encode_png_raw(img.width, img.height, 16, 0, img.width * 2,
                                rows);
}

/// Decodes any PNG into 8-bit RGB. Alpha is composited onto black.
inline ImageBuffer decode_png(std::string_view data) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, data.data(), data.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("PNG decode: " + msg);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&image, &background, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("PNG decode: " + msg);
  }
  return ImageBuffer(static_cast<int>(image.width),
                     static_cast<int>(image.height), std::move(pixels));
}

/// Decodes a grayscale PNG at 16 bits per sample (8-bit input is widened).
inline Gray16Image decode_png_gray16(std::string_view data) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, data.data(), data.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("PNG decode: " + msg);
  }
  // 16-bit files without gAMA are treated as linear by the simplified API,
  // so LINEAR_Y returns raw samples. 8-bit files are read as-is and widened.
  const bool sixteen = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  Gray16Image out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height;
  out.values.resize(n);
  bool ok;
  if (sixteen) {
    image.format = PNG_FORMAT_LINEAR_Y;
    ok = png_image_finish_read(&image, nullptr, out.values.data(), 0, nullptr);
  } else {
    image.format = PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> narrow(n);
    ok = png_image_finish_read(&image, nullptr, narrow.data(), 0, nullptr);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = narrow[i] * 257;
  }
  if (!ok) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("PNG decode: " + msg);
  }
  return out;
}

inline ImageBuffer read_png(const std::string& path) {
  return decode_png(read_file(path));
}

inline void write_png(const std::string& path, const ImageBuffer& img) {
  write_file(path, encode_png(img));
}

}  // namespace ctxcue
