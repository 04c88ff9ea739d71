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

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctxcue/error.hpp"
#include "ctxcue/hash.hpp"

namespace ctxcue {

using Rgb = std::array<std::uint8_t, 3>;

/// Row-major 8-bit RGB image.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, Rgb fill = {0, 0, 0})
      : width_(width), height_(height) {
    if (width < 1 || height < 1) throw DataError("image dimensions must be >= 1");
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill[0];
      pixels_[i + 1] = fill[1];
      pixels_[i + 2] = fill[2];
    }
  }
  ImageBuffer(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) throw DataError("image dimensions must be >= 1");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 3) {
      throw DataError("pixel buffer length != width*height*3");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  double diagonal() const { return std::hypot(width_, height_); }

  std::span<const std::uint8_t> bytes() const { return pixels_; }
  std::span<std::uint8_t> bytes() { return pixels_; }

  Rgb at(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = index(x, y);
    pixels_[i] = c[0];
    pixels_[i + 1] = c[1];
    pixels_[i + 2] = c[2];
  }

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Canonical byte form used for content hashing: u32 LE width, u32 LE
/// height, then the RGB bytes.
inline std::uint64_t content_hash(const ImageBuffer& img) {
  std::uint8_t header[8];
  const auto w = static_cast<std::uint32_t>(img.width());
  const auto h = static_cast<std::uint32_t>(img.height());
  for (int i = 0; i < 4; ++i) {
    header[i] = static_cast<std::uint8_t>(w >> (8 * i));
    header[4 + i] = static_cast<std::uint8_t>(h >> (8 * i));
  }
  return fnv1a64(img.bytes(), fnv1a64(std::span<const std::uint8_t>(header)));
}

/// Normalized box, 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 1, y2 = 1;

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && 0.0 <= x1 && x1 < x2 && x2 <= 1.0 &&
           0.0 <= y1 && y1 < y2 && y2 <= 1.0;
  }

  /// Boundary-inclusive containment.
  bool contains(double x, double y) const {
    return x >= x1 && x <= x2 && y >= y1 && y <= y2;
  }

  bool operator==(const BBox&) const = default;
};

/// Half-open pixel rectangle [x1, x2) x [y1, y2).
struct PixelRect {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool operator==(const PixelRect&) const = default;
};

/// Box grown by `margin` times its own width/height on every side, scaled to
/// pixels, rounded to the nearest pixel edge and clipped to the image.
inline PixelRect expanded_pixel_rect(int width, int height, const BBox& box,
                                     double margin) {
  const double bx1 = box.x1 * width, bx2 = box.x2 * width;
  const double by1 = box.y1 * height, by2 = box.y2 * height;
  const double mx = margin * (bx2 - bx1), my = margin * (by2 - by1);
  auto clampi = [](double v, int hi) {
    const long r = std::lround(v);
    return static_cast<int>(r < 0 ? 0 : (r > hi ? hi : r));
  };
  return {clampi(bx1 - mx, width), clampi(by1 - my, height),
          clampi(bx2 + mx, width), clampi(by2 + my, height)};
}

}  // namespace ctxcue
