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

// Visual prompts that point a vision-language model at one person.
//
// Two bases (whole image, person crop) times four styles (plain, ellipse
// outline, blurred background, gray background). The ellipse is axis aligned
// and inscribed in the person box grown by `ellipse_margin`; a pixel belongs
// to it when its center satisfies (x-cx)^2/a^2 + (y-cy)^2/b^2 <= 1. The same
// ellipse is the "foreground" mask for the blur and gray styles.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxcue/error.hpp"
#include "ctxcue/image.hpp"

namespace ctxcue {

enum class PromptBase { kFullImage, kPersonCrop };
enum class PromptStyle { kPlain, kEllipse, kBlur, kGray };

struct VisualPromptSpec {
  PromptBase base = PromptBase::kFullImage;
  PromptStyle style = PromptStyle::kEllipse;
  Rgb ellipse_color{255, 0, 0};
  double ellipse_margin = 0.05;
  std::optional<int> stroke;  // pixels; default derived from image diagonal
  double blur_sigma = 0.03;   // fraction of image diagonal
  double crop_margin = 0.10;

  /// Stroke width for an image of the given size.
  int stroke_for(const ImageBuffer& img) const {
    if (stroke) return *stroke;
    return std::max(2, static_cast<int>(std::ceil(0.0035 * img.diagonal())));
  }

  void validate() const {
    auto fraction = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError(std::string("visual prompt: ") + name +
                          " must be in [0,1]");
      }
    };
    fraction(ellipse_margin, "ellipse_margin");
    fraction(blur_sigma, "blur_sigma");
    fraction(crop_margin, "crop_margin");
    if (stroke && *stroke < 1) {
      throw ConfigError("visual prompt: stroke must be >= 1");
    }
  }
};

inline std::string_view to_string(PromptBase b) {
  return b == PromptBase::kFullImage ? "full_image" : "person_crop";
}

inline std::string_view to_string(PromptStyle s) {
  switch (s) {
    case PromptStyle::kPlain: return "plain";
    case PromptStyle::kEllipse: return "ellipse";
    case PromptStyle::kBlur: return "blur";
    case PromptStyle::kGray: return "gray";
  }
  return "?";
}

/// "<base>:<style>", e.g. "full_image:ellipse".
inline std::string spec_name(const VisualPromptSpec& s) {
  return std::string(to_string(s.base)) + ":" + std::string(to_string(s.style));
}

/// Parses "<base>:<style>" into a spec with default parameters.
inline VisualPromptSpec parse_spec_name(std::string_view name) {
  const auto colon = name.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("visual prompt spec must be <base>:<style>, got '" +
                      std::string(name) + "'");
  }
  const auto base = name.substr(0, colon);
  const auto style = name.substr(colon + 1);
  VisualPromptSpec spec;
  if (base == "full_image") {
    spec.base = PromptBase::kFullImage;
  } else if (base == "person_crop") {
    spec.base = PromptBase::kPersonCrop;
  } else {
    throw ConfigError("unknown visual prompt base '" + std::string(base) + "'");
  }
  if (style == "plain") {
    spec.style = PromptStyle::kPlain;
  } else if (style == "ellipse") {
    spec.style = PromptStyle::kEllipse;
  } else if (style == "blur") {
    spec.style = PromptStyle::kBlur;
  } else if (style == "gray") {
    spec.style = PromptStyle::kGray;
  } else {
    throw ConfigError("unknown visual prompt style '" + std::string(style) + "'");
  }
  return spec;
}

/// All eight base x style combinations with default parameters.
inline std::vector<VisualPromptSpec> all_visual_prompt_specs() {
  std::vector<VisualPromptSpec> out;
  for (auto base : {PromptBase::kFullImage, PromptBase::kPersonCrop}) {
    for (auto style : {PromptStyle::kPlain, PromptStyle::kEllipse,
                       PromptStyle::kBlur, PromptStyle::kGray}) {
      VisualPromptSpec s;
      s.base = base;
      s.style = style;
      out.push_back(s);
    }
  }
  return out;
}

/// Spec as JSON, including resolved defaults for the given image, for
/// reproducibility records. Stroke is reported as "auto" when unset.
inline nlohmann::json spec_to_json(const VisualPromptSpec& s) {
  nlohmann::json j;
  j["base"] = std::string(to_string(s.base));
  j["style"] = std::string(to_string(s.style));
  j["ellipse_color"] = {s.ellipse_color[0], s.ellipse_color[1],
                        s.ellipse_color[2]};
  j["ellipse_margin"] = s.ellipse_margin;
  j["stroke"] = s.stroke ? nlohmann::json(*s.stroke) : nlohmann::json("auto");
  j["blur_sigma"] = s.blur_sigma;
  j["crop_margin"] = s.crop_margin;
  return j;
}

/// Accepts either a "<base>:<style>" string or an object with optional
/// parameter overrides.
inline VisualPromptSpec spec_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_spec_name(j.get<std::string>());
  try {
    VisualPromptSpec s =
        parse_spec_name(j.at("base").get<std::string>() + ":" +
                        j.at("style").get<std::string>());
    if (j.contains("ellipse_color")) {
      const auto c = j["ellipse_color"].get<std::array<int, 3>>();
      for (int k = 0; k < 3; ++k) {
        if (c[k] < 0 || c[k] > 255) throw ConfigError("ellipse_color out of range");
        s.ellipse_color[k] = static_cast<std::uint8_t>(c[k]);
      }
    }
    if (j.contains("ellipse_margin")) s.ellipse_margin = j["ellipse_margin"].get<double>();
    if (j.contains("stroke") && !j["stroke"].is_string()) s.stroke = j["stroke"].get<int>();
    if (j.contains("blur_sigma")) s.blur_sigma = j["blur_sigma"].get<double>();
    if (j.contains("crop_margin")) s.crop_margin = j["crop_margin"].get<double>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("visual prompt spec: ") + e.what());
  }
}

/// Pixel bounding rectangle of the prompt ellipse.
inline PixelRect ellipse_rect(const ImageBuffer& img, const BBox& box,
                              const VisualPromptSpec& spec) {
  if (!box.valid()) throw DataError("invalid person box");
  const PixelRect r =
      expanded_pixel_rect(img.width(), img.height(), box, spec.ellipse_margin);
  if (r.width() <= 0 || r.height() <= 0 || r.area() < 4) {
    throw DataError("degenerate person region (area < 4 px after clipping)");
  }
  return r;
}

namespace detail {

struct Ellipse {
  double cx, cy, a, b;

  /// Midpoint criterion at the center of pixel (x, y), shrunk by `inset`.
  bool contains(int x, int y, double inset = 0.0) const {
    const double ai = a - inset, bi = b - inset;
    if (ai <= 0.0 || bi <= 0.0) return false;
    const double dx = (x + 0.5 - cx) / ai;
    const double dy = (y + 0.5 - cy) / bi;
    return dx * dx + dy * dy <= 1.0;
  }
};

inline Ellipse ellipse_of(const PixelRect& r) {
  return {(r.x1 + r.x2) / 2.0, (r.y1 + r.y2) / 2.0, r.width() / 2.0,
          r.height() / 2.0};
}

/// Row-major foreground mask (1 = inside the prompt ellipse).
inline std::vector<std::uint8_t> ellipse_mask(const ImageBuffer& img,
                                              const PixelRect& r) {
  const Ellipse e = ellipse_of(r);
  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(img.width()) * img.height(), 0);
  for (int y = r.y1; y < r.y2; ++y) {
    for (int x = r.x1; x < r.x2; ++x) {
      if (e.contains(x, y)) mask[static_cast<std::size_t>(y) * img.width() + x] = 1;
    }
  }
  return mask;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

inline std::uint8_t round_channel(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

/// Separable Gaussian blur with edge clamping; intermediate kept in double.
inline ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = img.width(), h = img.height();
  const auto src = img.bytes();
  std::vector<double> tmp(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int k = -radius; k <= radius; ++k) {
        const int xx = std::clamp(x + k, 0, w - 1);
        const std::size_t i = (static_cast<std::size_t>(y) * w + xx) * 3;
        const double wk = kernel[k + radius];
        acc[0] += wk * src[i];
        acc[1] += wk * src[i + 1];
        acc[2] += wk * src[i + 2];
      }
      const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
      tmp[o] = acc[0];
      tmp[o + 1] = acc[1];
      tmp[o + 2] = acc[2];
    }
  }
  ImageBuffer out = img;
  auto dst = out.bytes();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (int k = -radius; k <= radius; ++k) {
        const int yy = std::clamp(y + k, 0, h - 1);
        const std::size_t i = (static_cast<std::size_t>(yy) * w + x) * 3;
        const double wk = kernel[k + radius];
        acc[0] += wk * tmp[i];
        acc[1] += wk * tmp[i + 1];
        acc[2] += wk * tmp[i + 2];
      }
      const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
      dst[o] = round_channel(acc[0]);
      dst[o + 1] = round_channel(acc[1]);
      dst[o + 2] = round_channel(acc[2]);
    }
  }
  return out;
}

}  // namespace detail

/// Integer luma, round half up: (299R + 587G + 114B + 500) / 1000.
inline std::uint8_t luma(Rgb c) {
  return static_cast<std::uint8_t>((299u * c[0] + 587u * c[1] + 114u * c[2] + 500u) / 1000u);
}

inline ImageBuffer draw_ellipse(const ImageBuffer& img, const BBox& box,
                                const VisualPromptSpec& spec) {
  const PixelRect r = ellipse_rect(img, box, spec);
  const auto e = detail::ellipse_of(r);
  const double stroke = spec.stroke_for(img);
  ImageBuffer out = img;
  for (int y = r.y1; y < r.y2; ++y) {
    for (int x = r.x1; x < r.x2; ++x) {
      if (e.contains(x, y) && !e.contains(x, y, stroke)) {
        out.set(x, y, spec.ellipse_color);
      }
    }
  }
  return out;
}

inline ImageBuffer blur_outside(const ImageBuffer& img, const BBox& box,
                                const VisualPromptSpec& spec) {
  const PixelRect r = ellipse_rect(img, box, spec);
  const auto mask = detail::ellipse_mask(img, r);
  const ImageBuffer blurred =
      detail::gaussian_blur(img, spec.blur_sigma * img.diagonal());
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask[static_cast<std::size_t>(y) * img.width() + x]) {
        out.set(x, y, blurred.at(x, y));
      }
    }
  }
  return out;
}

inline ImageBuffer gray_outside(const ImageBuffer& img, const BBox& box,
                                const VisualPromptSpec& spec) {
  const PixelRect r = ellipse_rect(img, box, spec);
  const auto mask = detail::ellipse_mask(img, r);
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask[static_cast<std::size_t>(y) * img.width() + x]) {
        const std::uint8_t v = luma(img.at(x, y));
        out.set(x, y, {v, v, v});
      }
    }
  }
  return out;
}

/// Pixel rectangle cropped for the person-based prompts.
inline PixelRect crop_rect(const ImageBuffer& img, const BBox& box,
                           const VisualPromptSpec& spec) {
  if (!box.valid()) throw DataError("invalid person box");
  const PixelRect r =
      expanded_pixel_rect(img.width(), img.height(), box, spec.crop_margin);
  if (r.width() <= 0 || r.height() <= 0 || r.area() < 4) {
    throw DataError("degenerate person region (area < 4 px after clipping)");
  }
  return r;
}

inline ImageBuffer crop_person(const ImageBuffer& img, const BBox& box,
                               const VisualPromptSpec& spec) {
  const PixelRect r = crop_rect(img, box, spec);
  ImageBuffer out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      out.set(x, y, img.at(r.x1 + x, r.y1 + y));
    }
  }
  return out;
}

/// Person box re-expressed in the coordinates of its crop.
inline BBox box_in_crop(const ImageBuffer& img, const BBox& box,
                        const PixelRect& crop) {
  auto to_crop = [](double v, int offset, int extent) {
    return std::clamp((v - offset) / extent, 0.0, 1.0);
  };
  return {to_crop(box.x1 * img.width(), crop.x1, crop.width()),
          to_crop(box.y1 * img.height(), crop.y1, crop.height()),
          to_crop(box.x2 * img.width(), crop.x1, crop.width()),
          to_crop(box.y2 * img.height(), crop.y1, crop.height())};
}

inline ImageBuffer render_visual_prompt(const ImageBuffer& img,
                                        const BBox& box,
                                        const VisualPromptSpec& spec) {
  spec.validate();
  if (!box.valid()) throw DataError("invalid person box");
  ImageBuffer base = img;
  BBox target = box;
  if (spec.base == PromptBase::kPersonCrop) {
    const PixelRect r = crop_rect(img, box, spec);
    base = crop_person(img, box, spec);
    target = box_in_crop(img, box, r);
  }
  switch (spec.style) {
    case PromptStyle::kPlain: return base;
    case PromptStyle::kEllipse: return draw_ellipse(base, target, spec);
    case PromptStyle::kBlur: return blur_outside(base, target, spec);
    case PromptStyle::kGray: return gray_outside(base, target, spec);
  }
  return base;
}

}  // namespace ctxcue
