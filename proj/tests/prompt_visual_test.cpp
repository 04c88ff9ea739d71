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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "ctxcue/png_io.hpp"
#include "ctxcue/prompt_visual.hpp"
#include "test_support.hpp"

namespace ctxcue {
namespace {

using testing::noise_image;

const BBox kPhotoBox{0.3, 0.25, 0.6, 0.9};

// Mask recomputed from the documented geometry, independent of the library.
bool oracle_inside(const PixelRect& r, int x, int y) {
  const double cx = (r.x1 + r.x2) / 2.0, cy = (r.y1 + r.y2) / 2.0;
  const double a = (r.x2 - r.x1) / 2.0, b = (r.y2 - r.y1) / 2.0;
  const double dx = (x + 0.5 - cx) / a, dy = (y + 0.5 - cy) / b;
  return dx * dx + dy * dy <= 1.0;
}

TEST(VisualGeometry, WorkedEllipseRect) {
  const ImageBuffer img(100, 100);
  const auto r = ellipse_rect(img, {0.2, 0.2, 0.6, 0.6}, VisualPromptSpec{});
  EXPECT_EQ(r, (PixelRect{18, 18, 62, 62}));
}

TEST(VisualGeometry, WorkedCrop) {
  const ImageBuffer img = noise_image(100, 100, 3);
  const VisualPromptSpec spec;
  EXPECT_EQ(crop_rect(img, {0.2, 0.2, 0.6, 0.6}, spec), (PixelRect{16, 16, 64, 64}));
  const auto crop = crop_person(img, {0.2, 0.2, 0.6, 0.6}, spec);
  ASSERT_EQ(crop.width(), 48);
  ASSERT_EQ(crop.height(), 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) ASSERT_EQ(crop.at(x, y), img.at(16 + x, 16 + y));
  }
}

TEST(VisualGeometry, FullBoxZeroMarginCropIsIdentity) {
  const ImageBuffer img = noise_image(37, 23, 4);
  VisualPromptSpec spec;
  spec.crop_margin = 0.0;
  EXPECT_EQ(crop_person(img, {0, 0, 1, 1}, spec), img);
}

TEST(VisualGeometry, EdgeBoxIsClipped) {
  const ImageBuffer img = noise_image(50, 40, 5);
  const VisualPromptSpec spec;
  const auto r = crop_rect(img, {0.9, 0.0, 1.0, 0.2}, spec);
  EXPECT_EQ(r.x2, 50);
  EXPECT_EQ(r.y1, 0);
  const auto crop = crop_person(img, {0.9, 0.0, 1.0, 0.2}, spec);
  EXPECT_EQ(crop.width(), r.width());
}

TEST(VisualGeometry, DegenerateRegionRejected) {
  const ImageBuffer img(10, 10);
  const VisualPromptSpec spec;
  EXPECT_THROW(draw_ellipse(img, {0.5, 0.5, 0.51, 0.51}, spec), DataError);
  EXPECT_THROW(crop_person(img, {0.5, 0.5, 0.51, 0.51}, spec), DataError);
  EXPECT_THROW(gray_outside(img, {0.6, 0.5, 0.4, 0.7}, spec), DataError);
}

TEST(VisualGeometry, BlurSigmaFromDiagonal) {
  const ImageBuffer img(64, 64);
  const double sigma = VisualPromptSpec{}.blur_sigma * img.diagonal();
  EXPECT_NEAR(sigma, 2.715, 5e-4);
  const auto k = detail::gaussian_kernel(sigma);
  EXPECT_EQ(k.size(), 2u * 9u + 1u);  // radius ceil(3 sigma) = 9
  double sum = 0;
  for (double v : k) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(VisualGeometry, DefaultStroke) {
  VisualPromptSpec spec;
  EXPECT_EQ(spec.stroke_for(ImageBuffer(64, 64)), 2);
  EXPECT_EQ(spec.stroke_for(ImageBuffer(1000, 1000)), 5);  // ceil(0.0035 * 1414.2)
  spec.stroke = 7;
  EXPECT_EQ(spec.stroke_for(ImageBuffer(64, 64)), 7);
}

TEST(DrawEllipse, StrokeColorAndPreservation) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const ImageBuffer img = noise_image(30 + trial, 40, trial);
    const BBox box = testing::random_box(rng, 0.2);
    VisualPromptSpec spec;
    spec.ellipse_color = {255, 0, 0};
    const auto out = draw_ellipse(img, box, spec);
    const auto r = ellipse_rect(img, box, spec);
    std::size_t stroked = 0;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const bool in_rect = x >= r.x1 && x < r.x2 && y >= r.y1 && y < r.y2;
        if (out.at(x, y) != img.at(x, y)) {
          ASSERT_TRUE(in_rect);
          ASSERT_TRUE(oracle_inside(r, x, y));
          ASSERT_EQ(out.at(x, y), (Rgb{255, 0, 0}));
          ++stroked;
        }
      }
    }
    EXPECT_GT(stroked, 0u);
    // The center of the ellipse is never stroked.
    const int cx = (r.x1 + r.x2) / 2, cy = (r.y1 + r.y2) / 2;
    if (r.width() > 10 && r.height() > 10) {
      EXPECT_EQ(out.at(cx, cy), img.at(cx, cy));
    }
  }
}

TEST(BlurOutside, UniformImageUnchanged) {
  const ImageBuffer img(40, 30, Rgb{90, 140, 200});
  EXPECT_EQ(blur_outside(img, {0.2, 0.2, 0.5, 0.8}, VisualPromptSpec{}), img);
}

TEST(BlurOutside, MatchesDirectConvolutionOutsideAndPreservesInside) {
  const ImageBuffer img = noise_image(48, 36, 21);
  const BBox box{0.25, 0.2, 0.55, 0.85};
  const VisualPromptSpec spec;
  const auto out = blur_outside(img, box, spec);
  const auto r = ellipse_rect(img, box, spec);
  const double sigma = spec.blur_sigma * img.diagonal();
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (oracle_inside(r, x, y)) {
        ASSERT_EQ(out.at(x, y), img.at(x, y));
        continue;
      }
      // Direct 2-D convolution with clamped edges.
      double acc[3] = {0, 0, 0}, wsum = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
          const auto p = img.at(std::clamp(x + dx, 0, img.width() - 1),
                                std::clamp(y + dy, 0, img.height() - 1));
          for (int c = 0; c < 3; ++c) acc[c] += w * p[c];
          wsum += w;
        }
      }
      for (int c = 0; c < 3; ++c) {
        ASSERT_LE(std::abs(out.at(x, y)[c] - std::floor(acc[c] / wsum + 0.5)), 1.0) << x << "," << y;
      }
    }
  }
}

TEST(GrayOutside, WorkedPixels) {
  ImageBuffer img(20, 20, Rgb{200, 100, 50});
  img.set(10, 10, {10, 200, 30});
  img.set(0, 1, {77, 77, 77});
  const auto out = gray_outside(img, {0.3, 0.3, 0.7, 0.7}, VisualPromptSpec{});
  EXPECT_EQ(out.at(0, 0), (Rgb{124, 124, 124}));
  EXPECT_EQ(out.at(0, 1), (Rgb{77, 77, 77}));
  EXPECT_EQ(out.at(10, 10), (Rgb{10, 200, 30}));
}

TEST(GrayOutside, LumaMatchesRealFormulaRoundHalfUp) {
  for (int r = 0; r < 256; r += 5) {
    for (int g = 0; g < 256; g += 7) {
      for (int b = 0; b < 256; b += 11) {
        const double y = 0.299 * r + 0.587 * g + 0.114 * b;
        const auto expected = static_cast<int>(std::floor(y + 0.5 + 1e-9));
        ASSERT_EQ(luma({std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)}), expected);
      }
    }
  }
}

TEST(GrayOutside, IdempotentAndMaskPreserving) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const ImageBuffer img = noise_image(25 + trial, 31, 100 + trial);
    const BBox box = testing::random_box(rng, 0.25);
    const VisualPromptSpec spec;
    const auto once = gray_outside(img, box, spec);
    EXPECT_EQ(gray_outside(once, box, spec), once);
    const auto r = ellipse_rect(img, box, spec);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        if (oracle_inside(r, x, y)) {
          ASSERT_EQ(once.at(x, y), img.at(x, y));
        } else {
          const auto p = once.at(x, y);
          ASSERT_TRUE(p[0] == p[1] && p[1] == p[2]);
        }
      }
    }
  }
}

TEST(RenderVisualPrompt, DispatchAndShapes) {
  const ImageBuffer img = noise_image(60, 45, 8);
  const BBox box{0.2, 0.3, 0.5, 0.9};
  const ImageBuffer before = img;
  for (const auto& spec : all_visual_prompt_specs()) {
    const auto out = render_visual_prompt(img, box, spec);
    if (spec.base == PromptBase::kFullImage) {
      EXPECT_EQ(out.width(), 60);
      EXPECT_EQ(out.height(), 45);
    } else {
      const auto r = crop_rect(img, box, spec);
      EXPECT_EQ(out.width(), r.width());
      EXPECT_EQ(out.height(), r.height());
    }
  }
  EXPECT_EQ(img, before);
  EXPECT_EQ(render_visual_prompt(img, box, parse_spec_name("full_image:plain")), img);
  EXPECT_EQ(render_visual_prompt(img, box, parse_spec_name("person_crop:plain")),
            crop_person(img, box, VisualPromptSpec{}));
}

TEST(RenderVisualPrompt, PersonCropEllipseUsesOriginalBox) {
  const ImageBuffer img = noise_image(100, 100, 9);
  const BBox box{0.2, 0.2, 0.6, 0.6};
  const VisualPromptSpec spec = parse_spec_name("person_crop:ellipse");
  const auto crop = crop_person(img, box, spec);
  const auto inner = box_in_crop(img, box, crop_rect(img, box, spec));
  EXPECT_NEAR(inner.x1, 4.0 / 48.0, 1e-12);
  EXPECT_NEAR(inner.x2, 44.0 / 48.0, 1e-12);
  EXPECT_EQ(render_visual_prompt(img, box, spec), draw_ellipse(crop, inner, spec));
}

TEST(RenderVisualPrompt, FixturePhotoAllEightDistinctAndGolden) {
  const ImageBuffer photo = read_png(testing::data_path("photo.png"));
  const auto goldens = nlohmann::json::parse(read_file(testing::data_path("visual_prompt_goldens.json")));
  std::set<std::uint64_t> hashes;
  for (const auto& spec : all_visual_prompt_specs()) {
    const auto out = render_visual_prompt(photo, kPhotoBox, spec);
    hashes.insert(content_hash(out));
    EXPECT_EQ(hex64(fnv1a64(encode_png(out))), goldens.at(spec_name(spec)).get<std::string>())
        << spec_name(spec);
  }
  EXPECT_EQ(hashes.size(), 8u);
}

TEST(VisualPromptSpec, ParseAndJson) {
  EXPECT_THROW(parse_spec_name("full_image"), ConfigError);
  EXPECT_THROW(parse_spec_name("whole:plain"), ConfigError);
  EXPECT_THROW(parse_spec_name("full_image:sparkle"), ConfigError);
  for (const auto& spec : all_visual_prompt_specs()) {
    EXPECT_EQ(spec_name(parse_spec_name(spec_name(spec))), spec_name(spec));
    const auto back = spec_from_json(spec_to_json(spec));
    EXPECT_EQ(spec_name(back), spec_name(spec));
    EXPECT_EQ(back.ellipse_margin, spec.ellipse_margin);
    EXPECT_EQ(back.stroke, spec.stroke);
  }
  VisualPromptSpec bad;
  bad.blur_sigma = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Png, RoundTripRgbAndGray16) {
  const ImageBuffer img = noise_image(13, 7, 1);
  EXPECT_EQ(decode_png(encode_png(img)), img);
  EXPECT_EQ(encode_png(img), encode_png(img));
  Gray16Image g{5, 3, {0, 1, 2, 65535, 40000, 7, 8, 9, 10, 11, 12, 13, 14, 15, 300}};
  const auto back = decode_png_gray16(encode_png_gray16(g));
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.values, g.values);
  EXPECT_THROW(decode_png("not a png"), DataError);
}

}  // namespace
}  // namespace ctxcue
