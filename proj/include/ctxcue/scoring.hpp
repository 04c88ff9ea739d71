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

// Zero-shot cue scores.
//
// Image-text matching scores a sample against K prompts by the dot product of
// unit-norm embeddings. The ensemble score of a class is the dot product with
// the plain (not re-normalized) mean of that class's prompt embeddings.
// Scores are then z-scored per class across the samples of one run and
// binarized at zero. Yes/no answers from a VQA model map directly to binary
// scores.

#pragma once

#include <cctype>
#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxcue/backend.hpp"
#include "ctxcue/error.hpp"
#include "ctxcue/prompt_text.hpp"
#include "ctxcue/text_util.hpp"

namespace ctxcue {

enum class ScoreState { kRaw, kNormalized, kBinary };

inline std::string_view to_string(ScoreState s) {
  switch (s) {
    case ScoreState::kRaw: return "raw";
    case ScoreState::kNormalized: return "normalized";
    case ScoreState::kBinary: return "binary";
  }
  return "?";
}

inline ScoreState score_state_from_string(std::string_view s) {
  if (s == "raw") return ScoreState::kRaw;
  if (s == "normalized") return ScoreState::kNormalized;
  if (s == "binary") return ScoreState::kBinary;
  throw DataError("unknown score state '" + std::string(s) + "'");
}

/// Identifies one (image, person) sample.
struct SampleKey {
  std::string sample_id;
  std::string image_id;
  std::string person_id;

  bool operator==(const SampleKey&) const = default;
};

inline std::string make_sample_id(const std::string& image_id,
                                  const std::string& person_id) {
  return image_id + "/" + person_id;
}

/// Per-sample VQA bookkeeping carried alongside binary scores.
struct VqaStats {
  std::size_t questions = 0;
  std::size_t parse_failures = 0;
};

/// N samples x K classes, row-major.
struct ScoreMatrix {
  std::vector<SampleKey> samples;
  std::vector<std::string> class_ids;
  std::vector<double> values;
  ScoreState state = ScoreState::kRaw;
  std::vector<VqaStats> vqa;  // empty, or one entry per sample

  std::size_t rows() const { return samples.size(); }
  std::size_t cols() const { return class_ids.size(); }
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, c);
    return out;
  }

  void check_shape() const {
    if (values.size() != rows() * cols()) {
      throw DataError("score matrix: values size != rows*cols");
    }
    if (!vqa.empty() && vqa.size() != rows()) {
      throw DataError("score matrix: vqa stats size != rows");
    }
  }
};

inline double dot(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw DataError("embedding dimension mismatch: " + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Entry k is the dot product of the image embedding with prompt k.
inline std::vector<double> similarity_scores(const Embedding& image,
                                             const std::vector<Embedding>& prompts) {
  std::vector<double> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) out.push_back(dot(image, p));
  return out;
}

/// Arithmetic mean of the prompt embeddings, not re-normalized.
inline Embedding centroid(const std::vector<Embedding>& prompts) {
  if (prompts.empty()) throw DataError("centroid of an empty prompt list");
  if (prompts.size() == 1) return prompts.front();
  Embedding c(prompts.front().size(), 0.0);
  for (const auto& p : prompts) {
    if (p.size() != c.size()) throw DataError("embedding dimension mismatch");
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += p[i];
  }
  const double inv = 1.0 / static_cast<double>(prompts.size());
  for (double& v : c) v *= inv;
  return c;
}

inline double ensemble_score(const Embedding& image,
                             const std::vector<Embedding>& class_prompts) {
  if (class_prompts.empty()) throw DataError("ensemble over zero prompts");
  return dot(image, centroid(class_prompts));
}

inline constexpr double kConstantColumnEpsilon = 1e-8;

/// Z-scores every column with the population standard deviation. Columns
/// whose std is below 1e-8 become all zeros.
inline ScoreMatrix normalize_scores(const ScoreMatrix& m) {
  m.check_shape();
  if (m.state != ScoreState::kRaw) throw DataError("normalize_scores expects raw scores");
  if (m.rows() == 0 || m.cols() == 0) throw DataError("normalize_scores: empty matrix");
  ScoreMatrix out = m;
  out.state = ScoreState::kNormalized;
  const double n = static_cast<double>(m.rows());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) mean += m.at(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double d = m.at(r, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      out.at(r, c) = sd < kConstantColumnEpsilon ? 0.0 : (m.at(r, c) - mean) / sd;
    }
  }
  return out;
}

/// 1 where value > threshold, else 0.
inline ScoreMatrix binarize(const ScoreMatrix& m, double threshold = 0.0) {
  m.check_shape();
  if (m.state != ScoreState::kNormalized) throw DataError("binarize expects normalized scores");
  if (!std::isfinite(threshold)) throw ConfigError("binarize: threshold must be finite");
  ScoreMatrix out = m;
  out.state = ScoreState::kBinary;
  for (double& v : out.values) v = v > threshold ? 1.0 : 0.0;
  return out;
}

struct VqaVerdict {
  bool positive = false;
  bool parse_ok = false;
  std::string raw_answer;
};

/// Case-folds, strips surrounding whitespace and punctuation, and reads the
/// first token: "yes" is positive, "no" negative, anything else negative with
/// parse_ok = false.
inline VqaVerdict parse_vqa_answer(std::string_view answer) {
  VqaVerdict v;
  v.raw_answer = std::string(answer);
  auto is_strip = [](unsigned char c) { return std::isspace(c) || std::ispunct(c); };
  std::string lowered;
  for (unsigned char c : answer) lowered.push_back(static_cast<char>(std::tolower(c)));
  std::size_t b = 0;
  while (b < lowered.size() && is_strip(lowered[b])) ++b;
  std::size_t e = b;
  while (e < lowered.size() && !std::isspace(static_cast<unsigned char>(lowered[e]))) ++e;
  std::string_view token(lowered.data() + b, e - b);
  while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.back()))) {
    token.remove_suffix(1);
  }
  if (token == "yes") {
    v.positive = true;
    v.parse_ok = true;
  } else if (token == "no") {
    v.parse_ok = true;
  }
  return v;
}

/// Asks one yes/no question, prefixed by `caption` when one is given and
/// non-empty.
inline VqaVerdict vqa_ask(Backend& backend, const ImageBuffer& image,
                          const VqaQuestion& question,
                          const std::optional<std::string>& caption) {
  if (!backend.capability().supports_vqa) throw BackendError("backend lacks VQA");
  std::string text = question.text;
  if (caption && !trim(*caption).empty()) text = compose_icl_input(*caption, question);
  VqaVerdict v = parse_vqa_answer(backend.vqa(image, text));
  if (!v.parse_ok) {
    std::clog << "warning: VQA answer not yes/no, counted negative: \""
              << v.raw_answer << "\"\n";
  }
  return v;
}

/// Asks one yes/no question. With `use_icl` the backend's caption of the same
/// image is prefixed to the question; an empty caption falls back to the
/// bare question.
inline VqaVerdict vqa_score(Backend& backend, const ImageBuffer& image,
                            const VqaQuestion& question, bool use_icl) {
  std::optional<std::string> caption;
  if (use_icl) {
    if (!backend.capability().supports_caption) {
      throw BackendError("backend lacks captioning");
    }
    caption = backend.caption(image);
  }
  return vqa_ask(backend, image, question, caption);
}

}  // namespace ctxcue
