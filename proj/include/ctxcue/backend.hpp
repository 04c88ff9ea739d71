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

// Vision-language model access. Models live out of process; the toolkit only
// sees embeddings, answers and captions through the Backend interface. A
// deterministic mock implementation backs tests and offline runs.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxcue/error.hpp"
#include "ctxcue/hash.hpp"
#include "ctxcue/image.hpp"
#include "ctxcue/parallel.hpp"

namespace ctxcue {

using Embedding = std::vector<double>;

inline constexpr double kUnitNormTolerance = 1e-4;

inline double l2_norm(const Embedding& e) {
  double s = 0.0;
  for (double v : e) s += v * v;
  return std::sqrt(s);
}

/// Throws BackendError unless `e` has dimension `dim`, finite entries and
/// unit norm within kUnitNormTolerance.
inline void check_embedding(const Embedding& e, std::size_t dim) {
  if (e.size() != dim) {
    throw BackendError("embedding dimension " + std::to_string(e.size()) +
                       " != expected " + std::to_string(dim));
  }
  for (double v : e) {
    if (!std::isfinite(v)) throw BackendError("embedding has non-finite entry");
  }
  if (std::abs(l2_norm(e) - 1.0) > kUnitNormTolerance) {
    throw BackendError("embedding is not unit norm");
  }
}

enum class BackendKind { kMock, kRemote };

struct BackendDescriptor {
  BackendKind kind = BackendKind::kMock;
  std::string endpoint;        // remote only, e.g. "http://127.0.0.1:8080"
  std::size_t embedding_dim = 64;  // remote: 0 means "take from /v1/health"
  std::string model_tag = "mock";
  double timeout_s = 30.0;
  std::size_t max_inflight = 4;
  std::size_t retries = 3;     // total attempts per request
  std::string cache_dir;       // empty disables the on-disk cache

  void validate() const {
    if (max_inflight < 1) throw ConfigError("backend: max_inflight must be >= 1");
    if (retries < 1) throw ConfigError("backend: retries must be >= 1");
    if (kind == BackendKind::kMock && embedding_dim < 2) {
      throw ConfigError("backend: embedding_dim must be >= 2");
    }
    if (kind == BackendKind::kRemote) {
      if (endpoint.empty()) throw ConfigError("backend: remote needs an endpoint");
      if (embedding_dim == 1) throw ConfigError("backend: embedding_dim must be >= 2");
    }
    if (!(timeout_s > 0)) throw ConfigError("backend: timeout must be positive");
  }
};

inline nlohmann::json descriptor_to_json(const BackendDescriptor& d) {
  return {{"kind", d.kind == BackendKind::kMock ? "mock" : "remote"},
          {"endpoint", d.endpoint},
          {"embedding_dim", d.embedding_dim},
          {"model_tag", d.model_tag},
          {"timeout", d.timeout_s},
          {"max_inflight", d.max_inflight},
          {"retries", d.retries}};
}

inline BackendDescriptor descriptor_from_json(const nlohmann::json& j) {
  BackendDescriptor d;
  try {
    const auto kind = j.value("kind", std::string("mock"));
    if (kind == "mock") {
      d.kind = BackendKind::kMock;
    } else if (kind == "remote") {
      d.kind = BackendKind::kRemote;
      d.embedding_dim = 0;
      d.model_tag.clear();
    } else {
      throw ConfigError("backend: unknown kind '" + kind + "'");
    }
    d.endpoint = j.value("endpoint", d.endpoint);
    d.embedding_dim = j.value("embedding_dim", d.embedding_dim);
    d.model_tag = j.value("model_tag", d.model_tag);
    d.timeout_s = j.value("timeout", d.timeout_s);
    d.max_inflight = j.value("max_inflight", d.max_inflight);
    d.retries = j.value("retries", d.retries);
    d.cache_dir = j.value("cache_dir", d.cache_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("backend descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

struct BackendCapability {
  bool supports_itm = false;
  bool supports_vqa = false;
  bool supports_caption = false;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;
  virtual BackendCapability capability() const = 0;
  /// Embedding dimension actually served.
  virtual std::size_t dim() const = 0;

  virtual Embedding embed_image(const ImageBuffer& image) = 0;
  virtual Embedding embed_text(const std::string& text) = 0;
  virtual std::string vqa(const ImageBuffer& image,
                          const std::string& question) = 0;
  virtual std::string caption(const ImageBuffer& image) = 0;

  /// Batch helpers: at most max_inflight concurrent calls, results in input
  /// order.
  std::vector<Embedding> embed_images(const std::vector<ImageBuffer>& images) {
    return ordered_parallel_map(images.size(), descriptor().max_inflight,
                                [&](std::size_t i) { return embed_image(images[i]); });
  }
  std::vector<Embedding> embed_texts(const std::vector<std::string>& texts) {
    return ordered_parallel_map(texts.size(), descriptor().max_inflight,
                                [&](std::size_t i) { return embed_text(texts[i]); });
  }
};

/// Deterministic embedding of a byte string: xorshift64* seeded by the
/// 64-bit FNV-1a hash, `dim` draws mapped to [-1, 1), L2-normalized.
inline Embedding mock_embedding(std::uint64_t content_hash, std::size_t dim) {
  XorShift64Star rng(content_hash);
  Embedding e(dim);
  double norm2 = 0.0;
  for (auto& v : e) {
    v = 2.0 * rng.next_unit() - 1.0;
    norm2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& v : e) v *= inv;
  return e;
}

/// In-process backend with fully deterministic outputs.
///
/// Embeddings come from mock_embedding over the image's canonical bytes or
/// the text's UTF-8 bytes. VQA answers and captions can be scripted per image
/// content hash; unscripted questions get "yes" or "no" from the parity of a
/// hash over (image, question).
class MockBackend : public Backend {
 public:
  explicit MockBackend(BackendDescriptor desc = {}) : desc_(std::move(desc)) {
    desc_.kind = BackendKind::kMock;
    if (desc_.model_tag.empty()) desc_.model_tag = "mock";
    desc_.validate();
  }

  const BackendDescriptor& descriptor() const override { return desc_; }
  BackendCapability capability() const override { return {true, true, true}; }
  std::size_t dim() const override { return desc_.embedding_dim; }

  Embedding embed_image(const ImageBuffer& image) override {
    if (image.empty()) throw DataError("embed_image: empty image");
    return mock_embedding(content_hash(image), desc_.embedding_dim);
  }

  Embedding embed_text(const std::string& text) override {
    if (text.empty()) throw DataError("embed_text: empty text");
    return mock_embedding(fnv1a64(text), desc_.embedding_dim);
  }

  std::string vqa(const ImageBuffer& image,
                  const std::string& question) override {
    const std::uint64_t h = content_hash(image);
    std::lock_guard lock(mu_);
    vqa_requests_.push_back(question);
    if (auto it = answers_.find({h, question}); it != answers_.end()) {
      return it->second;
    }
    if (default_answer_) return *default_answer_;
    return (fnv1a64(question, h) & 1) ? "yes" : "no";
  }

  std::string caption(const ImageBuffer& image) override {
    const std::uint64_t h = content_hash(image);
    std::lock_guard lock(mu_);
    if (auto it = captions_.find(h); it != captions_.end()) return it->second;
    return default_caption_;
  }

  void script_answer(const ImageBuffer& image, const std::string& question,
                     std::string answer) {
    std::lock_guard lock(mu_);
    answers_[{content_hash(image), question}] = std::move(answer);
  }
  /// Answer returned for every unscripted question.
  void set_default_answer(std::string answer) {
    std::lock_guard lock(mu_);
    default_answer_ = std::move(answer);
  }
  void script_caption(const ImageBuffer& image, std::string caption) {
    std::lock_guard lock(mu_);
    captions_[content_hash(image)] = std::move(caption);
  }
  void set_default_caption(std::string caption) {
    std::lock_guard lock(mu_);
    default_caption_ = std::move(caption);
  }

  /// Question texts received by vqa(), in arrival order.
  std::vector<std::string> vqa_requests() const {
    std::lock_guard lock(mu_);
    return vqa_requests_;
  }

 private:
  BackendDescriptor desc_;
  mutable std::mutex mu_;
  std::map<std::pair<std::uint64_t, std::string>, std::string> answers_;
  std::map<std::uint64_t, std::string> captions_;
  std::optional<std::string> default_answer_;
  std::string default_caption_ = "a child playing with blocks";
  std::vector<std::string> vqa_requests_;
};

}  // namespace ctxcue
