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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <semaphore>
#include <sstream>
#include <string>
#include <thread>

#include "httplib.h"

#include "ctxcue/backend.hpp"
#include "ctxcue/error.hpp"
#include "ctxcue/hash.hpp"
#include "ctxcue/wire.hpp"

namespace ctxcue {

/// Content-addressed response cache on disk. Entries are immutable: a key is
/// a hash of (model tag, endpoint, request body), the value is the raw
/// response body. Writes go through a temporary file and a rename, so
/// concurrent writers of the same key leave one complete copy.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw ConfigError("cache dir '" + dir_.string() + "': " + ec.message());
  }

  static std::string key(const std::string& model_tag, const std::string& path,
                         const std::string& body) {
    std::uint64_t h = fnv1a64(model_tag);
    h = fnv1a64(std::string_view("\0", 1), h);
    h = fnv1a64(path, h);
    h = fnv1a64(std::string_view("\0", 1), h);
    return hex64(fnv1a64(body, h));
  }

  std::optional<std::string> get(const std::string& key) const {
    std::ifstream in(dir_ / (key + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void put(const std::string& key, const std::string& value) const {
    static std::atomic<unsigned long> counter{0};
    const auto tmp =
        dir_ / (key + ".tmp." +
                std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
                "." + std::to_string(counter++));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) return;  // a cache miss next time is harmless
      out.write(value.data(), static_cast<std::streamsize>(value.size()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, dir_ / (key + ".json"), ec);
    if (ec) std::filesystem::remove(tmp, ec);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

/// Client for the model-service protocol in wire.hpp.
///
/// At most max_inflight requests are on the wire at once. Transport failures
/// and 5xx responses are retried up to `retries` total attempts with
/// exponential backoff; 4xx responses fail immediately. Every request carries
/// an Idempotency-Key header derived from its content.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendDescriptor desc,
                         std::chrono::milliseconds backoff_base =
                             std::chrono::milliseconds(250))
      : desc_(std::move(desc)),
        backoff_base_(backoff_base),
        slots_(static_cast<std::ptrdiff_t>(desc_.max_inflight)) {
    desc_.kind = BackendKind::kRemote;
    desc_.validate();
    if (!desc_.cache_dir.empty()) cache_.emplace(desc_.cache_dir);
    connect();
  }

  const BackendDescriptor& descriptor() const override { return desc_; }
  BackendCapability capability() const override { return {true, true, true}; }
  std::size_t dim() const override { return dim_; }
  const std::string& server_model() const { return server_model_; }

  /// Number of HTTP attempts made (cache hits excluded).
  std::size_t requests_sent() const { return requests_sent_.load(); }

  Embedding embed_image(const ImageBuffer& image) override {
    if (image.empty()) throw DataError("embed_image: empty image");
    auto e = wire::parse_embedding_response(
        post(wire::kEmbedImage, wire::embed_image_request(image)));
    check_embedding(e, dim_);
    return e;
  }

  Embedding embed_text(const std::string& text) override {
    if (text.empty()) throw DataError("embed_text: empty text");
    auto e = wire::parse_embedding_response(
        post(wire::kEmbedText, wire::embed_text_request(text)));
    check_embedding(e, dim_);
    return e;
  }

  std::string vqa(const ImageBuffer& image,
                  const std::string& question) override {
    return wire::parse_string_field(
        post(wire::kVqa, wire::vqa_request(image, question)), "answer");
  }

  std::string caption(const ImageBuffer& image) override {
    auto c = wire::parse_string_field(
        post(wire::kCaption, wire::caption_request(image)), "caption");
    if (trim(c).empty()) throw BackendError("caption: service returned empty caption");
    return c;
  }

 private:
  struct Response {
    int status = 0;
    std::string body;
  };

  std::optional<Response> send_once(const char* method, const std::string& path,
                                    const std::string& body,
                                    const std::string& idempotency_key) {
    httplib::Client cli(desc_.endpoint);
    const auto secs = static_cast<time_t>(desc_.timeout_s);
    const auto usecs = static_cast<time_t>((desc_.timeout_s - secs) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    ++requests_sent_;
    httplib::Result res =
        std::string(method) == "GET"
            ? cli.Get(path)
            : cli.Post(path, httplib::Headers{{"Idempotency-Key", idempotency_key}},
                       body, "application/json");
    if (!res) return std::nullopt;
    return Response{res->status, res->body};
  }

  std::string request(const char* method, const std::string& path,
                      const std::string& body) {
    const std::string key = ResponseCache::key(server_model_, path, body);
    std::string last_error = "no attempt made";
    for (std::size_t attempt = 0; attempt < desc_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(backoff_base_ * (1 << (attempt - 1)));
      std::optional<Response> res;
      {
        slots_.acquire();
        struct Release {
          std::counting_semaphore<>& s;
          ~Release() { s.release(); }
        } release{slots_};
        res = send_once(method, path, body, key);
      }
      if (!res) {
        last_error = "transport failure";
        continue;
      }
      if (res->status == 200) return res->body;
      std::string message;
      try {
        message = nlohmann::json::parse(res->body).value("error", std::string());
      } catch (...) {
      }
      last_error = "HTTP " + std::to_string(res->status) +
                   (message.empty() ? "" : ": " + message);
      if (res->status < 500) break;
    }
    throw BackendError(std::string(method) + " " + path + " failed: " + last_error);
  }

  std::string post(const std::string& path, const std::string& body) {
    const std::string key = ResponseCache::key(server_model_, path, body);
    if (cache_) {
      if (auto hit = cache_->get(key)) return *hit;
    }
    std::string response = request("POST", path, body);
    if (cache_) cache_->put(key, response);
    return response;
  }

  void connect() {
    const auto health = wire::parse_health(request("GET", wire::kHealth, {}));
    if (health.status != "ok") {
      throw BackendError("service not healthy: status '" + health.status + "'");
    }
    if (health.dim < 2) throw BackendError("service reports embedding dim < 2");
    if (desc_.embedding_dim != 0 && desc_.embedding_dim != health.dim) {
      throw BackendError("service embedding dim " + std::to_string(health.dim) +
                         " != configured " + std::to_string(desc_.embedding_dim));
    }
    dim_ = health.dim;
    server_model_ = health.model;
    if (desc_.model_tag.empty()) desc_.model_tag = health.model;
  }

  BackendDescriptor desc_;
  std::chrono::milliseconds backoff_base_;
  std::counting_semaphore<> slots_;
  std::optional<ResponseCache> cache_;
  std::atomic<std::size_t> requests_sent_{0};
  std::size_t dim_ = 0;
  std::string server_model_;
};

/// Builds the backend described by `desc`.
inline std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc) {
  if (desc.kind == BackendKind::kMock) return std::make_unique<MockBackend>(desc);
  return std::make_unique<RemoteBackend>(desc);
}

}  // namespace ctxcue
