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

// HTTP+JSON model-service protocol, version 1.
//
//   POST /v1/embed_image {"image_png_b64"}            -> {"embedding","dim","model"}
//   POST /v1/embed_text  {"text"}                     -> {"embedding","dim","model"}
//   POST /v1/vqa         {"image_png_b64","question"} -> {"answer"}
//   POST /v1/caption     {"image_png_b64"}            -> {"caption"}
//   GET  /v1/health                                   -> {"status":"ok","model","dim"}
//
// Errors: 400 {"error"} for malformed input, 503 {"error"} when the model is
// unavailable. Bodies are serialized with sorted keys.

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "ctxcue/backend.hpp"
#include "ctxcue/error.hpp"
#include "ctxcue/image.hpp"
#include "ctxcue/png_io.hpp"
#include "ctxcue/text_util.hpp"

namespace ctxcue::wire {

inline constexpr const char* kEmbedImage = "/v1/embed_image";
inline constexpr const char* kEmbedText = "/v1/embed_text";
inline constexpr const char* kVqa = "/v1/vqa";
inline constexpr const char* kCaption = "/v1/caption";
inline constexpr const char* kHealth = "/v1/health";

inline std::string image_field(const ImageBuffer& img) {
  return base64_encode(encode_png(img));
}

inline std::string embed_image_request(const ImageBuffer& img) {
  return nlohmann::json{{"image_png_b64", image_field(img)}}.dump();
}

inline std::string embed_text_request(const std::string& text) {
  return nlohmann::json{{"text", text}}.dump();
}

inline std::string vqa_request(const ImageBuffer& img,
                               const std::string& question) {
  return nlohmann::json{{"image_png_b64", image_field(img)},
                        {"question", question}}
      .dump();
}

inline std::string caption_request(const ImageBuffer& img) {
  return nlohmann::json{{"image_png_b64", image_field(img)}}.dump();
}

inline std::string embedding_response(const Embedding& e,
                                      const std::string& model) {
  return nlohmann::json{{"embedding", e}, {"dim", e.size()}, {"model", model}}
      .dump();
}

inline std::string health_response(const std::string& model, std::size_t dim) {
  return nlohmann::json{{"status", "ok"}, {"model", model}, {"dim", dim}}.dump();
}

inline std::string error_body(const std::string& message) {
  return nlohmann::json{{"error", message}}.dump();
}

namespace detail {
inline nlohmann::json parse_body(const std::string& body, const char* what) {
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object()) throw BackendError(std::string(what) + ": not an object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw BackendError(std::string(what) + ": " + e.what());
  }
}
}  // namespace detail

inline Embedding parse_embedding_response(const std::string& body) {
  const auto j = detail::parse_body(body, "embedding response");
  try {
    auto e = j.at("embedding").get<Embedding>();
    if (j.at("dim").get<std::size_t>() != e.size()) {
      throw BackendError("embedding response: dim disagrees with vector length");
    }
    return e;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("embedding response: ") + e.what());
  }
}

inline std::string parse_string_field(const std::string& body,
                                      const char* field) {
  const auto j = detail::parse_body(body, field);
  try {
    return j.at(field).get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string(field) + " response: " + e.what());
  }
}

struct Health {
  std::string status;
  std::string model;
  std::size_t dim = 0;
};

inline Health parse_health(const std::string& body) {
  const auto j = detail::parse_body(body, "health response");
  try {
    return {j.at("status").get<std::string>(), j.at("model").get<std::string>(),
            j.at("dim").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("health response: ") + e.what());
  }
}

}  // namespace ctxcue::wire
