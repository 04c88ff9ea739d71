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

// Serves any Backend over the wire protocol. Used to host the mock backend
// for contract tests and offline demos of the remote client.

#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"

#include "ctxcue/backend.hpp"
#include "ctxcue/png_io.hpp"
#include "ctxcue/text_util.hpp"
#include "ctxcue/wire.hpp"

namespace ctxcue {

class BackendServer {
 public:
  explicit BackendServer(Backend& backend) : backend_(backend) { routes(); }
  ~BackendServer() { stop(); }

  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  /// Binds to host:port (port 0 picks a free port) and serves on a
  /// background thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host)
                                : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    port_ = bound;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Blocks serving on the calling thread.
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) {
      throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
    }
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  /// While unavailable every endpoint answers 503.
  void set_available(bool available) { available_ = available; }

  /// Number of POST requests handled.
  std::size_t posts_handled() const { return posts_handled_.load(); }

  /// Fails the next `n` POSTs with 503 before serving normally.
  void fail_next(std::size_t n) { fail_budget_ = n; }

 private:
  using Handler = std::function<std::string(const nlohmann::json&)>;

  static ImageBuffer image_from(const nlohmann::json& body) {
    const std::string png = base64_decode(body.at("image_png_b64").get<std::string>());
    return decode_png(png);
  }

  void post(const char* path, Handler handler) {
    server_.Post(path, [this, handler](const httplib::Request& req,
                                       httplib::Response& res) {
      ++posts_handled_;
      if (!available_ || fail_budget_.load() > 0) {
        if (fail_budget_.load() > 0) --fail_budget_;
        res.status = 503;
        res.set_content(wire::error_body("model unavailable"), "application/json");
        return;
      }
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
        if (!body.is_object()) throw DataError("body must be a JSON object");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(wire::error_body(std::string("malformed JSON: ") + e.what()),
                        "application/json");
        return;
      }
      try {
        std::string out;
        {
          std::lock_guard lock(model_mu_);  // one model invocation at a time
          out = handler(body);
        }
        res.status = 200;
        res.set_content(out, "application/json");
      } catch (const nlohmann::json::exception& e) {
        res.status = 400;
        res.set_content(wire::error_body(e.what()), "application/json");
      } catch (const DataError& e) {
        res.status = 400;
        res.set_content(wire::error_body(e.what()), "application/json");
      } catch (const std::exception& e) {
        res.status = 503;
        res.set_content(wire::error_body(e.what()), "application/json");
      }
    });
  }

  void routes() {
    server_.Get(wire::kHealth, [this](const httplib::Request&, httplib::Response& res) {
      if (!available_) {
        res.status = 503;
        res.set_content(wire::error_body("model loading"), "application/json");
        return;
      }
      res.set_content(wire::health_response(backend_.descriptor().model_tag, backend_.dim()),
                      "application/json");
    });
    post(wire::kEmbedImage, [this](const nlohmann::json& b) {
      return wire::embedding_response(backend_.embed_image(image_from(b)),
                                      backend_.descriptor().model_tag);
    });
    post(wire::kEmbedText, [this](const nlohmann::json& b) {
      const auto text = b.at("text").get<std::string>();
      if (text.empty()) throw DataError("text must be non-empty");
      return wire::embedding_response(backend_.embed_text(text),
                                      backend_.descriptor().model_tag);
    });
    post(wire::kVqa, [this](const nlohmann::json& b) {
      const auto question = b.at("question").get<std::string>();
      return nlohmann::json{{"answer", backend_.vqa(image_from(b), question)}}.dump();
    });
    post(wire::kCaption, [this](const nlohmann::json& b) {
      return nlohmann::json{{"caption", backend_.caption(image_from(b))}}.dump();
    });
  }

  Backend& backend_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<bool> available_{true};
  std::atomic<std::size_t> posts_handled_{0};
  std::atomic<std::size_t> fail_budget_{0};
  std::mutex model_mu_;
};

}  // namespace ctxcue
