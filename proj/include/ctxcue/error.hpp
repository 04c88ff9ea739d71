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

#include <stdexcept>
#include <string>

namespace ctxcue {

/// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { kConfig = 2, kBackend = 3, kData = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

/// Invalid configuration, prompt template, manifest or argument.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

/// Model service unreachable, misbehaving, or lacking a capability.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what)
      : Error(ErrorKind::kBackend, what) {}
};

/// Malformed or inconsistent input data (annotations, scores, images).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

/// Throws the subclass matching `kind`.
[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  switch (kind) {
    case ErrorKind::kConfig: throw ConfigError(what);
    case ErrorKind::kBackend: throw BackendError(what);
    case ErrorKind::kData: break;
  }
  throw DataError(what);
}

}  // namespace ctxcue
