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

// Context-token fusion: per-person cue score vectors (P x K) are projected to
// the person-token width (P x D) by a linear layer and added to the person
// gaze tokens, either once before the first block (early) or before each of
// B blocks (multistage).
//
// Token file format (little endian):
//   bytes 0..3   magic "CTXT"
//   bytes 4..7   u32 rows
//   bytes 8..11  u32 dim
//   then rows*dim f32 values, row-major

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "ctxcue/error.hpp"
#include "ctxcue/hash.hpp"
#include "ctxcue/text_util.hpp"

namespace ctxcue {

struct TokenMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  TokenMatrix() = default;
  TokenMatrix(std::size_t r, std::size_t d, double fill = 0.0)
      : rows(r), dim(d), values(r * d, fill) {}
  TokenMatrix(std::size_t r, std::size_t d, std::vector<double> v)
      : rows(r), dim(d), values(std::move(v)) {
    if (values.size() != rows * dim) throw DataError("token matrix: values size != rows*dim");
    for (double x : values) {
      if (!std::isfinite(x)) throw DataError("token matrix: non-finite entry");
    }
  }

  double& at(std::size_t r, std::size_t c) { return values[r * dim + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * dim + c]; }

  bool operator==(const TokenMatrix&) const = default;
};

/// Linear projection K -> D with bias.
struct FusionWeights {
  std::size_t k = 0;
  std::size_t d = 0;
  std::vector<double> matrix;  // k x d, row-major
  std::vector<double> bias;    // d
  std::uint64_t seed = 0;

  static FusionWeights zeros(std::size_t k, std::size_t d) {
    return {k, d, std::vector<double>(k * d, 0.0), std::vector<double>(d, 0.0), 0};
  }

  /// Matrix and bias uniform in [-1/sqrt(K), 1/sqrt(K)) from a seeded
  /// xorshift64* stream (matrix row-major first, then bias).
  static FusionWeights seeded(std::size_t k, std::size_t d, std::uint64_t seed) {
    if (k == 0 || d == 0) throw ConfigError("fusion weights need K, D >= 1");
    FusionWeights w = zeros(k, d);
    w.seed = seed;
    XorShift64Star rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(k));
    for (double& v : w.matrix) v = rng.next_range(-bound, bound);
    for (double& v : w.bias) v = rng.next_range(-bound, bound);
    return w;
  }
};

enum class FusionMode { kEarly, kMultistage };

/// Row p of the result is scores[p] * matrix + bias. `scores` is P x K.
inline TokenMatrix project_scores(const TokenMatrix& scores, const FusionWeights& w) {
  if (scores.dim != w.k) {
    throw DataError("project_scores: score width " + std::to_string(scores.dim) +
                    " != projection input " + std::to_string(w.k));
  }
  if (w.matrix.size() != w.k * w.d || w.bias.size() != w.d) {
    throw DataError("project_scores: malformed weights");
  }
  TokenMatrix out(scores.rows, w.d);
  for (std::size_t p = 0; p < scores.rows; ++p) {
    for (std::size_t j = 0; j < w.d; ++j) {
      double acc = w.bias[j];
      for (std::size_t i = 0; i < w.k; ++i) acc += scores.at(p, i) * w.matrix[i * w.d + j];
      out.at(p, j) = acc;
    }
  }
  return out;
}

inline TokenMatrix fuse_early(const TokenMatrix& gaze_tokens, const TokenMatrix& context) {
  if (gaze_tokens.rows != context.rows || gaze_tokens.dim != context.dim) {
    throw DataError("fuse: token shape " + std::to_string(gaze_tokens.rows) + "x" +
                    std::to_string(gaze_tokens.dim) + " != context " +
                    std::to_string(context.rows) + "x" + std::to_string(context.dim));
  }
  TokenMatrix out = gaze_tokens;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += context.values[i];
  return out;
}

/// Adds the same context tokens to each block's person tokens.
inline std::vector<TokenMatrix> fuse_multistage(const std::vector<TokenMatrix>& block_inputs,
                                                const TokenMatrix& context) {
  if (block_inputs.empty()) throw DataError("fuse_multistage: no block inputs");
  std::vector<TokenMatrix> out;
  out.reserve(block_inputs.size());
  for (const auto& b : block_inputs) out.push_back(fuse_early(b, context));
  return out;
}

inline std::string encode_tokens(const TokenMatrix& t) {
  std::string out("CTXT");
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_u32(static_cast<std::uint32_t>(t.rows));
  put_u32(static_cast<std::uint32_t>(t.dim));
  for (double v : t.values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(bits);
  }
  return out;
}

inline TokenMatrix decode_tokens(std::string_view data) {
  if (data.size() < 12 || data.substr(0, 4) != "CTXT") {
    throw DataError("token file: bad magic or truncated header");
  }
  auto get_u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(data[off + i])) << (8 * i);
    return v;
  };
  const std::size_t rows = get_u32(4), dim = get_u32(8);
  if (data.size() != 12 + rows * dim * 4) {
    throw DataError("token file: size does not match rows x dim header");
  }
  std::vector<double> values(rows * dim);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t bits = get_u32(12 + 4 * i);
    float f;
    std::memcpy(&f, &bits, 4);
    values[i] = f;
  }
  return TokenMatrix(rows, dim, std::move(values));
}

inline TokenMatrix read_tokens(const std::string& path) { return decode_tokens(read_file(path)); }

inline void write_tokens(const std::string& path, const TokenMatrix& t) {
  write_file(path, encode_tokens(t));
}

}  // namespace ctxcue
