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
#include <limits>
#include <random>

#include "ctxcue/backend.hpp"
#include "ctxcue/metrics_cue.hpp"
#include "ctxcue/scoring.hpp"
#include "test_support.hpp"

namespace ctxcue {
namespace {

ScoreMatrix matrix(std::size_t n, std::size_t k, std::vector<double> values) {
  ScoreMatrix m;
  for (std::size_t i = 0; i < n; ++i) {
    m.samples.push_back({"s" + std::to_string(i), "img", "p" + std::to_string(i)});
  }
  for (std::size_t c = 0; c < k; ++c) m.class_ids.push_back("c" + std::to_string(c));
  m.values = std::move(values);
  return m;
}

TEST(Similarity, WorkedExamples) {
  EXPECT_EQ(similarity_scores({1, 0}, {{1, 0}, {0, 1}}), (std::vector<double>{1.0, 0.0}));
  EXPECT_NEAR(similarity_scores({0.6, 0.8}, {{0.8, 0.6}}).front(), 0.96, 1e-15);
  std::mt19937_64 rng(1);
  const auto e = testing::random_unit(rng, 16);
  EXPECT_NEAR(similarity_scores(e, {e}).front(), 1.0, 1e-12);
  EXPECT_THROW(similarity_scores({1, 0}, {{1, 0, 0}}), DataError);
}

TEST(Ensemble, WorkedExamplesAndErrors) {
  EXPECT_DOUBLE_EQ(ensemble_score({1, 0}, {{1, 0}, {0, 1}}), 0.5);
  EXPECT_THROW(ensemble_score({1, 0}, {}), DataError);
  EXPECT_THROW(ensemble_score({1, 0}, {{1, 0}, {1, 0, 0}}), DataError);
}

TEST(Ensemble, CentroidIsNotRenormalized) {
  // Two orthogonal unit prompts: the centroid has norm 1/sqrt(2).
  EXPECT_NEAR(ensemble_score({std::sqrt(0.5), std::sqrt(0.5)}, {{1, 0}, {0, 1}}), std::sqrt(0.5),
              1e-15);
}

TEST(Ensemble, SinglePromptReducesExactlyAndManyMatchMeanOfDots) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const std::size_t d = 2 + rng() % 63;
    const auto e = testing::random_unit(rng, d);
    const auto p = testing::random_unit(rng, d);
    ASSERT_EQ(ensemble_score(e, {p}), similarity_scores(e, {p}).front());

    const std::size_t n = 1 + rng() % 8;
    std::vector<Embedding> prompts;
    for (std::size_t j = 0; j < n; ++j) prompts.push_back(testing::random_unit(rng, d));
    long double mean = 0;
    for (const auto& q : prompts) {
      long double s = 0;
      for (std::size_t t = 0; t < d; ++t) s += static_cast<long double>(e[t]) * q[t];
      mean += s;
    }
    mean /= n;
    ASSERT_NEAR(ensemble_score(e, prompts), static_cast<double>(mean), 1e-9);

    auto shuffled = prompts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_NEAR(ensemble_score(e, shuffled), ensemble_score(e, prompts), 1e-12);
  }
}

TEST(Normalize, WorkedColumns) {
  const auto n = normalize_scores(matrix(3, 2, {1, 5, 2, 5, 3, 5}));
  EXPECT_EQ(n.state, ScoreState::kNormalized);
  // mean 2, population std sqrt(2/3): (1-2)/sqrt(2/3) = -sqrt(3/2).
  const double expected = -std::sqrt(1.5L);
  EXPECT_NEAR(n.at(0, 0), expected, 1e-12);
  EXPECT_NEAR(n.at(0, 0), -1.224744871391589, 1e-12);
  EXPECT_NEAR(n.at(1, 0), 0.0, 1e-15);
  EXPECT_NEAR(n.at(2, 0), -expected, 1e-12);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(n.at(r, 1), 0.0);

  const auto single = normalize_scores(matrix(1, 2, {0.3, -4}));
  EXPECT_EQ(single.values, (std::vector<double>{0, 0}));
}

TEST(Normalize, Errors) {
  EXPECT_THROW(normalize_scores(matrix(0, 2, {})), DataError);
  auto m = matrix(2, 1, {1, 2});
  m.state = ScoreState::kNormalized;
  EXPECT_THROW(normalize_scores(m), DataError);
  EXPECT_THROW(normalize_scores(matrix(2, 2, {1, 2, 3})), DataError);
}

TEST(Normalize, RandomMatricesMoments) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 256, k = 1 + rng() % 6;
    std::vector<double> v(n * k);
    for (auto& x : v) x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 5) - 2);
    if (trial % 7 == 0) {
      for (std::size_t r = 0; r < n; ++r) v[r * k] = 0.25;  // constant column
    }
    const auto m = matrix(n, k, v);
    const auto z = normalize_scores(m);
    for (std::size_t c = 0; c < k; ++c) {
      long double mean = 0, var = 0, raw_mean = 0, raw_var = 0;
      for (std::size_t r = 0; r < n; ++r) raw_mean += m.at(r, c);
      raw_mean /= n;
      for (std::size_t r = 0; r < n; ++r) raw_var += (m.at(r, c) - raw_mean) * (m.at(r, c) - raw_mean);
      const bool constant = std::sqrt(static_cast<double>(raw_var / n)) < 1e-8;
      for (std::size_t r = 0; r < n; ++r) mean += z.at(r, c);
      mean /= n;
      for (std::size_t r = 0; r < n; ++r) var += (z.at(r, c) - mean) * (z.at(r, c) - mean);
      if (constant) {
        for (std::size_t r = 0; r < n; ++r) ASSERT_EQ(z.at(r, c), 0.0);
      } else {
        ASSERT_LT(std::abs(static_cast<double>(mean)), 1e-9);
        ASSERT_LT(std::abs(std::sqrt(static_cast<double>(var / n)) - 1.0), 1e-9);
      }
    }

    // Fixed point, and invariance to positive column scaling.
    auto again = z;
    again.state = ScoreState::kRaw;
    const auto z2 = normalize_scores(again);
    auto scaled = m;
    const double factor = 0.5 + (rng() % 100);
    for (std::size_t r = 0; r < n; ++r) scaled.at(r, k - 1) *= factor;
    const auto zs = normalize_scores(scaled);
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      ASSERT_NEAR(z2.values[i], z.values[i], 1e-9);
      ASSERT_NEAR(zs.values[i], z.values[i], 1e-9);
    }
  }
}

TEST(Binarize, StrictThreshold) {
  auto m = matrix(3, 1, {0.1, -0.2, 0.0});
  m.state = ScoreState::kNormalized;
  EXPECT_EQ(binarize(m).values, (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(binarize(m).state, ScoreState::kBinary);
  EXPECT_EQ(binarize(m, 0.05).values, (std::vector<double>{1, 0, 0}));
  EXPECT_THROW(binarize(m, -std::numeric_limits<double>::infinity()), ConfigError);
  EXPECT_THROW(binarize(matrix(1, 1, {1})), DataError);
}

TEST(Binarize, AccuracyAgreesWithThresholdingNormalizedValues) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<double> v(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = u(rng);
      labels[i] = static_cast<int>(rng() % 2);
    }
    const auto z = normalize_scores(matrix(n, 1, v));
    const auto b = binarize(z);
    std::vector<int> from_binary(n), from_threshold(n);
    for (std::size_t i = 0; i < n; ++i) {
      from_binary[i] = static_cast<int>(b.values[i]);
      from_threshold[i] = z.values[i] > 0 ? 1 : 0;
    }
    ASSERT_EQ(accuracy(from_binary, labels), accuracy(from_threshold, labels));
  }
}

TEST(VqaParse, Answers) {
  const auto yes = parse_vqa_answer("Yes");
  EXPECT_TRUE(yes.positive);
  EXPECT_TRUE(yes.parse_ok);
  const auto no = parse_vqa_answer("no.");
  EXPECT_FALSE(no.positive);
  EXPECT_TRUE(no.parse_ok);
  const auto maybe = parse_vqa_answer("maybe sitting");
  EXPECT_FALSE(maybe.positive);
  EXPECT_FALSE(maybe.parse_ok);
  EXPECT_EQ(maybe.raw_answer, "maybe sitting");
  EXPECT_TRUE(parse_vqa_answer("  YES, the person is sitting").positive);
  EXPECT_TRUE(parse_vqa_answer("\"yes\"").positive);
  EXPECT_FALSE(parse_vqa_answer("").parse_ok);
  EXPECT_FALSE(parse_vqa_answer("yesterday").parse_ok);
  EXPECT_FALSE(parse_vqa_answer("nope").parse_ok);
}

TEST(VqaScore, ScriptedMockAndIcl) {
  MockBackend mock;
  const ImageBuffer img = testing::noise_image(8, 8, 1);
  const auto q = make_vqa_question("person", "sitting");
  mock.set_default_answer("yes");
  EXPECT_TRUE(vqa_score(mock, img, q, false).positive);
  mock.set_default_answer("unknown");
  const auto v = vqa_score(mock, img, q, false);
  EXPECT_FALSE(v.positive);
  EXPECT_FALSE(v.parse_ok);

  mock.script_caption(img, "a child playing");
  mock.script_answer(img, "a child playing " + q.text, "No");
  const auto icl = vqa_score(mock, img, q, true);
  EXPECT_TRUE(icl.parse_ok);
  EXPECT_FALSE(icl.positive);
  const auto requests = mock.vqa_requests();
  ASSERT_FALSE(requests.empty());
  EXPECT_TRUE(requests.back().starts_with("a child playing "));

  // Empty caption falls back to the bare question.
  mock.script_caption(img, "");
  vqa_score(mock, img, q, true);
  EXPECT_EQ(mock.vqa_requests().back(), q.text);
}

TEST(ScoreState, StringRoundTrip) {
  for (auto s : {ScoreState::kRaw, ScoreState::kNormalized, ScoreState::kBinary}) {
    EXPECT_EQ(score_state_from_string(to_string(s)), s);
  }
  EXPECT_THROW(score_state_from_string("fuzzy"), DataError);
}

}  // namespace
}  // namespace ctxcue
