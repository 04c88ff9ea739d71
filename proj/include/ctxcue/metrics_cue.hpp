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

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxcue/dataset_io.hpp"
#include "ctxcue/error.hpp"
#include "ctxcue/scoring.hpp"

namespace ctxcue {

/// Non-interpolated average precision: sum over descending distinct score
/// thresholds of (recall gain) x (precision at that threshold). Tied scores
/// enter together. Returns nullopt when there is no positive label.
inline std::optional<double> average_precision(std::span<const double> scores,
                                               std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("average_precision: scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  const std::size_t positives =
      static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(),
                                             [](int l) { return l != 0; }));
  if (positives == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t group_tp = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      group_tp += labels[order[j]] != 0;
      ++j;
    }
    tp += group_tp;
    seen = j;
    if (group_tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      ap += (static_cast<double>(group_tp) / static_cast<double>(positives)) * precision;
    }
    i = j;
  }
  return ap;
}

struct ClassEval {
  std::string class_id;
  std::optional<double> ap;
  std::size_t support_pos = 0;
  std::size_t support_neg = 0;
};

/// Mean over classes whose AP is defined; nullopt when none is.
inline std::optional<double> mean_ap(const std::vector<ClassEval>& per_class) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : per_class) {
    if (c.ap) {
      sum += *c.ap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

inline double accuracy(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw DataError("accuracy: length mismatch");
  if (preds.empty()) throw DataError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    hits += (preds[i] != 0) == (labels[i] != 0);
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

struct CueReport {
  std::vector<ClassEval> classes;
  std::map<std::string, std::optional<double>> class_accuracy;
  std::optional<double> map;
  std::optional<double> accuracy;  // pooled over all labeled (sample, class)
  std::size_t vqa_questions = 0;
  std::size_t vqa_parse_failures = 0;
  ScoreState state = ScoreState::kRaw;

  std::optional<double> vqa_parse_failure_rate() const {
    if (vqa_questions == 0) return std::nullopt;
    return static_cast<double>(vqa_parse_failures) / static_cast<double>(vqa_questions);
  }
};

/// Evaluates a score table against annotation labels. Persons without a
/// label for a class are left out of that class. AP is computed for raw and
/// normalized scores; binary predictions come from thresholding normalized
/// scores at 0 (raw scores are normalized first), or are used directly for
/// binary tables, which have no AP.
inline CueReport evaluate_cues(const ScoreMatrix& m,
                               const std::vector<ImageRecord>& records) {
  m.check_shape();
  std::map<std::pair<std::string, std::string>, const PersonRegion*> person_of;
  for (const auto& rec : records) {
    for (const auto& p : rec.persons) person_of[{rec.image_id, p.person_id}] = &p;
  }
  for (const auto& s : m.samples) {
    if (!person_of.count({s.image_id, s.person_id})) {
      throw DataError("scores reference unknown sample '" + s.sample_id + "'");
    }
  }

  ScoreMatrix binary;
  if (m.state == ScoreState::kBinary) {
    binary = m;
  } else if (m.rows() > 0) {
    ScoreMatrix raw = m;
    binary = binarize(m.state == ScoreState::kRaw ? normalize_scores(raw) : m);
  }

  CueReport report;
  report.state = m.state;
  std::size_t hits = 0, total = 0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto& cls = m.class_ids[c];
    std::vector<double> scores;
    std::vector<int> labels, preds;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto* p = person_of[{m.samples[r].image_id, m.samples[r].person_id}];
      if (!p->cue_labels) continue;
      const auto it = p->cue_labels->find(cls);
      if (it == p->cue_labels->end()) continue;
      scores.push_back(m.at(r, c));
      labels.push_back(it->second);
      preds.push_back(binary.at(r, c) > 0.5 ? 1 : 0);
    }
    ClassEval ev;
    ev.class_id = cls;
    ev.support_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    ev.support_neg = labels.size() - ev.support_pos;
    if (m.state != ScoreState::kBinary) ev.ap = average_precision(scores, labels);
    report.class_accuracy[cls] =
        labels.empty() ? std::nullopt : std::optional<double>(accuracy(preds, labels));
    for (std::size_t i = 0; i < labels.size(); ++i) hits += preds[i] == labels[i];
    total += labels.size();
    report.classes.push_back(std::move(ev));
  }
  report.map = mean_ap(report.classes);
  if (total > 0) report.accuracy = static_cast<double>(hits) / static_cast<double>(total);
  for (const auto& v : m.vqa) {
    report.vqa_questions += v.questions;
    report.vqa_parse_failures += v.parse_failures;
  }
  return report;
}

inline nlohmann::json report_to_json(const CueReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& c : r.classes) {
    classes[c.class_id] = {{"ap", opt(c.ap)},
                           {"accuracy", opt(r.class_accuracy.at(c.class_id))},
                           {"support_pos", c.support_pos},
                           {"support_neg", c.support_neg}};
  }
  return {{"classes", classes},
          {"mAP", opt(r.map)},
          {"accuracy", opt(r.accuracy)},
          {"score_state", std::string(to_string(r.state))},
          {"vqa_questions", r.vqa_questions},
          {"vqa_parse_failures", r.vqa_parse_failures},
          {"vqa_parse_failure_rate", opt(r.vqa_parse_failure_rate())}};
}

}  // namespace ctxcue
