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

// Gaze-following metrics on the unit square.
//
// Heatmap cell (r, c) of an H x W grid is centered at ((c+0.5)/W, (r+0.5)/H).
// A point maps to cell (floor(y*H), floor(x*W)), clipped to the last cell.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctxcue/dataset_io.hpp"
#include "ctxcue/error.hpp"

namespace ctxcue {

struct Heatmap {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major

  Heatmap() = default;
  Heatmap(int r, int c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
    if (r < 1 || c < 1 || values.size() != static_cast<std::size_t>(r) * c) {
      throw DataError("heatmap: shape does not match values");
    }
    for (double x : values) {
      if (!std::isfinite(x) || x < 0.0) throw DataError("heatmap: entries must be finite and >= 0");
    }
  }

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }

  std::pair<int, int> cell_of(const GazePoint& p) const {
    auto idx = [](double v, int n) {
      return std::clamp(static_cast<int>(std::floor(v * n)), 0, n - 1);
    };
    return {idx(p.y, rows), idx(p.x, cols)};
  }

  GazePoint cell_center(int r, int c) const {
    return {(c + 0.5) / cols, (r + 0.5) / rows};
  }

  /// Center of the maximal cell; ties go to the lowest row-major index.
  GazePoint argmax_point() const {
    const auto it = std::max_element(values.begin(), values.end());
    const auto i = static_cast<int>(it - values.begin());
    return cell_center(i / cols, i % cols);
  }
};

/// ROC AUC of heatmap values against the cells containing any ground-truth
/// point, by average ranks (ties count one half).
inline double auc(const Heatmap& h, std::span<const GazePoint> gt_points) {
  if (gt_points.empty()) throw DataError("auc: no ground-truth points");
  const std::size_t n = h.values.size();
  std::vector<char> positive(n, 0);
  for (const auto& p : gt_points) {
    const auto [r, c] = h.cell_of(p);
    positive[static_cast<std::size_t>(r) * h.cols + c] = 1;
  }
  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
  const std::size_t n_neg = n - n_pos;
  if (n_neg == 0) throw DataError("auc: every cell is positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return h.values[a] < h.values[b]; });
  double rank_sum = 0.0;  // 1-based average ranks of positive cells
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t group_pos = 0;
    while (j < n && h.values[order[j]] == h.values[order[i]]) {
      group_pos += positive[order[j]];
      ++j;
    }
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum += avg_rank * static_cast<double>(group_pos);
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

struct GazeDistances {
  double min = 0;
  double avg = 0;
};

inline GazeDistances l2_distances(const GazePoint& pred, std::span<const GazePoint> gt) {
  if (gt.empty()) throw DataError("l2_distances: no ground-truth points");
  GazeDistances d{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& g : gt) {
    const double dist = std::hypot(pred.x - g.x, pred.y - g.y);
    d.min = std::min(d.min, dist);
    d.avg += dist;
  }
  d.avg /= static_cast<double>(gt.size());
  return d;
}

/// LAH labels are ordered pairs (from looks at to's head); LAEO labels are
/// unordered pairs stored with from < to in person order.
struct PairwiseGazeLabel {
  std::string from;
  std::string to;
  bool value = false;

  bool operator==(const PairwiseGazeLabel&) const = default;
};

struct SkippedPair {
  std::string from;
  std::string to;
  std::string reason;
};

struct PairwiseLabels {
  std::vector<PairwiseGazeLabel> lah;
  std::vector<PairwiseGazeLabel> laeo;
  std::vector<SkippedPair> skipped;
};

namespace detail {

/// `gaze_of(i)` returns the gaze points of person i, or nullopt if unknown.
template <typename GazeOf>
PairwiseLabels pairwise_labels(const std::vector<PersonRegion>& persons, GazeOf gaze_of) {
  PairwiseLabels out;
  const std::size_t n = persons.size();
  std::vector<std::vector<std::optional<bool>>> lah(n, std::vector<std::optional<bool>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::optional<std::vector<GazePoint>> pts = gaze_of(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& from = persons[i].person_id;
      const auto& to = persons[j].person_id;
      if (!persons[j].head_bbox) {
        out.skipped.push_back({from, to, "target has no head box"});
        continue;
      }
      if (!pts || pts->empty()) {
        out.skipped.push_back({from, to, "source has no gaze point"});
        continue;
      }
      bool hit = false;
      for (const auto& p : *pts) hit = hit || persons[j].head_bbox->contains(p.x, p.y);
      lah[i][j] = hit;
      out.lah.push_back({from, to, hit});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (lah[i][j] && lah[j][i]) {
        out.laeo.push_back({persons[i].person_id, persons[j].person_id,
                            *lah[i][j] && *lah[j][i]});
      }
    }
  }
  return out;
}

}  // namespace detail

/// Ground-truth LAH/LAEO: i looks at j when any annotated gaze point of i
/// lies in j's head box (edges inclusive); LAEO needs both directions.
inline PairwiseLabels derive_pairwise_gt(const std::vector<PersonRegion>& persons) {
  return detail::pairwise_labels(persons, [&](std::size_t i) { return persons[i].gaze_points; });
}

struct GazePrediction {
  std::string person_id;
  GazePoint point;
  std::optional<Heatmap> heatmap;
};

/// Same geometry as derive_pairwise_gt using each person's predicted point.
inline PairwiseLabels predict_pairwise(const std::vector<GazePrediction>& preds,
                                       const std::vector<PersonRegion>& persons) {
  std::map<std::string, GazePoint> point_of;
  for (const auto& p : preds) point_of[p.person_id] = p.point;
  return detail::pairwise_labels(
      persons, [&](std::size_t i) -> std::optional<std::vector<GazePoint>> {
        const auto it = point_of.find(persons[i].person_id);
        if (it == point_of.end()) return std::nullopt;
        return std::vector<GazePoint>{it->second};
      });
}

/// 2PR/(P+R), 0 when P+R = 0.
inline double f1(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw DataError("f1: length mismatch");
  if (preds.empty()) throw DataError("f1: empty input");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] != 0, l = labels[i] != 0;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace ctxcue
