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

// Dataset-level gaze evaluation over a predictions file.
//
// Prediction line: {"image_id", "person_id", "point": [x,y], "heatmap_path"}
// where "point" may be omitted when a heatmap is given (its argmax cell center
// is used), and heatmaps are 16-bit grayscale PNGs (value / 65535).

#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxcue/dataset_io.hpp"
#include "ctxcue/metrics_gaze.hpp"
#include "ctxcue/png_io.hpp"

namespace ctxcue {

inline Heatmap heatmap_from_png(const std::string& path) {
  const Gray16Image g = decode_png_gray16(read_file(path));
  std::vector<double> v(g.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = g.values[i] / 65535.0;
  return Heatmap(g.height, g.width, std::move(v));
}

inline Gray16Image heatmap_to_gray16(const Heatmap& h) {
  Gray16Image g{h.cols, h.rows, {}};
  g.values.reserve(h.values.size());
  for (double v : h.values) {
    g.values.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0)));
  }
  return g;
}

/// Predictions keyed by image id. Relative heatmap paths resolve against
/// `base_dir`.
inline std::map<std::string, std::vector<GazePrediction>> load_gaze_predictions(
    const std::string& path, const std::string& base_dir) {
  std::map<std::string, std::vector<GazePrediction>> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      GazePrediction p;
      const auto image_id = j.at("image_id").get<std::string>();
      p.person_id = j.at("person_id").get<std::string>();
      if (j.contains("heatmap_path") && !j["heatmap_path"].is_null()) {
        std::filesystem::path hp = j["heatmap_path"].get<std::string>();
        if (hp.is_relative()) hp = std::filesystem::path(base_dir) / hp;
        p.heatmap = heatmap_from_png(hp.string());
      }
      if (j.contains("point") && !j["point"].is_null()) {
        const auto xy = j["point"].get<std::vector<double>>();
        if (xy.size() != 2 || !(xy[0] >= 0 && xy[0] <= 1 && xy[1] >= 0 && xy[1] <= 1)) {
          throw DataError(where + ": point must be [x,y] in the unit square");
        }
        p.point = {xy[0], xy[1]};
      } else if (p.heatmap) {
        p.point = p.heatmap->argmax_point();
      } else {
        throw DataError(where + ": prediction needs a point or a heatmap");
      }
      out[image_id].push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

struct GazeReport {
  std::size_t instances = 0;       // predictions with GT gaze points
  std::size_t auc_instances = 0;   // ... that also carry a heatmap
  std::optional<double> auc;
  std::optional<double> min_dist;
  std::optional<double> avg_dist;
  std::optional<double> f1_lah;
  std::optional<double> f1_laeo;
  std::size_t lah_pairs = 0;
  std::size_t laeo_pairs = 0;
  std::size_t skipped_pairs = 0;
};

inline GazeReport evaluate_gaze(
    const std::map<std::string, std::vector<GazePrediction>>& preds,
    const std::vector<ImageRecord>& records) {
  GazeReport r;
  double auc_sum = 0, min_sum = 0, avg_sum = 0;
  std::vector<int> lah_pred, lah_gt, laeo_pred, laeo_gt;
  std::map<std::string, const ImageRecord*> record_of;
  for (const auto& rec : records) record_of[rec.image_id] = &rec;
  for (const auto& [image_id, list] : preds) {
    if (!record_of.count(image_id)) {
      throw DataError("predictions reference unknown image '" + image_id + "'");
    }
  }

  for (const auto& rec : records) {
    const auto it = preds.find(rec.image_id);
    if (it == preds.end()) continue;
    std::map<std::string, const GazePrediction*> pred_of;
    for (const auto& p : it->second) pred_of[p.person_id] = &p;
    for (const auto& person : rec.persons) {
      const auto pit = pred_of.find(person.person_id);
      if (pit == pred_of.end() || !person.gaze_points || person.gaze_points->empty()) continue;
      const auto d = l2_distances(pit->second->point, *person.gaze_points);
      ++r.instances;
      min_sum += d.min;
      avg_sum += d.avg;
      if (pit->second->heatmap) {
        auc_sum += auc(*pit->second->heatmap, *person.gaze_points);
        ++r.auc_instances;
      }
    }

    const auto gt = derive_pairwise_gt(rec.persons);
    const auto pr = predict_pairwise(it->second, rec.persons);
    r.skipped_pairs += gt.skipped.size();
    auto index = [](const std::vector<PairwiseGazeLabel>& v) {
      std::map<std::pair<std::string, std::string>, bool> m;
      for (const auto& l : v) m[{l.from, l.to}] = l.value;
      return m;
    };
    const auto pr_lah = index(pr.lah), pr_laeo = index(pr.laeo);
    for (const auto& l : gt.lah) {
      const auto p = pr_lah.find({l.from, l.to});
      if (p == pr_lah.end()) continue;
      lah_gt.push_back(l.value);
      lah_pred.push_back(p->second);
    }
    for (const auto& l : gt.laeo) {
      const auto p = pr_laeo.find({l.from, l.to});
      if (p == pr_laeo.end()) continue;
      laeo_gt.push_back(l.value);
      laeo_pred.push_back(p->second);
    }
  }
  if (r.instances) {
    r.min_dist = min_sum / static_cast<double>(r.instances);
    r.avg_dist = avg_sum / static_cast<double>(r.instances);
  }
  if (r.auc_instances) r.auc = auc_sum / static_cast<double>(r.auc_instances);
  r.lah_pairs = lah_gt.size();
  r.laeo_pairs = laeo_gt.size();
  if (!lah_gt.empty()) r.f1_lah = f1(lah_pred, lah_gt);
  if (!laeo_gt.empty()) r.f1_laeo = f1(laeo_pred, laeo_gt);
  return r;
}

inline nlohmann::json report_to_json(const GazeReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"instances", r.instances},   {"auc_instances", r.auc_instances},
          {"auc", opt(r.auc)},          {"min_dist", opt(r.min_dist)},
          {"avg_dist", opt(r.avg_dist)}, {"f1_lah", opt(r.f1_lah)},
          {"f1_laeo", opt(r.f1_laeo)},  {"lah_pairs", r.lah_pairs},
          {"laeo_pairs", r.laeo_pairs}, {"skipped_pairs", r.skipped_pairs}};
}

}  // namespace ctxcue
