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

// Annotation ingestion, cue vocabularies and score-file (JSON Lines) I/O.
//
// Annotation schema:
//   {"images": [{"image_id", "path",
//                "persons": [{"person_id", "bbox": [x1,y1,x2,y2],
//                             "head_bbox": [...],          (optional)
//                             "gaze_points": [[x,y],...],  (optional)
//                             "cue_labels": {cue: 0|1}}]}]} (optional)
//
// Score line:
//   {"image_id", "person_id", "sample_id", "scores": {cue: value}, "state",
//    "vqa": {"questions", "parse_failures"}}   ("vqa" only for VQA runs)

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxcue/error.hpp"
#include "ctxcue/image.hpp"
#include "ctxcue/scoring.hpp"
#include "ctxcue/text_util.hpp"

namespace ctxcue {

struct GazePoint {
  double x = 0, y = 0;
  bool operator==(const GazePoint&) const = default;
};

struct PersonRegion {
  std::string person_id;
  BBox bbox;
  std::optional<BBox> head_bbox;
  std::optional<std::vector<GazePoint>> gaze_points;
  std::optional<std::map<std::string, int>> cue_labels;

  bool operator==(const PersonRegion&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::string path;
  std::vector<PersonRegion> persons;

  bool operator==(const ImageRecord&) const = default;
};

struct ClassCounts {
  std::size_t negatives = 0;
  std::size_t positives = 0;
  bool operator==(const ClassCounts&) const = default;
};

/// Per-class (negative, positive) label counts over all persons.
inline std::map<std::string, ClassCounts> class_counts(
    const std::vector<ImageRecord>& records) {
  std::map<std::string, ClassCounts> out;
  for (const auto& rec : records) {
    for (const auto& p : rec.persons) {
      if (!p.cue_labels) continue;
      for (const auto& [cue, label] : *p.cue_labels) {
        auto& c = out[cue];
        (label ? c.positives : c.negatives) += 1;
      }
    }
  }
  return out;
}

// --- vocabularies -----------------------------------------------------------

struct CueVocabulary {
  std::string name = "custom";
  std::vector<std::string> classes;
};

/// Class counts required for the named vocabularies.
inline std::optional<std::size_t> expected_vocabulary_size(const std::string& name) {
  if (name == "AVA+CP") return 24;
  if (name == "HICO") return 117;
  if (name == "SWIG") return 406;
  return std::nullopt;
}

inline void validate(const CueVocabulary& v) {
  if (v.name != "AVA+CP" && v.name != "HICO" && v.name != "SWIG" &&
      v.name != "custom") {
    throw ConfigError("vocabulary name must be AVA+CP, HICO, SWIG or custom");
  }
  if (v.classes.empty()) throw ConfigError("vocabulary '" + v.name + "' is empty");
  std::set<std::string> seen;
  for (const auto& c : v.classes) {
    if (c.empty()) throw ConfigError("vocabulary has an empty class id");
    if (!seen.insert(c).second) throw ConfigError("vocabulary: duplicate class '" + c + "'");
  }
  if (auto n = expected_vocabulary_size(v.name); n && *n != v.classes.size()) {
    throw ConfigError("vocabulary " + v.name + " must have " + std::to_string(*n) +
                      " classes, got " + std::to_string(v.classes.size()));
  }
}

inline CueVocabulary vocabulary_from_json(const nlohmann::json& j) {
  CueVocabulary v;
  try {
    v.name = j.value("name", std::string("custom"));
    v.classes = j.at("classes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("vocabulary: ") + e.what());
  }
  validate(v);
  return v;
}

inline CueVocabulary load_vocabulary(const std::string& path) {
  try {
    return vocabulary_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("vocabulary '" + path + "': " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

// --- annotations ------------------------------------------------------------

namespace detail {

inline BBox parse_box(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    throw DataError(where + ": box must be [x1,y1,x2,y2]");
  }
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError(where + ": box entries must be numbers");
  }
  BBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
         j[3].get<double>()};
  if (!b.valid()) {
    throw DataError(where + ": invalid box (need 0 <= x1 < x2 <= 1, 0 <= y1 < y2 <= 1)");
  }
  return b;
}

inline nlohmann::json box_json(const BBox& b) { return {b.x1, b.y1, b.x2, b.y2}; }

}  // namespace detail

inline std::vector<ImageRecord> annotations_from_json(const nlohmann::json& root,
                                                      const std::string& source) {
  if (!root.is_object() || !root.contains("images") || !root["images"].is_array()) {
    throw DataError(source + ": expected an object with an \"images\" array");
  }
  std::vector<ImageRecord> records;
  std::set<std::string> image_ids;
  const auto& images = root["images"];
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    std::string where = source + ": images[" + std::to_string(i) + "]";
    try {
      ImageRecord rec;
      rec.image_id = img.at("image_id").get<std::string>();
      where += " '" + rec.image_id + "'";
      if (!image_ids.insert(rec.image_id).second) {
        throw DataError(where + ": duplicate image_id");
      }
      rec.path = img.value("path", std::string());
      std::set<std::string> person_ids;
      const auto& persons = img.at("persons");
      for (std::size_t k = 0; k < persons.size(); ++k) {
        const auto& pj = persons[k];
        std::string pwhere = where + " persons[" + std::to_string(k) + "]";
        PersonRegion p;
        p.person_id = pj.at("person_id").get<std::string>();
        pwhere += " '" + p.person_id + "'";
        if (!person_ids.insert(p.person_id).second) {
          throw DataError(pwhere + ": duplicate person_id");
        }
        p.bbox = detail::parse_box(pj.at("bbox"), pwhere + " bbox");
        if (pj.contains("head_bbox") && !pj["head_bbox"].is_null()) {
          p.head_bbox = detail::parse_box(pj["head_bbox"], pwhere + " head_bbox");
        }
        if (pj.contains("gaze_points") && !pj["gaze_points"].is_null()) {
          std::vector<GazePoint> pts;
          for (const auto& g : pj["gaze_points"]) {
            if (!g.is_array() || g.size() != 2) {
              throw DataError(pwhere + " gaze_points: each point must be [x,y]");
            }
            GazePoint pt{g[0].get<double>(), g[1].get<double>()};
            if (!(pt.x >= 0 && pt.x <= 1 && pt.y >= 0 && pt.y <= 1)) {
              throw DataError(pwhere + " gaze_points: point outside unit square");
            }
            pts.push_back(pt);
          }
          p.gaze_points = std::move(pts);
        }
        if (pj.contains("cue_labels") && !pj["cue_labels"].is_null()) {
          std::map<std::string, int> labels;
          for (const auto& [cue, v] : pj["cue_labels"].items()) {
            const int label = v.is_boolean() ? int(v.get<bool>()) : v.get<int>();
            if (label != 0 && label != 1) {
              throw DataError(pwhere + " cue_labels['" + cue + "']: must be 0 or 1");
            }
            labels[cue] = label;
          }
          p.cue_labels = std::move(labels);
        }
        rec.persons.push_back(std::move(p));
      }
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return records;
}

inline std::vector<ImageRecord> load_annotations(const std::string& path) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  return annotations_from_json(root, path);
}

inline nlohmann::json annotations_to_json(const std::vector<ImageRecord>& records) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& rec : records) {
    nlohmann::json persons = nlohmann::json::array();
    for (const auto& p : rec.persons) {
      nlohmann::json pj{{"person_id", p.person_id}, {"bbox", detail::box_json(p.bbox)}};
      if (p.head_bbox) pj["head_bbox"] = detail::box_json(*p.head_bbox);
      if (p.gaze_points) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& g : *p.gaze_points) pts.push_back({g.x, g.y});
        pj["gaze_points"] = std::move(pts);
      }
      if (p.cue_labels) pj["cue_labels"] = *p.cue_labels;
      persons.push_back(std::move(pj));
    }
    images.push_back({{"image_id", rec.image_id}, {"path", rec.path}, {"persons", persons}});
  }
  return {{"images", images}};
}

// --- score files --------------------------------------------------------------

inline std::string scores_to_jsonl(const ScoreMatrix& m) {
  m.check_shape();
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    nlohmann::json scores = nlohmann::json::object();
    for (std::size_t c = 0; c < m.cols(); ++c) scores[m.class_ids[c]] = m.at(r, c);
    nlohmann::json line{{"sample_id", m.samples[r].sample_id},
                        {"image_id", m.samples[r].image_id},
                        {"person_id", m.samples[r].person_id},
                        {"scores", std::move(scores)},
                        {"state", std::string(to_string(m.state))}};
    if (!m.vqa.empty()) {
      line["vqa"] = {{"questions", m.vqa[r].questions},
                     {"parse_failures", m.vqa[r].parse_failures}};
    }
    out += line.dump();
    out.push_back('\n');
  }
  return out;
}

/// Class ids come back sorted (score objects are key-sorted on disk).
inline ScoreMatrix scores_from_jsonl(const std::string& text, const std::string& source) {
  ScoreMatrix m;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  bool has_vqa = false;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      SampleKey key{j.value("sample_id", std::string()), j.at("image_id").get<std::string>(),
                    j.at("person_id").get<std::string>()};
      if (key.sample_id.empty()) key.sample_id = make_sample_id(key.image_id, key.person_id);
      if (!seen.insert(key.sample_id).second) {
        throw DataError(where + ": duplicate sample '" + key.sample_id + "'");
      }
      const ScoreState state = score_state_from_string(j.at("state").get<std::string>());
      const auto& scores = j.at("scores");
      if (!scores.is_object()) throw DataError(where + ": scores must be an object");
      if (first) {
        for (const auto& [k, v] : scores.items()) m.class_ids.push_back(k);
        m.state = state;
        has_vqa = j.contains("vqa");
        first = false;
      } else if (state != m.state) {
        throw DataError(where + ": mixed score states in one file");
      }
      if (scores.size() != m.class_ids.size()) {
        throw DataError(where + ": expected " + std::to_string(m.class_ids.size()) +
                        " class scores");
      }
      for (const auto& c : m.class_ids) {
        if (!scores.contains(c)) throw DataError(where + ": missing score for '" + c + "'");
        m.values.push_back(scores[c].get<double>());
      }
      if (has_vqa != j.contains("vqa")) {
        throw DataError(where + ": vqa stats present on some lines only");
      }
      if (has_vqa) {
        m.vqa.push_back({j["vqa"].at("questions").get<std::size_t>(),
                         j["vqa"].at("parse_failures").get<std::size_t>()});
      }
      m.samples.push_back(std::move(key));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return m;
}

inline ScoreMatrix load_scores(const std::string& path) {
  return scores_from_jsonl(read_file(path), path);
}

/// Copy of `m` with columns in the order of `class_ids`.
inline ScoreMatrix select_columns(const ScoreMatrix& m,
                                  const std::vector<std::string>& class_ids) {
  std::vector<std::size_t> idx;
  for (const auto& c : class_ids) {
    const auto it = std::find(m.class_ids.begin(), m.class_ids.end(), c);
    if (it == m.class_ids.end()) throw DataError("scores lack class '" + c + "'");
    idx.push_back(static_cast<std::size_t>(it - m.class_ids.begin()));
  }
  ScoreMatrix out = m;
  out.class_ids = class_ids;
  out.values.assign(m.rows() * class_ids.size(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < idx.size(); ++c) out.at(r, c) = m.at(r, idx[c]);
  }
  return out;
}

struct ExportSummary {
  std::size_t persons = 0;
  std::size_t classes = 0;
  std::string vocabulary;
};

/// Writes one line per annotated person with its full score vector, in
/// annotation order. Every person must have a score row and every score row
/// must belong to an annotated person.
inline ExportSummary export_cue_scores(const std::vector<ImageRecord>& records,
                                       const ScoreMatrix& m,
                                       const CueVocabulary& vocabulary,
                                       const std::string& path) {
  m.check_shape();
  if (m.state == ScoreState::kBinary) {
    throw DataError("export expects raw or normalized scores, got binary");
  }
  validate(vocabulary);
  const ScoreMatrix cols = select_columns(m, vocabulary.classes);

  std::map<std::pair<std::string, std::string>, std::size_t> row_of;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    row_of[{m.samples[r].image_id, m.samples[r].person_id}] = r;
  }
  ScoreMatrix ordered;
  ordered.class_ids = cols.class_ids;
  ordered.state = cols.state;
  std::size_t matched = 0;
  for (const auto& rec : records) {
    for (const auto& p : rec.persons) {
      const auto it = row_of.find({rec.image_id, p.person_id});
      if (it == row_of.end()) {
        throw DataError("no scores for image '" + rec.image_id + "' person '" +
                        p.person_id + "'");
      }
      ++matched;
      ordered.samples.push_back(cols.samples[it->second]);
      for (std::size_t c = 0; c < cols.cols(); ++c) {
        ordered.values.push_back(cols.at(it->second, c));
      }
    }
  }
  if (matched != m.rows()) {
    throw DataError("score file has " + std::to_string(m.rows() - matched) +
                    " sample(s) not present in the annotations");
  }
  write_file(path, scores_to_jsonl(ordered));
  return {matched, ordered.cols(), vocabulary.name};
}

}  // namespace ctxcue
