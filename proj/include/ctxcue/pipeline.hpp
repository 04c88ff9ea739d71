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

// End-to-end cue extraction run: annotations -> visual prompt per person ->
// backend scores -> per-run normalization -> scores file, evaluation report
// and a reproducibility record.
//
// Manifest (JSON, paths relative to the manifest's directory):
//   {"annotations": "...", "prompt_config": "...",
//    "vocabulary": {"name", "classes"} | "vocabulary_path": "...",   (optional)
//    "visual_prompt": "full_image:ellipse" | {...},                 (optional)
//    "backend": {...descriptor...},                                 (optional)
//    "scoring_mode": "itm" | "itm-ensemble" | "vqa" | "vqa-icl",    (optional)
//    "output_dir": "...", "image_root": "...", "seed": 0}

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxcue/backend.hpp"
#include "ctxcue/dataset_io.hpp"
#include "ctxcue/error.hpp"
#include "ctxcue/hash.hpp"
#include "ctxcue/metrics_cue.hpp"
#include "ctxcue/parallel.hpp"
#include "ctxcue/png_io.hpp"
#include "ctxcue/prompt_text.hpp"
#include "ctxcue/prompt_visual.hpp"
#include "ctxcue/remote_backend.hpp"
#include "ctxcue/scoring.hpp"

namespace ctxcue {

inline constexpr const char* kToolVersion = "ctxcue 1.0.0";

enum class ScoringMode { kItm, kItmEnsemble, kVqa, kVqaIcl };

inline std::string_view to_string(ScoringMode m) {
  switch (m) {
    case ScoringMode::kItm: return "itm";
    case ScoringMode::kItmEnsemble: return "itm-ensemble";
    case ScoringMode::kVqa: return "vqa";
    case ScoringMode::kVqaIcl: return "vqa-icl";
  }
  return "?";
}

inline ScoringMode scoring_mode_from_string(std::string_view s) {
  if (s == "itm") return ScoringMode::kItm;
  if (s == "itm-ensemble") return ScoringMode::kItmEnsemble;
  if (s == "vqa") return ScoringMode::kVqa;
  if (s == "vqa-icl") return ScoringMode::kVqaIcl;
  throw ConfigError("unknown scoring mode '" + std::string(s) + "'");
}

/// Re-raises a toolkit error with the stage name prefixed, keeping its kind.
template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw_error(e.kind(), std::string("[") + stage + "] " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("[") + stage + "] " + e.what());
  }
}

/// Everything needed to score samples, independent of where it came from.
struct ScoringJob {
  std::vector<ImageRecord> records;
  PromptConfig prompts;
  CueVocabulary vocabulary;
  VisualPromptSpec visual_prompt;
  ScoringMode mode = ScoringMode::kItmEnsemble;
  std::string image_root;  // resolves relative ImageRecord::path
};

/// Per-class prompt texts used by ITM modes: all expanded prompts for the
/// ensemble, the first one otherwise.
inline std::map<std::string, std::vector<std::string>> itm_prompt_texts(const ScoringJob& job) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& cls : job.vocabulary.classes) {
    auto prompts = expand_prompts(job.prompts.templates, job.prompts.table, cls);
    if (prompts.empty()) throw ConfigError("no prompts for class '" + cls + "'");
    if (job.mode == ScoringMode::kItm) prompts.resize(1);
    for (auto& p : prompts) out[cls].push_back(std::move(p.text));
  }
  return out;
}

namespace detail {

struct Sample {
  SampleKey key;
  const ImageBuffer* image;
  BBox box;
};

inline std::vector<Sample> collect_samples(const ScoringJob& job,
                                           std::map<std::string, ImageBuffer>& images) {
  std::vector<Sample> samples;
  for (const auto& rec : job.records) {
    std::filesystem::path p = rec.path;
    if (p.empty()) throw DataError("image '" + rec.image_id + "' has no path");
    if (p.is_relative() && !job.image_root.empty()) p = std::filesystem::path(job.image_root) / p;
    auto [it, inserted] = images.try_emplace(rec.image_id);
    if (inserted) it->second = read_png(p.string());
    for (const auto& person : rec.persons) {
      samples.push_back({{make_sample_id(rec.image_id, person.person_id), rec.image_id,
                          person.person_id},
                         &it->second,
                         person.bbox});
    }
  }
  if (samples.empty()) throw DataError("annotations contain no persons");
  return samples;
}

}  // namespace detail

/// Scores every annotated person. ITM modes return raw similarity scores;
/// VQA modes return binary scores (strict majority of yes answers over the
/// class's questions) with per-sample parse statistics.
inline ScoreMatrix score_samples(Backend& backend, const ScoringJob& job) {
  validate(job.vocabulary);
  job.visual_prompt.validate();
  std::map<std::string, ImageBuffer> images;
  const auto samples = run_stage("load-images", [&] { return detail::collect_samples(job, images); });
  const std::size_t workers = backend.descriptor().max_inflight;

  ScoreMatrix m;
  m.class_ids = job.vocabulary.classes;
  for (const auto& s : samples) m.samples.push_back(s.key);
  const std::size_t k = m.class_ids.size();

  if (job.mode == ScoringMode::kItm || job.mode == ScoringMode::kItmEnsemble) {
    if (!backend.capability().supports_itm) throw BackendError("backend lacks ITM");
    const auto texts = run_stage("expand-prompts", [&] { return itm_prompt_texts(job); });
    std::vector<std::string> unique;
    std::unordered_map<std::string, std::size_t> index_of;
    for (const auto& [cls, list] : texts) {
      for (const auto& t : list) {
        if (index_of.emplace(t, unique.size()).second) unique.push_back(t);
      }
    }
    const auto text_emb = run_stage("embed-text", [&] { return backend.embed_texts(unique); });
    std::vector<std::vector<Embedding>> class_prompts(k);
    for (std::size_t c = 0; c < k; ++c) {
      for (const auto& t : texts.at(m.class_ids[c])) class_prompts[c].push_back(text_emb[index_of.at(t)]);
    }
    const auto rows = run_stage("score-itm", [&] {
      return ordered_parallel_map(samples.size(), workers, [&](std::size_t i) {
        const ImageBuffer rendered =
            render_visual_prompt(*samples[i].image, samples[i].box, job.visual_prompt);
        const Embedding e = backend.embed_image(rendered);
        std::vector<double> row(k);
        for (std::size_t c = 0; c < k; ++c) {
          row[c] = job.mode == ScoringMode::kItm ? similarity_scores(e, class_prompts[c]).front()
                                                 : ensemble_score(e, class_prompts[c]);
        }
        return row;
      });
    });
    for (const auto& row : rows) m.values.insert(m.values.end(), row.begin(), row.end());
    m.state = ScoreState::kRaw;
    return m;
  }

  if (!backend.capability().supports_vqa) throw BackendError("backend lacks VQA");
  const bool icl = job.mode == ScoringMode::kVqaIcl;
  std::vector<std::vector<VqaQuestion>> questions(k);
  run_stage("expand-prompts", [&] {
    for (std::size_t c = 0; c < k; ++c) questions[c] = vqa_questions(job.prompts.table, m.class_ids[c]);
    return 0;
  });
  struct Row {
    std::vector<double> values;
    VqaStats stats;
  };
  const auto rows = run_stage("score-vqa", [&] {
    return ordered_parallel_map(samples.size(), workers, [&](std::size_t i) {
      const ImageBuffer rendered =
          render_visual_prompt(*samples[i].image, samples[i].box, job.visual_prompt);
      std::optional<std::string> caption;
      if (icl) {
        if (!backend.capability().supports_caption) throw BackendError("backend lacks captioning");
        caption = backend.caption(rendered);
      }
      Row row;
      row.values.resize(k);
      for (std::size_t c = 0; c < k; ++c) {
        std::size_t yes = 0;
        for (const auto& q : questions[c]) {
          const auto v = vqa_ask(backend, rendered, q, caption);
          yes += v.positive;
          row.stats.parse_failures += !v.parse_ok;
          ++row.stats.questions;
        }
        row.values[c] = 2 * yes > questions[c].size() ? 1.0 : 0.0;
      }
      return row;
    });
  });
  for (const auto& row : rows) {
    m.values.insert(m.values.end(), row.values.begin(), row.values.end());
    m.vqa.push_back(row.stats);
  }
  m.state = ScoreState::kBinary;
  return m;
}

struct RunManifest {
  std::string annotations;
  std::string prompt_config;
  std::optional<CueVocabulary> vocabulary;  // default: prompt-config classes
  VisualPromptSpec visual_prompt;           // default: full image + ellipse
  BackendDescriptor backend;
  ScoringMode mode = ScoringMode::kItmEnsemble;
  std::string output_dir;
  std::string image_root;  // default: the annotation file's directory
  std::uint64_t seed = 0;
  std::string source;      // manifest path, for hashing
};

inline RunManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_relative() ? base / path : path).lexically_normal().string();
  };
  RunManifest m;
  try {
    m.annotations = resolve(j.at("annotations").get<std::string>());
    m.prompt_config = resolve(j.at("prompt_config").get<std::string>());
    m.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (j.contains("vocabulary") && j.contains("vocabulary_path")) {
      throw ConfigError("manifest: give vocabulary or vocabulary_path, not both");
    }
    if (j.contains("vocabulary")) m.vocabulary = vocabulary_from_json(j["vocabulary"]);
    if (j.contains("vocabulary_path")) {
      m.vocabulary = load_vocabulary(resolve(j["vocabulary_path"].get<std::string>()));
    }
    if (j.contains("visual_prompt")) m.visual_prompt = spec_from_json(j["visual_prompt"]);
    if (j.contains("backend")) m.backend = descriptor_from_json(j["backend"]);
    if (!m.backend.cache_dir.empty()) m.backend.cache_dir = resolve(m.backend.cache_dir);
    if (j.contains("scoring_mode")) {
      m.mode = scoring_mode_from_string(j["scoring_mode"].get<std::string>());
    }
    m.image_root = j.contains("image_root")
                       ? resolve(j["image_root"].get<std::string>())
                       : std::filesystem::path(m.annotations).parent_path().string();
    m.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  for (const auto* f : {&m.annotations, &m.prompt_config}) {
    if (!std::filesystem::exists(*f)) throw ConfigError("manifest: file not found: " + *f);
  }
  return m;
}

inline RunManifest load_manifest(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("manifest '" + path + "': " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  auto m = manifest_from_json(j, std::filesystem::path(path).parent_path());
  m.source = path;
  return m;
}

/// Vocabulary of a run: the manifest's, else every class of the prompt
/// config in key order.
inline CueVocabulary run_vocabulary(const std::optional<CueVocabulary>& given,
                                    const PromptConfig& prompts) {
  if (given) return *given;
  CueVocabulary v;
  for (const auto& [cls, syns] : prompts.table.class_synonyms) v.classes.push_back(cls);
  validate(v);
  return v;
}

struct RunReport {
  ScoreMatrix scores;  // normalized (ITM) or binary (VQA)
  CueReport evaluation;
  std::vector<std::string> files;  // written, in order
};

namespace detail {

inline std::string file_hash(const std::string& path) {
  return path.empty() ? std::string() : hex64(fnv1a64(read_file(path)));
}

/// Writes all outputs or none: files already written are removed if a later
/// write fails.
inline std::vector<std::string> commit_outputs(
    const std::filesystem::path& dir,
    const std::vector<std::pair<std::string, std::string>>& outputs) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output dir '" + dir.string() + "': " + ec.message());
  std::vector<std::string> written;
  try {
    for (const auto& [name, contents] : outputs) {
      const auto path = (dir / name).string();
      write_file(path, contents);
      written.push_back(path);
    }
  } catch (...) {
    for (const auto& p : written) std::filesystem::remove(p, ec);
    throw;
  }
  return written;
}

}  // namespace detail

/// Runs the manifest against `backend` and writes scores.jsonl, report.json
/// and run.json into the output directory. Nothing is written unless every
/// stage succeeds.
inline RunReport run_pipeline(const RunManifest& manifest, Backend& backend) {
  ScoringJob job;
  job.records = run_stage("load-annotations", [&] { return load_annotations(manifest.annotations); });
  job.prompts = run_stage("load-prompts", [&] { return load_prompt_config(manifest.prompt_config); });
  job.vocabulary = run_stage("vocabulary", [&] { return run_vocabulary(manifest.vocabulary, job.prompts); });
  job.visual_prompt = manifest.visual_prompt;
  job.mode = manifest.mode;
  job.image_root = manifest.image_root;

  RunReport report;
  ScoreMatrix scored = score_samples(backend, job);
  report.scores = run_stage("normalize", [&] {
    return scored.state == ScoreState::kRaw ? normalize_scores(scored) : scored;
  });
  report.evaluation = run_stage("evaluate", [&] { return evaluate_cues(report.scores, job.records); });

  nlohmann::json eval = report_to_json(report.evaluation);
  nlohmann::json counts = nlohmann::json::object();
  const auto recount = class_counts(job.records);
  for (const auto& cls : job.vocabulary.classes) {
    const auto it = recount.find(cls);
    const ClassCounts c = it == recount.end() ? ClassCounts{} : it->second;
    counts[cls] = {{"negatives", c.negatives}, {"positives", c.positives}};
  }
  eval["label_counts"] = counts;

  nlohmann::json prompts_per_class = nlohmann::json::object();
  if (job.mode == ScoringMode::kItm || job.mode == ScoringMode::kItmEnsemble) {
    for (const auto& [cls, list] : itm_prompt_texts(job)) prompts_per_class[cls] = list.size();
  } else {
    for (const auto& cls : job.vocabulary.classes) {
      prompts_per_class[cls] = vqa_questions(job.prompts.table, cls).size();
    }
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : report.scores.samples) samples.push_back(s.sample_id);
  nlohmann::json backend_json = descriptor_to_json(backend.descriptor());
  backend_json["embedding_dim"] = backend.dim();
  const nlohmann::json run{
      {"tool", kToolVersion},
      {"scoring_mode", std::string(to_string(job.mode))},
      {"model_tag", backend.descriptor().model_tag},
      {"backend", backend_json},
      {"seed", manifest.seed},
      {"visual_prompt", spec_to_json(job.visual_prompt)},
      {"visual_prompt_stroke_rule", "max(2, ceil(0.0035 * image diagonal)) when auto"},
      {"vocabulary", {{"name", job.vocabulary.name}, {"classes", job.vocabulary.classes}}},
      {"prompts_per_class", prompts_per_class},
      {"normalization", {{"scope", "run"},
                         {"population", samples},
                         {"std", "population"},
                         {"constant_column_epsilon", kConstantColumnEpsilon}}},
      {"binarization_threshold", 0.0},
      {"config_hashes", {{"annotations", detail::file_hash(manifest.annotations)},
                         {"prompt_config", detail::file_hash(manifest.prompt_config)},
                         {"manifest", detail::file_hash(manifest.source)}}}};

  report.files = run_stage("write-outputs", [&] {
    return detail::commit_outputs(manifest.output_dir,
                                  {{"scores.jsonl", scores_to_jsonl(report.scores)},
                                   {"report.json", eval.dump(2) + "\n"},
                                   {"run.json", run.dump(2) + "\n"}});
  });
  return report;
}

}  // namespace ctxcue
