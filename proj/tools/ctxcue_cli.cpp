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

// ctxcue command-line front end.
//
// Exit codes: 0 ok, 2 configuration/usage error, 3 backend error, 4 data error.

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctxcue/backend_server.hpp"
#include "ctxcue/fusion.hpp"
#include "ctxcue/gaze_eval.hpp"
#include "ctxcue/pipeline.hpp"

namespace {

using namespace ctxcue;

struct BackendOptions {
  std::string descriptor_path;
  std::string endpoint;
  std::string model_tag;
  std::size_t dim = 0;
  std::size_t max_inflight = 0;
  std::string cache_dir;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--backend", descriptor_path, "Backend descriptor JSON file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--endpoint", endpoint, "Remote model service URL (implies a remote backend)");
    cmd->add_option("--model-tag", model_tag, "Model tag override");
    cmd->add_option("--dim", dim, "Embedding dimension (mock default 64; remote: from health)");
    cmd->add_option("--max-inflight", max_inflight, "Concurrent backend requests");
    cmd->add_option("--cache-dir", cache_dir, "On-disk response cache directory (remote only)");
  }

  /// `base` with the file (if given) and flag overrides applied.
  BackendDescriptor descriptor(BackendDescriptor base = {}) const {
    BackendDescriptor d = std::move(base);
    if (!descriptor_path.empty()) {
      d = descriptor_from_json(nlohmann::json::parse(read_file(descriptor_path)));
    }
    if (!endpoint.empty()) {
      if (d.kind == BackendKind::kMock) {
        d.kind = BackendKind::kRemote;
        d.embedding_dim = 0;
        d.model_tag.clear();
      }
      d.endpoint = endpoint;
    }
    if (!model_tag.empty()) d.model_tag = model_tag;
    if (dim) d.embedding_dim = dim;
    if (max_inflight) d.max_inflight = max_inflight;
    if (!cache_dir.empty()) d.cache_dir = cache_dir;
    d.validate();
    return d;
  }
};

BBox parse_bbox(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--bbox: '" + item + "' is not a number");
    }
  }
  if (v.size() != 4) throw ConfigError("--bbox expects x1,y1,x2,y2");
  const BBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) throw ConfigError("--bbox must satisfy 0 <= x1 < x2 <= 1, 0 <= y1 < y2 <= 1");
  return b;
}

std::optional<CueVocabulary> maybe_vocabulary(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_vocabulary(path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

// Scoring shared by score-itm and score-vqa.
struct ScoreOptions {
  std::string annotations;
  std::string prompts;
  std::string vocabulary;
  std::string spec = "full_image:ellipse";
  std::string image_root;
  std::string out;
  BackendOptions backend;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--annotations", annotations, "Annotation JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--prompts", prompts, "Prompt config JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--vocabulary", vocabulary, "Cue vocabulary JSON (default: prompt-config classes)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--spec", spec, "Visual prompt <base>:<style>")->capture_default_str();
    cmd->add_option("--image-root", image_root, "Directory for relative image paths (default: annotation dir)");
    cmd->add_option("--out", out, "Output scores JSONL ('-' for stdout)")->required();
    backend.add_to(cmd);
  }

  ScoreMatrix score(ScoringMode mode) const {
    ScoringJob job;
    job.records = load_annotations(annotations);
    job.prompts = load_prompt_config(prompts);
    job.vocabulary = run_vocabulary(maybe_vocabulary(vocabulary), job.prompts);
    job.visual_prompt = parse_spec_name(spec);
    job.mode = mode;
    job.image_root = image_root.empty()
                         ? std::filesystem::path(annotations).parent_path().string()
                         : image_root;
    auto be = make_backend(backend.descriptor());
    return score_samples(*be, job);
  }
};

BackendServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctxcue: zero-shot contextual-cue scoring and evaluation"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // expand-prompts
  auto* expand = app.add_subcommand("expand-prompts", "Print the expanded text prompts of one cue, one per line");
  std::string expand_config, expand_cue;
  bool expand_vqa = false;
  expand->add_option("--config", expand_config, "Prompt config JSON")->required()->check(CLI::ExistingFile);
  expand->add_option("--cue", expand_cue, "Cue class id")->required();
  expand->add_flag("--vqa", expand_vqa, "Print VQA questions instead of ITM prompts");

  // render-prompts
  auto* render = app.add_subcommand("render-prompts", "Render a visual prompt for one person box");
  std::string render_image, render_bbox, render_spec = "full_image:ellipse", render_out;
  std::optional<int> render_stroke;
  std::optional<double> render_sigma, render_margin, render_crop_margin;
  render->add_option("--image", render_image, "Input PNG")->required()->check(CLI::ExistingFile);
  render->add_option("--bbox", render_bbox, "Person box x1,y1,x2,y2 (normalized)")->required();
  render->add_option("--spec", render_spec, "<base>:<style>, base in {full_image, person_crop}, "
                                           "style in {plain, ellipse, blur, gray}, or 'all'")
      ->capture_default_str();
  render->add_option("--stroke", render_stroke, "Ellipse stroke in pixels");
  render->add_option("--blur-sigma", render_sigma, "Blur sigma as a fraction of the diagonal");
  render->add_option("--ellipse-margin", render_margin, "Ellipse margin as a fraction of box size");
  render->add_option("--crop-margin", render_crop_margin, "Crop margin as a fraction of box size");
  render->add_option("--out", render_out, "Output PNG, or a directory when --spec all")->required();

  // score-itm / score-vqa
  auto* score_itm = app.add_subcommand("score-itm", "Image-text matching scores for every annotated person");
  ScoreOptions itm_opts;
  bool itm_single = false, itm_normalize = false;
  itm_opts.add_to(score_itm);
  score_itm->add_flag("--single-prompt", itm_single, "Use the first prompt per class instead of the ensemble");
  score_itm->add_flag("--normalize", itm_normalize, "Z-score each class over this run's samples");

  auto* score_vqa = app.add_subcommand("score-vqa", "Yes/no question answering scores for every annotated person");
  ScoreOptions vqa_opts;
  bool vqa_icl = false;
  vqa_opts.add_to(score_vqa);
  score_vqa->add_flag("--icl", vqa_icl, "Prefix each question with a generated caption");

  // normalize
  auto* normalize = app.add_subcommand("normalize", "Z-score raw scores per class");
  std::string norm_in, norm_out;
  normalize->add_option("--scores", norm_in, "Raw scores JSONL")->required()->check(CLI::ExistingFile);
  normalize->add_option("--out", norm_out, "Normalized scores JSONL ('-' for stdout)")->required();

  // eval-cues
  auto* eval_cues = app.add_subcommand("eval-cues", "Per-class AP, mAP and accuracy");
  std::string ec_scores, ec_ann, ec_out;
  eval_cues->add_option("--scores", ec_scores, "Scores JSONL")->required()->check(CLI::ExistingFile);
  eval_cues->add_option("--annotations", ec_ann, "Annotation JSON")->required()->check(CLI::ExistingFile);
  eval_cues->add_option("--out", ec_out, "Report JSON ('-' for stdout)")->capture_default_str();

  // eval-gaze
  auto* eval_gaze = app.add_subcommand("eval-gaze", "Gaze AUC, L2 distances and LAH/LAEO F1");
  std::string eg_pred, eg_ann, eg_out;
  eval_gaze->add_option("--predictions", eg_pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  eval_gaze->add_option("--annotations", eg_ann, "Annotation JSON")->required()->check(CLI::ExistingFile);
  eval_gaze->add_option("--out", eg_out, "Report JSON ('-' for stdout)");

  // export-cues
  auto* export_cues = app.add_subcommand("export-cues", "Export per-person cue vectors for fusion");
  std::string ex_scores, ex_ann, ex_vocab, ex_out;
  export_cues->add_option("--scores", ex_scores, "Raw or normalized scores JSONL")->required()->check(CLI::ExistingFile);
  export_cues->add_option("--annotations", ex_ann, "Annotation JSON")->required()->check(CLI::ExistingFile);
  export_cues->add_option("--vocabulary", ex_vocab, "Cue vocabulary JSON (default: the scores' classes)")
      ->check(CLI::ExistingFile);
  export_cues->add_option("--out", ex_out, "Output JSONL")->required();

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Project cue scores to context tokens and add them to person tokens");
  std::string fu_scores, fu_image, fu_mode = "early";
  std::vector<std::string> fu_tokens, fu_out;
  std::uint64_t fu_seed = 0;
  bool fu_zero = false;
  fuse->add_option("--scores", fu_scores, "Scores JSONL (rows in file order, P x K)")->required()->check(CLI::ExistingFile);
  fuse->add_option("--image", fu_image, "Only use score rows of this image id");
  fuse->add_option("--tokens", fu_tokens, "Person token file (P x D); repeat once per block for multistage")
      ->required()->check(CLI::ExistingFile);
  fuse->add_option("--weights-seed", fu_seed, "Seed of the projection weights")->capture_default_str();
  fuse->add_flag("--zero-weights", fu_zero, "Use an all-zero projection");
  fuse->add_option("--mode", fu_mode, "early | multistage")
      ->check(CLI::IsMember({"early", "multistage"}))->capture_default_str();
  fuse->add_option("--out", fu_out, "Output token file; one per --tokens")->required();

  // run
  auto* run = app.add_subcommand("run", "Manifest-driven end-to-end run");
  std::string run_manifest, run_out;
  BackendOptions run_backend;
  run->add_option("--manifest", run_manifest, "Run manifest JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--output-dir", run_out, "Override the manifest's output directory");
  run_backend.add_to(run);

  // serve-mock
  auto* serve = app.add_subcommand("serve-mock", "Serve the deterministic mock backend over the wire protocol");
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::size_t serve_dim = 64;
  std::string serve_tag = "mock";
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--dim", serve_dim, "Embedding dimension")->capture_default_str();
  serve->add_option("--model-tag", serve_tag)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*expand) {
      const auto cfg = load_prompt_config(expand_config);
      if (expand_vqa) {
        for (const auto& q : vqa_questions(cfg.table, expand_cue)) std::cout << q.text << "\n";
      } else {
        for (const auto& p : expand_prompts(cfg.templates, cfg.table, expand_cue)) {
          std::cout << p.text << "\n";
        }
      }
    } else if (*render) {
      const ImageBuffer img = read_png(render_image);
      const BBox box = parse_bbox(render_bbox);
      auto apply = [&](VisualPromptSpec s) {
        if (render_stroke) s.stroke = *render_stroke;
        if (render_sigma) s.blur_sigma = *render_sigma;
        if (render_margin) s.ellipse_margin = *render_margin;
        if (render_crop_margin) s.crop_margin = *render_crop_margin;
        return s;
      };
      if (render_spec == "all") {
        std::filesystem::create_directories(render_out);
        for (const auto& s : all_visual_prompt_specs()) {
          auto name = spec_name(s);
          std::replace(name.begin(), name.end(), ':', '_');
          write_png((std::filesystem::path(render_out) / (name + ".png")).string(),
                    render_visual_prompt(img, box, apply(s)));
        }
      } else {
        write_png(render_out, render_visual_prompt(img, box, apply(parse_spec_name(render_spec))));
      }
    } else if (*score_itm) {
      ScoreMatrix m = itm_opts.score(itm_single ? ScoringMode::kItm : ScoringMode::kItmEnsemble);
      if (itm_normalize) m = normalize_scores(m);
      write_text(itm_opts.out, scores_to_jsonl(m));
    } else if (*score_vqa) {
      const ScoreMatrix m = vqa_opts.score(vqa_icl ? ScoringMode::kVqaIcl : ScoringMode::kVqa);
      write_text(vqa_opts.out, scores_to_jsonl(m));
      std::size_t questions = 0, failures = 0;
      for (const auto& v : m.vqa) {
        questions += v.questions;
        failures += v.parse_failures;
      }
      std::clog << "vqa: " << questions << " questions, " << failures << " unparsed answers\n";
    } else if (*normalize) {
      write_text(norm_out, scores_to_jsonl(normalize_scores(load_scores(norm_in))));
    } else if (*eval_cues) {
      const auto report = evaluate_cues(load_scores(ec_scores), load_annotations(ec_ann));
      write_json(ec_out, report_to_json(report));
    } else if (*eval_gaze) {
      const auto preds = load_gaze_predictions(
          eg_pred, std::filesystem::path(eg_pred).parent_path().string());
      write_json(eg_out, report_to_json(evaluate_gaze(preds, load_annotations(eg_ann))));
    } else if (*export_cues) {
      const ScoreMatrix m = load_scores(ex_scores);
      CueVocabulary vocab;
      if (ex_vocab.empty()) {
        vocab.classes = m.class_ids;
      } else {
        vocab = load_vocabulary(ex_vocab);
      }
      const auto summary = export_cue_scores(load_annotations(ex_ann), m, vocab, ex_out);
      std::clog << "exported " << summary.persons << " persons x " << summary.classes
                << " classes (vocabulary " << summary.vocabulary << ")\n";
    } else if (*fuse) {
      const ScoreMatrix m = load_scores(fu_scores);
      std::vector<double> rows;
      std::size_t p = 0;
      for (std::size_t r = 0; r < m.rows(); ++r) {
        if (!fu_image.empty() && m.samples[r].image_id != fu_image) continue;
        for (std::size_t c = 0; c < m.cols(); ++c) rows.push_back(m.at(r, c));
        ++p;
      }
      if (p == 0) throw DataError("fuse: no score rows selected");
      const TokenMatrix scores(p, m.cols(), std::move(rows));
      if (fu_tokens.size() != fu_out.size()) {
        throw ConfigError("fuse: give one --out per --tokens");
      }
      if (fu_mode == "early" && fu_tokens.size() != 1) {
        throw ConfigError("fuse: early mode takes exactly one --tokens");
      }
      std::vector<TokenMatrix> blocks;
      for (const auto& t : fu_tokens) blocks.push_back(read_tokens(t));
      const std::size_t d = blocks.front().dim;
      const auto weights = fu_zero ? FusionWeights::zeros(m.cols(), d)
                                   : FusionWeights::seeded(m.cols(), d, fu_seed);
      const TokenMatrix context = project_scores(scores, weights);
      const auto fused = fuse_multistage(blocks, context);
      for (std::size_t i = 0; i < fused.size(); ++i) write_tokens(fu_out[i], fused[i]);
    } else if (*run) {
      RunManifest manifest = load_manifest(run_manifest);
      manifest.backend = run_backend.descriptor(manifest.backend);
      if (!run_out.empty()) manifest.output_dir = run_out;
      auto backend = run_stage("connect-backend", [&] { return make_backend(manifest.backend); });
      const auto report = run_pipeline(manifest, *backend);
      for (const auto& f : report.files) std::cout << f << "\n";
    } else if (*serve) {
      BackendDescriptor d;
      d.embedding_dim = serve_dim;
      d.model_tag = serve_tag;
      MockBackend mock(d);
      BackendServer server(mock);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::clog << "serving mock backend (dim " << serve_dim << ") on " << serve_host << ":"
                << serve_port << "\n";
      server.run(serve_host, serve_port);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kConfig);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}
