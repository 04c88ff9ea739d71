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

// Drives the built executable and checks exit codes and outputs.

#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "ctxcue/dataset_io.hpp"
#include "ctxcue/fusion.hpp"
#include "ctxcue/png_io.hpp"
#include "test_support.hpp"

namespace ctxcue {
namespace {

int run_cli(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = std::string(CTXCUE_CLI) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::string& s) { return "'" + s + "'"; }

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli("expand-prompts --cue speaking"), 2);
}

TEST(Cli, ExpandPromptsPrintsOnePerLine) {
  testing::ScratchDir dir("cli_expand");
  const auto cfg = testing::data_path("e2e/prompts.json");
  ASSERT_EQ(run_cli("expand-prompts --config " + q(cfg) + " --cue speaking", dir.file("out.txt")), 0);
  const auto text = read_file(dir.file("out.txt"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
  EXPECT_TRUE(text.starts_with("a photo of a person speaking\n"));
  ASSERT_EQ(run_cli("expand-prompts --vqa --config " + q(cfg) + " --cue speaking", dir.file("vqa.txt")), 0);
  EXPECT_TRUE(read_file(dir.file("vqa.txt")).starts_with("Is this person speaking? Answer yes or no.\n"));
  EXPECT_EQ(run_cli("expand-prompts --config " + q(cfg) + " --cue juggling"), 2);
}

TEST(Cli, RenderPrompts) {
  testing::ScratchDir dir("cli_render");
  const auto photo = q(testing::data_path("photo.png"));
  ASSERT_EQ(run_cli("render-prompts --image " + photo +
                    " --bbox 0.3,0.25,0.6,0.9 --spec person_crop:blur --out " + q(dir.file("c.png"))),
            0);
  const auto img = read_png(dir.file("c.png"));
  EXPECT_GT(img.width(), 0);
  EXPECT_LT(img.width(), 64);
  ASSERT_EQ(run_cli("render-prompts --image " + photo + " --bbox 0.3,0.25,0.6,0.9 --spec all --out " +
                    q(dir.file("all"))),
            0);
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path() / "all")) n += e.is_regular_file();
  EXPECT_EQ(n, 8u);
  EXPECT_EQ(run_cli("render-prompts --image " + photo + " --bbox 0.6,0.25,0.3,0.9 --spec full_image:plain --out " +
                    q(dir.file("x.png"))),
            2);
  EXPECT_EQ(run_cli("render-prompts --image " + photo + " --bbox 0.5,0.5,0.501,0.501 --spec person_crop:plain --out " +
                    q(dir.file("x.png"))),
            4);
  EXPECT_EQ(run_cli("render-prompts --image " + photo + " --bbox 0.3,0.25,0.6,0.9 --spec sideways:plain --out " +
                    q(dir.file("x.png"))),
            2);
}

TEST(Cli, ScoreNormalizeEvaluateExport) {
  testing::ScratchDir dir("cli_score");
  const auto ann = q(testing::data_path("e2e/annotations.json"));
  const auto prompts = q(testing::data_path("e2e/prompts.json"));
  ASSERT_EQ(run_cli("score-itm --annotations " + ann + " --prompts " + prompts + " --out " + q(dir.file("raw.jsonl"))), 0);
  ASSERT_EQ(run_cli("score-itm --single-prompt --annotations " + ann + " --prompts " + prompts + " --out " +
                    q(dir.file("single.jsonl"))),
            0);
  EXPECT_NE(read_file(dir.file("raw.jsonl")), read_file(dir.file("single.jsonl")));
  ASSERT_EQ(run_cli("normalize --scores " + q(dir.file("raw.jsonl")) + " --out " + q(dir.file("z.jsonl"))), 0);
  EXPECT_EQ(load_scores(dir.file("z.jsonl")).state, ScoreState::kNormalized);
  ASSERT_EQ(run_cli("eval-cues --scores " + q(dir.file("z.jsonl")) + " --annotations " + ann + " --out " +
                    q(dir.file("r.json"))),
            0);
  EXPECT_TRUE(nlohmann::json::parse(read_file(dir.file("r.json"))).contains("mAP"));
  ASSERT_EQ(run_cli("export-cues --scores " + q(dir.file("z.jsonl")) + " --annotations " + ann + " --out " +
                    q(dir.file("e.jsonl"))),
            0);
  EXPECT_EQ(load_scores(dir.file("e.jsonl")).rows(), 3u);
  // Normalizing twice is a data error.
  EXPECT_EQ(run_cli("normalize --scores " + q(dir.file("z.jsonl")) + " --out " + q(dir.file("zz.jsonl"))), 4);

  ASSERT_EQ(run_cli("score-vqa --annotations " + ann + " --prompts " + prompts + " --out " + q(dir.file("v.jsonl"))), 0);
  ASSERT_EQ(run_cli("eval-cues --scores " + q(dir.file("v.jsonl")) + " --annotations " + ann + " --out " +
                    q(dir.file("vr.json"))),
            0);
  EXPECT_TRUE(nlohmann::json::parse(read_file(dir.file("vr.json"))).contains("vqa_parse_failure_rate"));
}

TEST(Cli, ExitCodesForConfigBackendAndDataErrors) {
  testing::ScratchDir dir("cli_exit");
  const auto ann = q(testing::data_path("e2e/annotations.json"));
  const auto prompts = q(testing::data_path("e2e/prompts.json"));
  write_file(dir.file("bad_prompts.json"), "{\"templates\": []}");
  EXPECT_EQ(run_cli("score-itm --annotations " + ann + " --prompts " + q(dir.file("bad_prompts.json")) +
                    " --out " + q(dir.file("o.jsonl"))),
            2);
  write_file(dir.file("bad_ann.json"), R"({"images":[{"image_id":"a","path":"a.png","persons":[{"person_id":"p","bbox":[0.9,0,0.1,1]}]}]})");
  EXPECT_EQ(run_cli("score-itm --annotations " + q(dir.file("bad_ann.json")) + " --prompts " + prompts +
                    " --out " + q(dir.file("o.jsonl"))),
            4);
  EXPECT_EQ(run_cli("score-itm --endpoint http://127.0.0.1:9 --annotations " + ann + " --prompts " + prompts +
                    " --out " + q(dir.file("o.jsonl"))),
            3);
  EXPECT_FALSE(std::filesystem::exists(dir.file("o.jsonl")));
}

TEST(Cli, RunManifestIntoOverrideDirectory) {
  testing::ScratchDir dir("cli_run");
  ASSERT_EQ(run_cli("run --manifest " + q(testing::data_path("e2e/manifest.json")) + " --output-dir " +
                    q(dir.file("out"))),
            0);
  EXPECT_EQ(read_file(dir.file("out/scores.jsonl")), read_file(testing::data_path("e2e/golden/scores.jsonl")));
  EXPECT_EQ(read_file(dir.file("out/report.json")), read_file(testing::data_path("e2e/golden/report.json")));
}

TEST(Cli, FuseWritesTokens) {
  testing::ScratchDir dir("cli_fuse");
  ScoreMatrix m;
  m.samples = {{"i/a", "i", "a"}, {"i/b", "i", "b"}};
  m.class_ids = {"x", "y", "z"};
  m.values = {1, 0, 0, 0, 1, 0};
  write_file(dir.file("s.jsonl"), scores_to_jsonl(m));
  const TokenMatrix tokens(2, 4, {1, 2, 3, 4, 5, 6, 7, 8});
  write_tokens(dir.file("t.bin"), tokens);
  ASSERT_EQ(run_cli("fuse --zero-weights --scores " + q(dir.file("s.jsonl")) + " --tokens " + q(dir.file("t.bin")) +
                    " --out " + q(dir.file("o.bin"))),
            0);
  EXPECT_EQ(read_tokens(dir.file("o.bin")), tokens);
  ASSERT_EQ(run_cli("fuse --weights-seed 3 --mode multistage --scores " + q(dir.file("s.jsonl")) + " --tokens " +
                    q(dir.file("t.bin")) + " --tokens " + q(dir.file("t.bin")) + " --out " + q(dir.file("o1.bin")) +
                    " --out " + q(dir.file("o2.bin"))),
            0);
  EXPECT_EQ(read_tokens(dir.file("o1.bin")), read_tokens(dir.file("o2.bin")));
  EXPECT_NE(read_tokens(dir.file("o1.bin")), tokens);
  write_tokens(dir.file("t3.bin"), TokenMatrix(3, 4));
  EXPECT_EQ(run_cli("fuse --scores " + q(dir.file("s.jsonl")) + " --tokens " + q(dir.file("t3.bin")) + " --out " +
                    q(dir.file("o.bin"))),
            4);
}

}  // namespace
}  // namespace ctxcue
