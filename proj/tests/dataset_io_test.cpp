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

#include "ctxcue/dataset_io.hpp"
#include "test_support.hpp"

namespace ctxcue {
namespace {

using nlohmann::json;

TEST(Annotations, LoadsFixture) {
  const auto recs = load_annotations(testing::data_path("e2e/annotations.json"));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].image_id, "scene_a");
  ASSERT_EQ(recs[0].persons.size(), 2u);
  EXPECT_DOUBLE_EQ(recs[0].persons[0].bbox.y2, 0.95);
  ASSERT_TRUE(recs[1].persons[0].gaze_points);
  EXPECT_EQ(recs[1].persons[0].gaze_points->size(), 2u);
  EXPECT_FALSE(recs[1].persons[0].cue_labels->count("carry/hold (an object)"));
}

TEST(Annotations, SpeakingCountsFixture) {
  const auto counts = class_counts(load_annotations(testing::data_path("speaking_counts.json")));
  EXPECT_EQ(counts.at("speaking"), (ClassCounts{31, 30}));
}

json one_person(json bbox) {
  return {{"images",
           {{{"image_id", "img7"},
             {"path", "x.png"},
             {"persons", {{{"person_id", "p0"}, {"bbox", bbox}}}}}}}};
}

TEST(Annotations, MalformedInputNamesTheRecord) {
  for (const json& bad : {json{0.5, 0.1, 0.2, 0.3}, json{0, 0, 1}, json{0, 0, 1.5, 1}, json{"a", 0, 1, 1}}) {
    try {
      annotations_from_json(one_person(bad), "ann.json");
      FAIL() << bad.dump();
    } catch (const DataError& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find("img7"), std::string::npos) << msg;
      EXPECT_NE(msg.find("p0"), std::string::npos) << msg;
    }
  }
  EXPECT_NO_THROW(annotations_from_json(one_person({0, 0, 1, 1}), "ann.json"));
  EXPECT_THROW(annotations_from_json(json::array(), "a"), DataError);

  json dup_person = one_person({0, 0, 1, 1});
  dup_person["images"][0]["persons"].push_back(dup_person["images"][0]["persons"][0]);
  EXPECT_THROW(annotations_from_json(dup_person, "a"), DataError);
  json dup_image = one_person({0, 0, 1, 1});
  dup_image["images"].push_back(dup_image["images"][0]);
  EXPECT_THROW(annotations_from_json(dup_image, "a"), DataError);
  json bad_label = one_person({0, 0, 1, 1});
  bad_label["images"][0]["persons"][0]["cue_labels"] = {{"sit", 2}};
  EXPECT_THROW(annotations_from_json(bad_label, "a"), DataError);
  json bad_gaze = one_person({0, 0, 1, 1});
  bad_gaze["images"][0]["persons"][0]["gaze_points"] = {{1.2, 0.5}};
  EXPECT_THROW(annotations_from_json(bad_gaze, "a"), DataError);
  EXPECT_THROW(load_annotations("/nonexistent/ann.json"), DataError);
}

TEST(Annotations, RoundTrip) {
  const auto recs = load_annotations(testing::data_path("e2e/annotations.json"));
  const auto back = annotations_from_json(annotations_to_json(recs), "rt");
  EXPECT_EQ(back, recs);
  EXPECT_EQ(annotations_to_json(back), annotations_to_json(recs));
}

TEST(Vocabulary, SizeEnforcement) {
  EXPECT_EQ(expected_vocabulary_size("AVA+CP"), 24u);
  EXPECT_EQ(expected_vocabulary_size("HICO"), 117u);
  EXPECT_EQ(expected_vocabulary_size("SWIG"), 406u);
  EXPECT_FALSE(expected_vocabulary_size("custom"));
  EXPECT_THROW(vocabulary_from_json({{"name", "HICO"}, {"classes", {"a", "b"}}}), ConfigError);
  EXPECT_THROW(vocabulary_from_json({{"name", "other"}, {"classes", {"a"}}}), ConfigError);
  EXPECT_THROW(vocabulary_from_json({{"classes", {"a", "a"}}}), ConfigError);
  EXPECT_THROW(vocabulary_from_json({{"classes", json::array()}}), ConfigError);
  EXPECT_EQ(load_vocabulary(testing::data_path("../../configs/vocabularies/ava14.json")).classes.size(), 14u);
  EXPECT_THROW(load_vocabulary("/nonexistent/v.json"), ConfigError);
}

CueVocabulary synthetic(const std::string& name, std::size_t n) {
  CueVocabulary v{name, {}};
  for (std::size_t i = 0; i < n; ++i) v.classes.push_back("class_" + std::to_string(1000 + i));
  return v;
}

std::vector<ImageRecord> two_persons() {
  ImageRecord rec{"img", "img.png", {}};
  for (const char* id : {"pB", "pA"}) {
    PersonRegion p;
    p.person_id = id;
    p.bbox = {0.1, 0.1, 0.4, 0.9};
    rec.persons.push_back(p);
  }
  return {rec};
}

// Rows deliberately in reverse annotation order and columns shuffled.
ScoreMatrix scores_for(const CueVocabulary& v) {
  ScoreMatrix m;
  m.samples = {{"img/pA", "img", "pA"}, {"img/pB", "img", "pB"}};
  m.class_ids = v.classes;
  std::reverse(m.class_ids.begin(), m.class_ids.end());
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < m.class_ids.size(); ++c) m.values.push_back(r + c * 0.001);
  }
  return m;
}

TEST(ScoresFile, JsonlRoundTrip) {
  ScoreMatrix m = scores_for(synthetic("custom", 3));
  m.state = ScoreState::kBinary;
  m.values = {1, 0, 1, 0, 0, 1};
  m.vqa = {{6, 1}, {6, 0}};
  const auto text = scores_to_jsonl(m);
  const auto back = scores_from_jsonl(text, "s");
  EXPECT_EQ(back.state, ScoreState::kBinary);
  EXPECT_EQ(back.rows(), 2u);
  EXPECT_EQ(back.vqa[0].parse_failures, 1u);
  const auto aligned = select_columns(back, m.class_ids);
  EXPECT_EQ(aligned.values, m.values);
  EXPECT_EQ(scores_to_jsonl(aligned), text);

  EXPECT_THROW(scores_from_jsonl("{\"image_id\":\"a\"}\n", "s"), DataError);
  const std::string line = R"({"image_id":"i","person_id":"p","scores":{"a":1},"state":"raw"})";
  EXPECT_THROW(scores_from_jsonl(line + "\n" + line + "\n", "s"), DataError);
  EXPECT_THROW(scores_from_jsonl(R"({"image_id":"i","person_id":"p","scores":{"a":1},"state":"odd"})", "s"),
               DataError);
  EXPECT_EQ(scores_from_jsonl(line, "s").samples[0].sample_id, "i/p");
}

TEST(Export, OneLinePerPersonWithFullVector) {
  testing::ScratchDir dir("export");
  const auto recs = two_persons();
  const auto vocab = synthetic("AVA+CP", 24);
  const auto summary = export_cue_scores(recs, scores_for(vocab), vocab, dir.file("a.jsonl"));
  EXPECT_EQ(summary.persons, 2u);
  EXPECT_EQ(summary.classes, 24u);
  const auto text = read_file(dir.file("a.jsonl"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  const auto loaded = load_scores(dir.file("a.jsonl"));
  EXPECT_EQ(loaded.samples[0].person_id, "pB");  // annotation order

  // Re-exporting a loaded export is byte-identical.
  export_cue_scores(recs, loaded, vocab, dir.file("b.jsonl"));
  EXPECT_EQ(read_file(dir.file("b.jsonl")), text);
}

TEST(Export, LargeVocabulary) {
  testing::ScratchDir dir("swig");
  const auto vocab = synthetic("SWIG", 406);
  export_cue_scores(two_persons(), scores_for(vocab), vocab, dir.file("s.jsonl"));
  std::istringstream in(read_file(dir.file("s.jsonl")));
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(json::parse(line)["scores"].size(), 406u);
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}

TEST(Export, MismatchesAreErrors) {
  testing::ScratchDir dir("mismatch");
  const auto vocab = synthetic("custom", 3);
  auto recs = two_persons();
  auto m = scores_for(vocab);
  recs[0].persons[0].person_id = "pZ";
  EXPECT_THROW(export_cue_scores(recs, m, vocab, dir.file("x")), DataError);
  recs = two_persons();
  m.samples.push_back({"other/p", "other", "p"});
  m.values.insert(m.values.end(), {0, 0, 0});
  EXPECT_THROW(export_cue_scores(recs, m, vocab, dir.file("x")), DataError);
  EXPECT_THROW(export_cue_scores(recs, scores_for(vocab), synthetic("custom", 4), dir.file("x")),
               DataError);
  auto bin = scores_for(vocab);
  bin.state = ScoreState::kBinary;
  EXPECT_THROW(export_cue_scores(recs, bin, vocab, dir.file("x")), DataError);
  EXPECT_FALSE(std::filesystem::exists(dir.file("x")));
}

}  // namespace
}  // namespace ctxcue
