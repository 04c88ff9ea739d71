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

// Text prompt generation: template x synonym expansion, yes/no questions and
// caption-prefixed (in-context) question inputs.
//
// A template is a sentence with placeholders drawn from {photo}, {person} and
// {class}. {class} must appear exactly once; the others at most once. Every
// placeholder present in a template is substituted by each synonym of its
// list, giving the Cartesian product over the placeholders the template uses.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxcue/error.hpp"
#include "ctxcue/text_util.hpp"

namespace ctxcue {

struct PromptTemplate {
  std::string id;
  std::string pattern;
};

struct SynonymTable {
  std::vector<std::string> photo_synonyms;
  std::vector<std::string> person_synonyms;
  std::map<std::string, std::vector<std::string>> class_synonyms;
};

struct PromptProvenance {
  std::string template_id;
  std::optional<std::size_t> photo_index;
  std::optional<std::size_t> person_index;
  std::size_t class_index = 0;
  std::string cue;

  bool operator==(const PromptProvenance&) const = default;
};

struct TextPrompt {
  std::string text;
  PromptProvenance provenance;
};

inline constexpr std::string_view kVqaSuffix = "Answer yes or no.";

struct VqaQuestion {
  std::string text;
  std::string cue;
};

/// Prompt configuration file contents.
struct PromptConfig {
  std::vector<PromptTemplate> templates;
  SynonymTable table;
};

namespace detail {

enum class Slot { kPhoto, kPerson, kClass };

struct TemplatePiece {
  std::string literal;          // used when !slot
  std::optional<Slot> slot;
};

inline std::vector<TemplatePiece> parse_template(const PromptTemplate& t) {
  std::vector<TemplatePiece> pieces;
  std::string literal;
  int photo = 0, person = 0, cls = 0;
  const std::string& p = t.pattern;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == '}') {
      throw ConfigError("template '" + t.id + "': unmatched '}' at offset " +
                        std::to_string(i));
    }
    if (p[i] != '{') {
      literal.push_back(p[i]);
      continue;
    }
    const std::size_t close = p.find('}', i + 1);
    if (close == std::string::npos) {
      throw ConfigError("template '" + t.id + "': unterminated '{' at offset " +
                        std::to_string(i));
    }
    const std::string name = p.substr(i + 1, close - i - 1);
    Slot slot;
    if (name == "photo") {
      slot = Slot::kPhoto;
      ++photo;
    } else if (name == "person") {
      slot = Slot::kPerson;
      ++person;
    } else if (name == "class") {
      slot = Slot::kClass;
      ++cls;
    } else {
      throw ConfigError("template '" + t.id + "': unknown placeholder {" +
                        name + "}");
    }
    if (!literal.empty()) pieces.push_back({std::move(literal), std::nullopt});
    literal.clear();
    pieces.push_back({{}, slot});
    i = close;
  }
  if (!literal.empty()) pieces.push_back({std::move(literal), std::nullopt});
  if (cls != 1) {
    throw ConfigError("template '" + t.id +
                      "': {class} must appear exactly once");
  }
  if (photo > 1 || person > 1) {
    throw ConfigError("template '" + t.id +
                      "': {photo}/{person} may appear at most once");
  }
  return pieces;
}

inline bool uses(const std::vector<TemplatePiece>& pieces, Slot s) {
  for (const auto& piece : pieces) {
    if (piece.slot == s) return true;
  }
  return false;
}

inline std::string realize(const std::vector<TemplatePiece>& pieces,
                           std::string_view photo, std::string_view person,
                           std::string_view cls) {
  std::string out;
  for (const auto& piece : pieces) {
    if (!piece.slot) {
      out += piece.literal;
      continue;
    }
    switch (*piece.slot) {
      case Slot::kPhoto: out += trim(photo); break;
      case Slot::kPerson: out += trim(person); break;
      case Slot::kClass: out += trim(cls); break;
    }
  }
  return collapse_spaces(out);
}

inline void check_list(const std::vector<std::string>& list,
                       const std::string& what) {
  if (list.empty()) throw ConfigError(what + ": synonym list is empty");
  std::unordered_set<std::string> seen;
  for (const auto& s : list) {
    if (trim(s).empty()) throw ConfigError(what + ": empty synonym");
    if (!seen.insert(s).second) {
      throw ConfigError(what + ": duplicate synonym '" + s + "'");
    }
  }
}

inline const std::string& pick(const std::vector<std::string>& list,
                               std::optional<std::size_t> index,
                               const std::string& what) {
  static const std::string kEmpty;
  if (!index) return kEmpty;
  if (*index >= list.size()) {
    throw ConfigError(what + " synonym index out of range");
  }
  return list[*index];
}

}  // namespace detail

/// Throws ConfigError on empty lists or duplicate entries.
inline void validate(const SynonymTable& table) {
  detail::check_list(table.photo_synonyms, "photo_synonyms");
  detail::check_list(table.person_synonyms, "person_synonyms");
  for (const auto& [cue, list] : table.class_synonyms) {
    detail::check_list(list, "class_synonyms[" + cue + "]");
  }
}

/// Checks a template's placeholders; throws ConfigError when malformed.
inline void validate(const PromptTemplate& t) { detail::parse_template(t); }

/// Expands every template against the synonym lists of the placeholders it
/// contains. Order: templates as given, then photo, person and class synonym
/// indices lexicographically. Repeated realized strings keep only their first
/// occurrence.
inline std::vector<TextPrompt> expand_prompts(
    const std::vector<PromptTemplate>& templates, const SynonymTable& table,
    const std::string& cue) {
  const auto cls_it = table.class_synonyms.find(cue);
  if (cls_it == table.class_synonyms.end()) {
    throw ConfigError("unknown cue class '" + cue + "'");
  }
  const auto& classes = cls_it->second;
  detail::check_list(classes, "class_synonyms[" + cue + "]");

  std::vector<TextPrompt> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : templates) {
    const auto pieces = detail::parse_template(t);
    const bool has_photo = detail::uses(pieces, detail::Slot::kPhoto);
    const bool has_person = detail::uses(pieces, detail::Slot::kPerson);
    if (has_photo) detail::check_list(table.photo_synonyms, "photo_synonyms");
    if (has_person) detail::check_list(table.person_synonyms, "person_synonyms");

    const std::size_t n_photo = has_photo ? table.photo_synonyms.size() : 1;
    const std::size_t n_person = has_person ? table.person_synonyms.size() : 1;
    for (std::size_t ph = 0; ph < n_photo; ++ph) {
      for (std::size_t pe = 0; pe < n_person; ++pe) {
        for (std::size_t c = 0; c < classes.size(); ++c) {
          PromptProvenance prov{
              t.id, has_photo ? std::optional<std::size_t>(ph) : std::nullopt,
              has_person ? std::optional<std::size_t>(pe) : std::nullopt, c,
              cue};
          std::string text = detail::realize(
              pieces, has_photo ? table.photo_synonyms[ph] : std::string(),
              has_person ? table.person_synonyms[pe] : std::string(),
              classes[c]);
          if (seen.insert(text).second) {
            out.push_back({std::move(text), std::move(prov)});
          }
        }
      }
    }
  }
  return out;
}

/// Rebuilds the text of a prompt from its provenance.
inline std::string resubstitute(const PromptProvenance& prov,
                                const std::vector<PromptTemplate>& templates,
                                const SynonymTable& table) {
  for (const auto& t : templates) {
    if (t.id != prov.template_id) continue;
    const auto pieces = detail::parse_template(t);
    const auto it = table.class_synonyms.find(prov.cue);
    if (it == table.class_synonyms.end()) {
      throw ConfigError("unknown cue class '" + prov.cue + "'");
    }
    return detail::realize(
        pieces, detail::pick(table.photo_synonyms, prov.photo_index, "photo"),
        detail::pick(table.person_synonyms, prov.person_index, "person"),
        detail::pick(it->second, prov.class_index, "class"));
  }
  throw ConfigError("unknown template id '" + prov.template_id + "'");
}

inline VqaQuestion make_vqa_question(std::string_view person_synonym,
                                     std::string_view class_synonym,
                                     std::string cue = {}) {
  const auto person = collapse_spaces(person_synonym);
  const auto cls = collapse_spaces(class_synonym);
  if (person.empty() || cls.empty()) {
    throw ConfigError("VQA question needs non-empty person and class text");
  }
  return {"Is this " + person + " " + cls + "? " + std::string(kVqaSuffix),
          std::move(cue)};
}

/// All yes/no questions for a cue: person synonyms x class synonyms.
inline std::vector<VqaQuestion> vqa_questions(const SynonymTable& table,
                                              const std::string& cue) {
  const auto it = table.class_synonyms.find(cue);
  if (it == table.class_synonyms.end()) {
    throw ConfigError("unknown cue class '" + cue + "'");
  }
  std::vector<VqaQuestion> out;
  std::unordered_set<std::string> seen;
  for (const auto& person : table.person_synonyms) {
    for (const auto& cls : it->second) {
      auto q = make_vqa_question(person, cls, cue);
      if (seen.insert(q.text).second) out.push_back(std::move(q));
    }
  }
  return out;
}

/// "<caption> <question>". An empty caption means in-context input is not
/// available and raises ConfigError; callers fall back to the bare question.
inline std::string compose_icl_input(std::string_view caption,
                                     const VqaQuestion& question) {
  const auto c = trim(caption);
  if (c.empty()) throw ConfigError("empty caption: in-context input unavailable");
  std::string out(c);
  out.push_back(' ');
  out += question.text;
  return out;
}

inline PromptConfig prompt_config_from_json(const nlohmann::json& j) {
  PromptConfig cfg;
  try {
    for (const auto& t : j.at("templates")) {
      cfg.templates.push_back(
          {t.at("id").get<std::string>(), t.at("pattern").get<std::string>()});
    }
    cfg.table.photo_synonyms =
        j.at("photo_synonyms").get<std::vector<std::string>>();
    cfg.table.person_synonyms =
        j.at("person_synonyms").get<std::vector<std::string>>();
    cfg.table.class_synonyms =
        j.at("class_synonyms")
            .get<std::map<std::string, std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("prompt config: ") + e.what());
  }
  std::set<std::string> ids;
  for (const auto& t : cfg.templates) {
    validate(t);
    if (!ids.insert(t.id).second) {
      throw ConfigError("prompt config: duplicate template id '" + t.id + "'");
    }
  }
  validate(cfg.table);
  return cfg;
}

inline PromptConfig load_prompt_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("prompt config '" + path + "': " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return prompt_config_from_json(j);
}

}  // namespace ctxcue
