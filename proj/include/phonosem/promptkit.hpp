#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/semdim.hpp"
#include "phonosem/text.hpp"

namespace phonosem::promptkit {

using semdim::Pole;
using semdim::SemanticDimension;

enum class InputType { original, ipa, audio, ipa_plus_audio };
enum class FeatureOrder { normal, reversed };

inline constexpr std::array<InputType, 4> all_input_types{InputType::original, InputType::ipa, InputType::audio,
                                                         InputType::ipa_plus_audio};

constexpr std::string_view to_string(InputType t) noexcept {
  switch (t) {
    case InputType::original: return "original";
    case InputType::ipa: return "ipa";
    case InputType::audio: return "audio";
    case InputType::ipa_plus_audio: return "ipa_plus_audio";
  }
  return "original";
}

constexpr std::string_view to_string(FeatureOrder o) noexcept { return o == FeatureOrder::normal ? "normal" : "reversed"; }

inline std::optional<InputType> parse_input_type(std::string_view s) noexcept {
  for (auto t : all_input_types)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

inline std::optional<FeatureOrder> parse_order(std::string_view s) noexcept {
  if (s == "normal") return FeatureOrder::normal;
  if (s == "reversed") return FeatureOrder::reversed;
  return std::nullopt;
}

constexpr bool needs_audio(InputType t) noexcept { return t == InputType::audio || t == InputType::ipa_plus_audio; }

/// Pole shown as option 1 (or 2) under the given order.
constexpr Pole presented_pole(int option, FeatureOrder order) noexcept {
  const Pole first = order == FeatureOrder::normal ? Pole::a : Pole::b;
  return option == 1 ? first : semdim::opposite(first);
}

// ---------------------------------------------------------------------------
// Lexicon entries
// ---------------------------------------------------------------------------

struct LexiconEntry {
  std::string id;
  std::string word;      ///< orthographic form (romanized for constructed words)
  std::string ipa;       ///< phoneme-level spaced IPA
  std::string audio;     ///< path to a 16-bit PCM WAV file
  std::string language;  ///< en, fr, ja, ko; empty for constructed words
  std::string group;     ///< natural | constructed
  std::string meaning;
  std::map<std::string, std::string> gold;  ///< dimension id -> feature
};

/// Accepts natural-word records (`word`, `ipa`, `meaning`, `language`, ...)
/// and pseudo-word records (`symbols`, `romanized`).
inline LexiconEntry entry_from_json(const nlohmann::json& j) {
  LexiconEntry e;
  e.id = j.value("id", j.value("word", std::string{}));
  if (e.id.empty()) throw Error(ErrorKind::invalid_input, "lexicon entry without id or word");
  e.word = j.value("word", j.value("romanized", std::string{}));
  if (j.contains("symbols") && j["symbols"].is_array())
    e.ipa = text::join(j["symbols"].get<std::vector<std::string>>(), " ");
  else
    e.ipa = j.value("ipa", std::string{});
  e.audio = j.value("audio", std::string{});
  e.language = j.value("language", std::string{});
  e.group = j.value("group", e.language.empty() ? std::string("constructed") : std::string("natural"));
  e.meaning = j.value("meaning", std::string{});
  if (j.contains("dimensions") && j["dimensions"].is_object())
    for (const auto& [dim, feat] : j["dimensions"].items()) e.gold[dim] = feat.get<std::string>();
  return e;
}

inline std::string language_name(std::string_view tag) {
  static const std::map<std::string, std::string, std::less<>> names{
      {"en", "English"}, {"fr", "French"}, {"ja", "Japanese"}, {"ko", "Korean"}};
  auto it = names.find(tag);
  return it == names.end() ? std::string(tag) : it->second;
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

namespace templates {

inline constexpr std::string_view original =
    "Given a [WORD], which semantic feature best describes the word based on auditory impression?\n"
    "\n"
    "[WORD]\n"
    "{word}\n"
    "\n"
    "[SEMANTIC DIMENSION]\n"
    "{feature1} vs. {feature2}\n"
    "\n"
    "[OPTIONS]\n"
    "1: {feature1}\n"
    "2: {feature2}\n"
    "Answer with the number only. (1-2)";

inline constexpr std::string_view ipa =
    "Given an IPA [WORD], which semantic feature best describes the word based on auditory impression?\n"
    "\n"
    "[WORD]\n"
    "{word}\n"
    "\n"
    "[SEMANTIC DIMENSION]\n"
    "{feature1} vs. {feature2}\n"
    "\n"
    "[OPTIONS]\n"
    "1: {feature1}\n"
    "2: {feature2}\n"
    "Answer with the number only. (1-2)";

inline constexpr std::string_view audio =
    "Given a spoken [WORD], which semantic feature best describes the word based on auditory impression?\n"
    "\n"
    "[WORD]\n"
    "{AUDIO}\n"
    "\n"
    "[SEMANTIC DIMENSION]\n"
    "{feature1} vs. {feature2}\n"
    "\n"
    "[OPTIONS]\n"
    "1: {feature1}\n"
    "2: {feature2}\n"
    "Answer with the number only. (1-2)";

inline constexpr std::string_view ipa_plus_audio =
    "Given an IPA [WORD] with its pronunciation audio, which semantic feature best describes the word based on "
    "auditory impression?\n"
    "\n"
    "[WORD]\n"
    "{word} (AUDIO: {AUDIO})\n"
    "\n"
    "[SEMANTIC DIMENSION]\n"
    "{feature1} vs. {feature2}\n"
    "\n"
    "[OPTIONS]\n"
    "1: {feature1}\n"
    "2: {feature2}\n"
    "Answer with the number only. (1-2)";

inline constexpr std::string_view annotation =
    "You are a professional linguistic annotator.\n"
    "Please read a {language} mimetic word and its meaning, and decide which semantic feature best describes the "
    "word's meaning.\n"
    "\n"
    "[WORD]\n"
    "{word}\n"
    "\n"
    "[MEANING]\n"
    "{meaning}\n"
    "\n"
    "[SEMANTIC DIMENSION]\n"
    "{feature1} vs. {feature2}\n"
    "\n"
    "[OPTIONS]\n"
    "1: {feature1}\n"
    "2: {feature2}\n"
    "3: Neither\n"
    "Answer with the number only. (1-3)";

}  // namespace templates

struct PromptTemplates {
  std::string original{templates::original};
  std::string ipa{templates::ipa};
  std::string audio{templates::audio};
  std::string ipa_plus_audio{templates::ipa_plus_audio};
  std::string annotation{templates::annotation};

  const std::string& for_type(InputType t) const noexcept {
    switch (t) {
      case InputType::original: return original;
      case InputType::ipa: return ipa;
      case InputType::audio: return audio;
      case InputType::ipa_plus_audio: return ipa_plus_audio;
    }
    return original;
  }

  static inline const std::array<std::string_view, 5> file_names{"original.txt", "ipa.txt", "audio.txt",
                                                                 "ipa_plus_audio.txt", "annotation.txt"};

  /// Reads `<name>.txt` files from `dir`; missing files keep the built-in
  /// template. One trailing newline is dropped from each file.
  static PromptTemplates load_dir(const std::filesystem::path& dir) {
    PromptTemplates t;
    std::array<std::string*, 5> slots{&t.original, &t.ipa, &t.audio, &t.ipa_plus_audio, &t.annotation};
    for (std::size_t i = 0; i < slots.size(); ++i) {
      auto p = dir / file_names[i];
      if (!std::filesystem::exists(p)) continue;
      auto s = io::read_file(p);
      if (!s.empty() && s.back() == '\n') s.pop_back();
      if (!s.empty() && s.back() == '\r') s.pop_back();
      *slots[i] = std::move(s);
    }
    return t;
  }
};

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct PromptPart {
  enum class Kind { text, audio } kind = Kind::text;
  std::string value;  ///< text, or audio file path

  friend bool operator==(const PromptPart&, const PromptPart&) = default;
};

struct PromptSpec {
  std::string prompt_id;
  std::string word_id;
  std::string group;
  std::string language;
  std::string task;  ///< "ab" or "annotation"
  InputType input_type = InputType::original;
  std::string dimension_id;
  FeatureOrder feature_order = FeatureOrder::normal;
  int n_options = 2;
  std::vector<PromptPart> parts;

  /// Prompt text with each audio part shown as `audio_marker`.
  std::string render(std::string_view audio_marker = "<AUDIO>") const {
    std::string out;
    for (const auto& p : parts) out += p.kind == PromptPart::Kind::text ? p.value : std::string(audio_marker);
    return out;
  }

  std::size_t audio_parts() const noexcept {
    std::size_t n = 0;
    for (const auto& p : parts) n += p.kind == PromptPart::Kind::audio;
    return n;
  }
};

inline std::string make_prompt_id(std::string_view task, std::string_view word_id, std::string_view dimension_id,
                                  InputType t, FeatureOrder o) {
  std::string id(task);
  id += '|';
  id += word_id;
  id += '|';
  id += dimension_id;
  if (task == "ab") {
    id += '|';
    id += to_string(t);
    id += '|';
    id += to_string(o);
  }
  return id;
}

namespace detail {

/// Single pass over `{name}` placeholders; substituted values are never
/// rescanned. `{AUDIO}` splits the output into a separate audio part.
inline std::vector<PromptPart> instantiate(std::string_view tmpl, const std::map<std::string, std::string>& values,
                                           const std::string& audio_path) {
  std::vector<PromptPart> parts;
  std::string cur;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        std::string name(tmpl.substr(i + 1, close - i - 1));
        if (name == "AUDIO") {
          if (!cur.empty()) parts.push_back({PromptPart::Kind::text, std::move(cur)});
          cur.clear();
          parts.push_back({PromptPart::Kind::audio, audio_path});
          i = close + 1;
          continue;
        }
        if (auto it = values.find(name); it != values.end()) {
          cur += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    cur += tmpl[i++];
  }
  if (!cur.empty()) parts.push_back({PromptPart::Kind::text, std::move(cur)});
  return parts;
}

inline std::size_t count_placeholder(std::string_view tmpl, std::string_view name) {
  std::string needle = "{" + std::string(name) + "}";
  std::size_t n = 0;
  for (auto pos = tmpl.find(needle); pos != std::string_view::npos; pos = tmpl.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace detail

/// The A/B question for one word and dimension. `reversed` lists feature_b as
/// option 1.
inline PromptSpec build_ab_prompt(const LexiconEntry& entry, const SemanticDimension& dim, InputType input_type,
                                  FeatureOrder order, const PromptTemplates& tmpl = {}) {
  auto missing = [&](std::string_view form) {
    return Error(ErrorKind::missing_form,
                 "entry '" + entry.id + "' has no " + std::string(form) + " form for input type " +
                     std::string(to_string(input_type)),
                 {{"word_id", entry.id}, {"form", std::string(form)}, {"input_type", std::string(to_string(input_type))}});
  };
  std::string word_slot;
  switch (input_type) {
    case InputType::original:
      if (entry.word.empty()) throw missing("orthographic");
      word_slot = entry.word;
      break;
    case InputType::ipa:
    case InputType::ipa_plus_audio:
      if (text::trim(entry.ipa).empty()) throw missing("ipa");
      word_slot = entry.ipa;
      break;
    case InputType::audio:
      break;
  }
  if (needs_audio(input_type) && entry.audio.empty()) throw missing("audio");

  const auto& t = tmpl.for_type(input_type);
  const auto n_word = detail::count_placeholder(t, "word");
  const auto n_audio = detail::count_placeholder(t, "AUDIO");
  bool one_slot = false;
  switch (input_type) {
    case InputType::original:
    case InputType::ipa: one_slot = n_word == 1 && n_audio == 0; break;
    case InputType::audio: one_slot = n_word == 0 && n_audio == 1; break;
    case InputType::ipa_plus_audio: one_slot = n_word == 1 && n_audio == 1; break;
  }
  if (!one_slot)
    throw Error(ErrorKind::invalid_input,
                "template for " + std::string(to_string(input_type)) + " must contain exactly one word slot");

  const Pole first = presented_pole(1, order);
  std::map<std::string, std::string> values{{"word", word_slot},
                                            {"feature1", dim.feature(first)},
                                            {"feature2", dim.feature(semdim::opposite(first))}};
  PromptSpec spec;
  spec.task = "ab";
  spec.prompt_id = make_prompt_id(spec.task, entry.id, dim.id, input_type, order);
  spec.word_id = entry.id;
  spec.group = entry.group;
  spec.language = entry.language;
  spec.input_type = input_type;
  spec.dimension_id = dim.id;
  spec.feature_order = order;
  spec.n_options = 2;
  spec.parts = detail::instantiate(t, values, entry.audio);
  return spec;
}

/// The three-option annotation question (feature_a, feature_b, Neither).
inline PromptSpec build_annotation_prompt(const LexiconEntry& entry, const SemanticDimension& dim,
                                          std::string_view language, const PromptTemplates& tmpl = {}) {
  if (text::trim(entry.meaning).empty())
    throw Error(ErrorKind::missing_meaning, "entry '" + entry.id + "' has no meaning", {{"word_id", entry.id}});
  if (entry.word.empty())
    throw Error(ErrorKind::missing_form, "entry '" + entry.id + "' has no orthographic form",
                {{"word_id", entry.id}, {"form", "orthographic"}});
  std::map<std::string, std::string> values{{"word", entry.word},
                                            {"meaning", entry.meaning},
                                            {"language", language_name(language)},
                                            {"feature1", dim.feature_a},
                                            {"feature2", dim.feature_b}};
  PromptSpec spec;
  spec.task = "annotation";
  spec.prompt_id = make_prompt_id(spec.task, entry.id, dim.id, InputType::original, FeatureOrder::normal);
  spec.word_id = entry.id;
  spec.group = entry.group;
  spec.language = std::string(language);
  spec.input_type = InputType::original;
  spec.dimension_id = dim.id;
  spec.feature_order = FeatureOrder::normal;
  spec.n_options = 3;
  spec.parts = detail::instantiate(tmpl.annotation, values, "");
  return spec;
}

inline nlohmann::ordered_json to_json(const PromptSpec& s) {
  nlohmann::ordered_json j;
  j["prompt_id"] = s.prompt_id;
  j["task"] = s.task;
  j["word_id"] = s.word_id;
  j["group"] = s.group;
  j["language"] = s.language;
  j["input_type"] = std::string(to_string(s.input_type));
  j["dimension_id"] = s.dimension_id;
  j["feature_order"] = std::string(to_string(s.feature_order));
  j["n_options"] = s.n_options;
  auto parts = nlohmann::ordered_json::array();
  for (const auto& p : s.parts) {
    nlohmann::ordered_json pj;
    if (p.kind == PromptPart::Kind::text) {
      pj["type"] = "text";
      pj["text"] = p.value;
    } else {
      pj["type"] = "audio";
      pj["path"] = p.value;
    }
    parts.push_back(std::move(pj));
  }
  j["parts"] = std::move(parts);
  return j;
}

inline PromptSpec prompt_from_json(const nlohmann::json& j) {
  PromptSpec s;
  s.prompt_id = j.at("prompt_id").get<std::string>();
  s.task = j.value("task", "ab");
  s.word_id = j.at("word_id").get<std::string>();
  s.group = j.value("group", "");
  s.language = j.value("language", "");
  auto t = parse_input_type(j.at("input_type").get<std::string>());
  auto o = parse_order(j.value("feature_order", "normal"));
  if (!t || !o) throw Error(ErrorKind::invalid_input, "bad input_type or feature_order in prompt " + s.prompt_id);
  s.input_type = *t;
  s.feature_order = *o;
  s.dimension_id = j.at("dimension_id").get<std::string>();
  s.n_options = j.value("n_options", 2);
  for (const auto& pj : j.at("parts")) {
    const auto type = pj.at("type").get<std::string>();
    if (type == "text") s.parts.push_back({PromptPart::Kind::text, pj.at("text").get<std::string>()});
    else if (type == "audio") s.parts.push_back({PromptPart::Kind::audio, pj.at("path").get<std::string>()});
    else throw Error(ErrorKind::invalid_input, "unknown prompt part type '" + type + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Responses
// ---------------------------------------------------------------------------

struct ParsedResponse {
  std::optional<int> choice;  ///< nullopt = invalid
  std::string raw_text;

  bool valid() const noexcept { return choice.has_value(); }
};

/// Accepts only a bare option number (surrounding whitespace ignored).
inline ParsedResponse parse_response(std::string_view raw, int n_options) {
  ParsedResponse r{std::nullopt, std::string(raw)};
  auto t = text::trim(raw);
  if (t.empty() || t.size() > 3) return r;
  for (char c : t)
    if (c < '0' || c > '9') return r;
  auto v = text::parse_int<int>(t);
  if (v && *v >= 1 && *v <= n_options) r.choice = *v;
  return r;
}

enum class Resolution { feature_a, feature_b, neither, invalid };

/// Maps an option number back to a canonical pole, undoing reversal.
inline Resolution resolve_choice(const ParsedResponse& resp, FeatureOrder order) noexcept {
  if (!resp.choice) return Resolution::invalid;
  if (*resp.choice == 3) return Resolution::neither;
  return presented_pole(*resp.choice, order) == Pole::a ? Resolution::feature_a : Resolution::feature_b;
}

/// Label text for a resolution: the feature name, "neither" or "invalid".
inline std::string label_of(Resolution r, const SemanticDimension& dim) {
  switch (r) {
    case Resolution::feature_a: return dim.feature_a;
    case Resolution::feature_b: return dim.feature_b;
    case Resolution::neither: return std::string(semdim::label_neither);
    case Resolution::invalid: return std::string(semdim::label_invalid);
  }
  return std::string(semdim::label_invalid);
}

}  // namespace phonosem::promptkit
