#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/phonology.hpp"
#include "phonosem/text.hpp"

namespace phonosem::wordgen {

using phonology::NormalizationRules;
using phonology::PhonemeInventory;

/// A CVCV pseudo-word.
struct PseudoWord {
  std::string id;
  std::array<std::string, 4> symbols;
  std::string romanized;

  std::string ipa_string() const { return text::join(symbols, ""); }
  std::string spaced_ipa() const { return text::join(symbols, " "); }

  friend bool operator==(const PseudoWord&, const PseudoWord&) = default;
};

inline std::string candidate_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cw%05zu", index);
  return buf;
}

/// All C·V·C·V combinations, nested in inventory order (first consonant
/// outermost), so ids are stable for a fixed inventory file.
inline std::vector<PseudoWord> generate_candidates(const PhonemeInventory& inv) {
  const auto consonants = inv.select(phonology::is_consonant);
  const auto vowels = inv.select(phonology::is_vowel);
  if (consonants.empty())
    throw Error(ErrorKind::empty_category, "inventory has no consonants", {{"category", "consonant"}});
  if (vowels.empty()) throw Error(ErrorKind::empty_category, "inventory has no vowels", {{"category", "vowel"}});
  std::vector<PseudoWord> out;
  out.reserve(consonants.size() * vowels.size() * consonants.size() * vowels.size());
  for (const auto& c1 : consonants)
    for (const auto& v1 : vowels)
      for (const auto& c2 : consonants)
        for (const auto& v2 : vowels) {
          PseudoWord w;
          w.id = candidate_id(out.size());
          w.symbols = {c1, v1, c2, v2};
          out.push_back(std::move(w));
        }
  return out;
}

inline void attach_romanization(std::span<PseudoWord> words, const phonology::RomanizationRules& rules) {
  for (auto& w : words) w.romanized = phonology::romanize(w.symbols, rules);
}

inline nlohmann::ordered_json to_json(const PseudoWord& w) {
  nlohmann::ordered_json j;
  j["id"] = w.id;
  j["ipa"] = w.ipa_string();
  j["symbols"] = w.symbols;
  j["romanized"] = w.romanized;
  j["group"] = "constructed";
  return j;
}

inline PseudoWord pseudo_word_from_json(const nlohmann::json& j) {
  PseudoWord w;
  w.id = j.at("id").get<std::string>();
  const auto symbols = j.at("symbols").get<std::vector<std::string>>();
  if (symbols.size() != 4)
    throw Error(ErrorKind::invalid_input, "pseudo-word '" + w.id + "' does not have 4 symbols", {{"id", w.id}});
  std::copy(symbols.begin(), symbols.end(), w.symbols.begin());
  w.romanized = j.value("romanized", "");
  return w;
}

// ---------------------------------------------------------------------------
// Exclusion against pronunciation dictionaries
// ---------------------------------------------------------------------------

struct RawPronunciation {
  std::string ipa;
  std::string source_tag;
};

struct DictionaryLoad {
  std::vector<RawPronunciation> entries;
  std::size_t malformed_lines = 0;
};

/// Reads IPA-dict layout: `orthography<TAB>/ipa/[, /ipa2/ ...]`. Every slashed
/// pronunciation becomes one entry tagged `tag:orthography`.
inline DictionaryLoad parse_dictionary(std::string_view content, std::string_view tag) {
  DictionaryLoad out;
  for (const auto& line : io::split_lines(content)) {
    if (text::trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      ++out.malformed_lines;
      continue;
    }
    std::string_view orth = text::trim(std::string_view(line).substr(0, tab));
    std::string_view rest = std::string_view(line).substr(tab + 1);
    std::size_t found = 0;
    for (std::size_t pos = rest.find('/'); pos != std::string_view::npos;) {
      auto close = rest.find('/', pos + 1);
      if (close == std::string_view::npos) break;
      auto ipa = text::trim(rest.substr(pos + 1, close - pos - 1));
      if (!ipa.empty()) {
        out.entries.push_back({std::string(ipa), std::string(tag) + ":" + std::string(orth)});
        ++found;
      }
      pos = rest.find('/', close + 1);
    }
    if (found == 0) ++out.malformed_lines;
  }
  return out;
}

inline DictionaryLoad load_dictionary(const std::filesystem::path& path) {
  return parse_dictionary(io::read_file(path), path.stem().string());
}

/// Normalized pronunciations with the provenance of every dictionary entry
/// that produced them. Keys never contain whitespace.
class ExclusionIndex {
 public:
  void insert(std::string normalized, std::string source_tag) {
    auto& tags = index_[std::move(normalized)];
    tags.push_back(std::move(source_tag));
  }

  bool contains(std::string_view ipa) const { return index_.find(ipa) != index_.end(); }

  /// First source tag for `ipa`, empty when absent.
  std::string first_source(std::string_view ipa) const {
    auto it = index_.find(ipa);
    return it == index_.end() || it->second.empty() ? std::string{} : it->second.front();
  }

  std::size_t size() const noexcept { return index_.size(); }
  std::size_t malformed = 0;

  const auto& entries() const noexcept { return index_; }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> index_;
};

inline ExclusionIndex build_exclusion_index(std::span<const RawPronunciation> entries, const NormalizationRules& rules) {
  ExclusionIndex idx;
  for (const auto& e : entries) {
    std::string compact;
    for (char c : e.ipa)
      if (!text::is_space(c)) compact += c;
    auto norm = phonology::normalize_ipa(compact, rules);
    if (norm.empty()) {
      ++idx.malformed;
      continue;
    }
    idx.insert(std::move(norm), e.source_tag);
  }
  return idx;
}

inline ExclusionIndex build_exclusion_index(std::span<const std::string> entries, const NormalizationRules& rules) {
  std::vector<RawPronunciation> tagged;
  tagged.reserve(entries.size());
  for (const auto& e : entries) tagged.push_back({e, ""});
  return build_exclusion_index(tagged, rules);
}

struct RemovedWord {
  PseudoWord word;
  std::string source_tag;
};

struct FilterResult {
  std::vector<PseudoWord> kept;
  std::vector<RemovedWord> removed;
};

/// Partitions candidates by exact normalized-IPA membership in the index.
inline FilterResult filter_candidates(std::span<const PseudoWord> candidates, const ExclusionIndex& idx) {
  FilterResult r;
  for (const auto& w : candidates) {
    auto ipa = w.ipa_string();
    if (idx.contains(ipa))
      r.removed.push_back({w, idx.first_source(ipa)});
    else
      r.kept.push_back(w);
  }
  return r;
}

struct RemovalResult {
  std::vector<PseudoWord> kept;
  std::vector<std::string> removed;
  /// Listed words that were not present (warning-level).
  std::vector<std::string> unknown_removals;
};

/// Set difference by IPA string, preserving order of `kept`.
inline RemovalResult apply_manual_removals(std::span<const PseudoWord> kept, std::span<const std::string> removal_list) {
  std::set<std::string, std::less<>> wanted(removal_list.begin(), removal_list.end());
  std::set<std::string, std::less<>> seen;
  RemovalResult r;
  for (const auto& w : kept) {
    auto ipa = w.ipa_string();
    if (wanted.contains(ipa)) {
      r.removed.push_back(ipa);
      seen.insert(std::move(ipa));
    } else {
      r.kept.push_back(w);
    }
  }
  for (const auto& ipa : wanted)
    if (!seen.contains(ipa)) r.unknown_removals.push_back(ipa);
  return r;
}

/// One IPA string per line; blank lines and '#' comments skipped; entries are
/// normalized and de-spaced so they compare against `ipa_string()`.
inline std::vector<std::string> parse_removal_list(std::string_view content, const NormalizationRules& rules) {
  std::vector<std::string> out;
  for (const auto& line : io::split_lines(content)) {
    if (io::is_blank_or_comment(line)) continue;
    std::string_view t = text::trim(line);
    if (t.size() >= 2 && t.front() == '/' && t.back() == '/') t = t.substr(1, t.size() - 2);
    std::string compact;
    for (char c : t)
      if (!text::is_space(c)) compact += c;
    out.push_back(phonology::normalize_ipa(compact, rules));
  }
  return out;
}

}  // namespace phonosem::wordgen
