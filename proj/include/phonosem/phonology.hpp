#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phonosem/default_rules.hpp"
#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/text.hpp"

namespace phonosem::phonology {

enum class PhonemeCategory {
  sonorant,
  voiced_fricative,
  voiceless_fricative,
  voiceless_stop,
  voiced_stop,
  front_vowel,
  back_vowel,
  other,
};

inline constexpr std::array<std::pair<PhonemeCategory, std::string_view>, 8> category_names{{
    {PhonemeCategory::sonorant, "sonorant"},
    {PhonemeCategory::voiced_fricative, "voiced_fricative"},
    {PhonemeCategory::voiceless_fricative, "voiceless_fricative"},
    {PhonemeCategory::voiceless_stop, "voiceless_stop"},
    {PhonemeCategory::voiced_stop, "voiced_stop"},
    {PhonemeCategory::front_vowel, "front_vowel"},
    {PhonemeCategory::back_vowel, "back_vowel"},
    {PhonemeCategory::other, "other"},
}};

constexpr std::string_view to_string(PhonemeCategory c) noexcept {
  for (const auto& [cat, name] : category_names)
    if (cat == c) return name;
  return "other";
}

inline std::optional<PhonemeCategory> parse_category(std::string_view name) noexcept {
  for (const auto& [cat, n] : category_names)
    if (n == name) return cat;
  return std::nullopt;
}

constexpr bool is_consonant(PhonemeCategory c) noexcept {
  return c == PhonemeCategory::sonorant || c == PhonemeCategory::voiced_fricative ||
         c == PhonemeCategory::voiceless_fricative || c == PhonemeCategory::voiceless_stop ||
         c == PhonemeCategory::voiced_stop;
}

constexpr bool is_vowel(PhonemeCategory c) noexcept {
  return c == PhonemeCategory::front_vowel || c == PhonemeCategory::back_vowel;
}

// ---------------------------------------------------------------------------
// Inventory
// ---------------------------------------------------------------------------

/// Ordered set of IPA symbols, each with exactly one category. Multi-character
/// symbols ("ej", "d͡ʑ") are allowed; tokenization prefers the longest one.
class PhonemeInventory {
 public:
  PhonemeInventory() = default;

  /// Parses `symbol<TAB>category` lines.
  static PhonemeInventory parse(std::string_view content, const std::string& source = "<inventory>") {
    PhonemeInventory inv;
    const auto lines = io::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (io::is_blank_or_comment(lines[i])) continue;
      auto fields = text::split(lines[i], '\t');
      auto where = source + ":" + std::to_string(i + 1);
      if (fields.size() != 2)
        throw Error(ErrorKind::invalid_input, where + ": expected symbol<TAB>category", {{"line", i + 1}});
      auto cat = parse_category(text::trim(fields[1]));
      if (!cat)
        throw Error(ErrorKind::invalid_input, where + ": unknown category '" + std::string(fields[1]) + "'",
                    {{"line", i + 1}});
      inv.add(std::string(text::trim(fields[0])), *cat);
    }
    return inv;
  }

  static PhonemeInventory load(const std::filesystem::path& path) {
    return parse(io::read_file(path), path.string());
  }

  static const PhonemeInventory& defaults() {
    static const PhonemeInventory inv = parse(defaults::inventory_tsv, "<default inventory>");
    return inv;
  }

  void add(std::string symbol, PhonemeCategory category) {
    if (symbol.empty()) throw Error(ErrorKind::invalid_input, "empty inventory symbol");
    if (text::has_space(symbol))
      throw Error(ErrorKind::invalid_input, "inventory symbol contains whitespace", {{"symbol", symbol}});
    if (category_.contains(symbol))
      throw Error(ErrorKind::invalid_input, "duplicate inventory symbol '" + symbol + "'", {{"symbol", symbol}});
    max_len_ = std::max(max_len_, symbol.size());
    category_.emplace(symbol, category);
    symbols_.push_back(std::move(symbol));
  }

  std::span<const std::string> symbols() const noexcept { return symbols_; }
  std::size_t size() const noexcept { return symbols_.size(); }
  bool contains(std::string_view symbol) const { return category_.find(symbol) != category_.end(); }

  std::optional<PhonemeCategory> category_of(std::string_view symbol) const {
    auto it = category_.find(symbol);
    if (it == category_.end()) return std::nullopt;
    return it->second;
  }

  /// Symbols in inventory order whose category satisfies `pred`.
  template <class Pred>
  std::vector<std::string> select(Pred pred) const {
    std::vector<std::string> out;
    for (const auto& s : symbols_)
      if (pred(category_.find(s)->second)) out.push_back(s);
    return out;
  }

  /// Byte length of the longest symbol starting at `pos`, or 0.
  std::size_t longest_match(std::string_view s, std::size_t pos) const {
    const std::size_t limit = std::min(max_len_, s.size() - pos);
    for (std::size_t len = limit; len > 0; --len)
      if (category_.find(s.substr(pos, len)) != category_.end()) return len;
    return 0;
  }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, PhonemeCategory, std::less<>> category_;
  std::size_t max_len_ = 0;
};

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

enum class UnknownPolicy {
  reject,       ///< throw UnknownSymbol
  single_char,  ///< emit the unmatched code point as its own symbol
};

/// Splits an IPA string into inventory symbols. Whitespace is an authoritative
/// boundary; inside each whitespace-free chunk the longest inventory symbol
/// wins at every position.
inline std::vector<std::string> tokenize_ipa(std::string_view raw, const PhonemeInventory& inv,
                                             UnknownPolicy policy = UnknownPolicy::reject) {
  if (text::trim(raw).empty()) throw Error(ErrorKind::invalid_input, "empty IPA string");
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < raw.size()) {
    if (text::is_space(raw[i])) {
      ++i;
      continue;
    }
    std::size_t chunk_end = i;
    while (chunk_end < raw.size() && !text::is_space(raw[chunk_end])) ++chunk_end;
    const std::string_view chunk = raw.substr(0, chunk_end);
    while (i < chunk_end) {
      std::size_t len = inv.longest_match(chunk, i);
      if (len == 0) {
        len = text::utf8_length_at(chunk, i);
        if (policy == UnknownPolicy::reject)
          throw Error(ErrorKind::unknown_symbol,
                      "unknown IPA symbol '" + std::string(chunk.substr(i, len)) + "' at byte " + std::to_string(i),
                      {{"position", i}, {"substring", std::string(chunk.substr(i, len))}, {"input", std::string(raw)}});
      }
      out.emplace_back(chunk.substr(i, len));
      i += len;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

using RewriteMap = std::vector<std::pair<std::string, std::string>>;

struct NormalizationRules {
  std::vector<std::string> strip_marks;
  RewriteMap allophone_map;
  RewriteMap notation_map;

  static NormalizationRules parse(std::string_view content, const std::string& source = "<normalization>") {
    NormalizationRules r;
    const auto lines = io::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (io::is_blank_or_comment(lines[i])) continue;
      auto f = text::split(lines[i], '\t');
      auto where = source + ":" + std::to_string(i + 1);
      if (f[0] == "strip" && f.size() == 2 && !f[1].empty()) {
        r.strip_marks.emplace_back(f[1]);
      } else if ((f[0] == "allophone" || f[0] == "notation") && f.size() == 3 && !f[1].empty()) {
        auto& map = f[0] == "allophone" ? r.allophone_map : r.notation_map;
        map.emplace_back(std::string(f[1]), std::string(f[2]));
      } else {
        throw Error(ErrorKind::invalid_input, where + ": malformed normalization rule", {{"line", i + 1}});
      }
    }
    return r;
  }

  static NormalizationRules load(const std::filesystem::path& path) {
    return parse(io::read_file(path), path.string());
  }

  static const NormalizationRules& defaults() {
    static const NormalizationRules r = parse(defaults::normalization_tsv, "<default normalization>");
    return r;
  }
};

namespace detail {

/// One left-to-right pass; at each position the longest matching key wins.
inline std::string rewrite_pass(std::string_view s, const RewriteMap& map) {
  if (map.empty()) return std::string(s);
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const std::pair<std::string, std::string>* best = nullptr;
    for (const auto& rule : map)
      if (s.substr(i, rule.first.size()) == rule.first && (!best || rule.first.size() > best->first.size()))
        best = &rule;
    if (best) {
      out += best->second;
      i += best->first.size();
    } else {
      auto n = text::utf8_length_at(s, i);
      out.append(s.substr(i, n));
      i += n;
    }
  }
  return out;
}

inline std::string normalize_once(std::string_view raw, const NormalizationRules& rules) {
  RewriteMap strip;
  for (const auto& m : rules.strip_marks) strip.emplace_back(m, "");
  auto s = rewrite_pass(raw, strip);
  s = rewrite_pass(s, rules.allophone_map);
  return rewrite_pass(s, rules.notation_map);
}

}  // namespace detail

/// Strips marks, maps allophones, then standardizes notation, repeating until
/// the string no longer changes so the result is a fixed point.
inline std::string normalize_ipa(std::string_view raw, const NormalizationRules& rules) {
  constexpr int max_rounds = 32;
  std::string cur(raw);
  for (int round = 0; round < max_rounds; ++round) {
    auto next = detail::normalize_once(cur, rules);
    if (next == cur) return cur;
    cur = std::move(next);
  }
  throw Error(ErrorKind::invalid_input, "normalization rules do not converge", {{"input", std::string(raw)}});
}

// ---------------------------------------------------------------------------
// Romanization
// ---------------------------------------------------------------------------

enum class SyllablePosition { initial, final, any };

struct RomanizationRules {
  std::map<std::string, std::string, std::less<>> onset;
  std::map<std::string, std::string, std::less<>> nucleus;
  /// Explicit syllable renderings keyed "C V"; these win over onset+nucleus.
  std::map<std::string, std::string, std::less<>> syllable;
  std::map<std::pair<SyllablePosition, std::string>, std::string, std::less<>> overrides;
  bool hyphenate = true;
  std::vector<std::string> no_hyphen_final;

  static RomanizationRules parse(std::string_view content, const std::string& source = "<romanization>") {
    RomanizationRules r;
    const auto lines = io::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (io::is_blank_or_comment(lines[i])) continue;
      auto f = text::split(lines[i], '\t');
      auto where = source + ":" + std::to_string(i + 1);
      auto bad = [&] { return Error(ErrorKind::invalid_input, where + ": malformed romanization rule", {{"line", i + 1}}); };
      const auto kind = f[0];
      if ((kind == "onset" || kind == "nucleus") && f.size() == 3) {
        (kind == "onset" ? r.onset : r.nucleus)[std::string(f[1])] = std::string(f[2]);
      } else if (kind == "syllable" && f.size() == 3) {
        r.syllable[syllable_key(f[1])] = std::string(f[2]);
      } else if (kind == "override" && f.size() == 4) {
        SyllablePosition pos;
        if (f[1] == "initial") pos = SyllablePosition::initial;
        else if (f[1] == "final") pos = SyllablePosition::final;
        else if (f[1] == "any") pos = SyllablePosition::any;
        else throw bad();
        r.overrides[{pos, syllable_key(f[2])}] = std::string(f[3]);
      } else if (kind == "hyphenate" && f.size() == 2 && (f[1] == "true" || f[1] == "false")) {
        r.hyphenate = f[1] == "true";
      } else if (kind == "no_hyphen_final" && f.size() == 2) {
        r.no_hyphen_final.push_back(syllable_key(f[1]));
      } else {
        throw bad();
      }
    }
    return r;
  }

  static RomanizationRules load(const std::filesystem::path& path) {
    return parse(io::read_file(path), path.string());
  }

  static const RomanizationRules& defaults() {
    static const RomanizationRules r = parse(defaults::romanization_tsv, "<default romanization>");
    return r;
  }

  /// Canonical "C V" key from any whitespace-separated spelling.
  static std::string syllable_key(std::string_view spaced) { return text::join(text::split_ws(spaced), " "); }

  /// Base rendering of one CV syllable, ignoring positional overrides.
  std::optional<std::string> base(std::string_view consonant, std::string_view vowel) const {
    std::string key = std::string(consonant) + " " + std::string(vowel);
    if (auto it = syllable.find(key); it != syllable.end()) return it->second;
    auto c = onset.find(consonant);
    auto v = nucleus.find(vowel);
    if (c == onset.end() || v == nucleus.end()) return std::nullopt;
    return c->second + v->second;
  }

  /// Every CV pair over the inventory's consonants and vowels lacking a rendering.
  std::vector<std::string> unmapped(const PhonemeInventory& inv) const {
    std::vector<std::string> missing;
    for (const auto& c : inv.select(is_consonant))
      for (const auto& v : inv.select(is_vowel))
        if (!base(c, v)) missing.push_back(c + " " + v);
    return missing;
  }
};

/// Orthographic spelling of a CV-syllabic word for TTS input.
inline std::string romanize(std::span<const std::string> word, const RomanizationRules& rules) {
  if (word.empty() || word.size() % 2 != 0)
    throw Error(ErrorKind::invalid_input, "romanize expects a non-empty sequence of CV syllables",
                {{"symbols", std::vector<std::string>(word.begin(), word.end())}});
  const std::size_t n_syll = word.size() / 2;
  std::vector<std::string> parts;
  std::string last_key;
  for (std::size_t s = 0; s < n_syll; ++s) {
    const auto& c = word[2 * s];
    const auto& v = word[2 * s + 1];
    std::string key = c + " " + v;
    std::optional<std::string> spelled;
    auto try_override = [&](SyllablePosition pos) {
      if (spelled) return;
      if (auto it = rules.overrides.find(std::pair{pos, key}); it != rules.overrides.end()) spelled = it->second;
    };
    if (s + 1 == n_syll) try_override(SyllablePosition::final);
    if (s == 0) try_override(SyllablePosition::initial);
    try_override(SyllablePosition::any);
    if (!spelled) spelled = rules.base(c, v);
    if (!spelled)
      throw Error(ErrorKind::unmapped_syllable, "no romanization for syllable /" + c + v + "/",
                  {{"syllable", key}});
    parts.push_back(std::move(*spelled));
    last_key = std::move(key);
  }
  const bool joined = !rules.hyphenate || std::find(rules.no_hyphen_final.begin(), rules.no_hyphen_final.end(),
                                                    last_key) != rules.no_hyphen_final.end();
  return text::join(parts, joined ? "" : "-");
}

}  // namespace phonosem::phonology
