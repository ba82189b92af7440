#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/text.hpp"

namespace phonosem::attnfrac {

struct Interval {
  double xmin = 0;
  double xmax = 0;
  std::string label;
};

struct Tier {
  std::string name;
  bool is_interval = true;  ///< false for TextTier (points stored with xmin == xmax)
  double xmin = 0;
  double xmax = 0;
  std::vector<Interval> intervals;
};

struct TextGridDoc {
  double xmin = 0;
  double xmax = 0;
  std::vector<Tier> tiers;

  const Tier* find_tier(std::string_view name) const {
    for (const auto& t : tiers)
      if (t.name == name) return &t;
    return nullptr;
  }
};

namespace detail {

[[noreturn]] inline void malformed_tg(const std::string& what, std::size_t line) {
  throw Error(ErrorKind::malformed_textgrid, "TextGrid line " + std::to_string(line) + ": " + what, {{"line", line}});
}

/// Praat writes UTF-8 or UTF-16 (with BOM); everything is handed on as UTF-8.
inline std::string textgrid_to_utf8(std::string_view bytes) {
  const bool le = bytes.size() >= 2 && bytes[0] == '\xFF' && bytes[1] == '\xFE';
  const bool be = bytes.size() >= 2 && bytes[0] == '\xFE' && bytes[1] == '\xFF';
  if (!le && !be) {
    if (bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);
    return std::string(bytes);
  }
  std::string out;
  auto unit = [&](std::size_t i) -> char32_t {
    const auto a = static_cast<unsigned char>(bytes[i]), b = static_cast<unsigned char>(bytes[i + 1]);
    return le ? char32_t(a | (b << 8)) : char32_t((a << 8) | b);
  };
  for (std::size_t i = 2; i + 1 < bytes.size(); i += 2) {
    char32_t cp = unit(i);
    if (cp >= 0xD800 && cp < 0xDC00 && i + 3 < bytes.size()) {
      const char32_t lo = unit(i + 2);
      if (lo >= 0xDC00 && lo < 0xE000) {
        cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
        i += 2;
      }
    }
    out += text::utf8_encode(cp);
  }
  return out;
}

struct TgToken {
  enum class Kind { string, number, flag } kind;
  std::string text;
  double number = 0;
  std::size_t line = 0;
};

/// Reduces both long and short formats to the same stream of values:
/// quoted strings, numbers and <exists>/<absent> flags. Keys (`xmin =`),
/// bracketed indices (`item [1]:`) and `!` comments are dropped.
inline std::vector<TgToken> tokenize_textgrid(std::string_view s) {
  std::vector<TgToken> out;
  std::size_t line = 1;
  std::size_t i = 0;
  auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (is_ws(c)) {
      ++i;
    } else if (c == '!') {
      while (i < s.size() && s[i] != '\n') ++i;
    } else if (c == '"') {
      const std::size_t start_line = line;
      std::string value;
      ++i;
      for (;;) {
        if (i >= s.size()) malformed_tg("unterminated string", start_line);
        if (s[i] == '"') {
          if (i + 1 < s.size() && s[i + 1] == '"') {
            value += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (s[i] == '\n') ++line;
        value += s[i++];
      }
      out.push_back({TgToken::Kind::string, std::move(value), 0, start_line});
    } else if (c == '[') {
      while (i < s.size() && s[i] != ']' && s[i] != '\n') ++i;
      if (i >= s.size() || s[i] != ']') malformed_tg("unclosed '['", line);
      ++i;
    } else if (c == '<') {
      auto close = s.find('>', i);
      if (close == std::string_view::npos) malformed_tg("unclosed '<'", line);
      auto flag = s.substr(i, close - i + 1);
      if (flag != "<exists>" && flag != "<absent>") malformed_tg("unknown flag " + std::string(flag), line);
      out.push_back({TgToken::Kind::flag, std::string(flag), 0, line});
      i = close + 1;
    } else {
      std::size_t j = i;
      while (j < s.size() && !is_ws(s[j]) && s[j] != '"' && s[j] != '[' && s[j] != '!') ++j;
      std::string_view word = s.substr(i, j - i);
      i = j;
      const char f = word.front();
      if ((f >= '0' && f <= '9') || f == '-' || f == '+' || f == '.') {
        auto v = text::parse_double(word);
        if (!v) malformed_tg("bad number '" + std::string(word) + "'", line);
        out.push_back({TgToken::Kind::number, std::string(word), *v, line});
      }
      // anything else is a key, '=' or ':' and carries no value
    }
  }
  return out;
}

class TgCursor {
 public:
  explicit TgCursor(std::vector<TgToken> toks) : toks_(std::move(toks)) {}

  const TgToken& next(TgToken::Kind want, const char* what) {
    if (pos_ >= toks_.size())
      malformed_tg(std::string("unexpected end of file, expected ") + what, toks_.empty() ? 1 : toks_.back().line);
    const auto& t = toks_[pos_++];
    if (t.kind != want) malformed_tg(std::string("expected ") + what + ", found '" + t.text + "'", t.line);
    return t;
  }
  double number(const char* what) { return next(TgToken::Kind::number, what).number; }
  std::string string(const char* what) { return next(TgToken::Kind::string, what).text; }
  std::size_t count(const char* what) {
    const auto& t = next(TgToken::Kind::number, what);
    if (t.number < 0 || t.number != std::floor(t.number)) malformed_tg(std::string("bad ") + what, t.line);
    return static_cast<std::size_t>(t.number);
  }
  std::size_t line() const { return pos_ < toks_.size() ? toks_[pos_].line : (toks_.empty() ? 1 : toks_.back().line); }
  bool done() const { return pos_ >= toks_.size(); }

 private:
  std::vector<TgToken> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses long- or short-format TextGrid text (UTF-8 or UTF-16 with BOM).
inline TextGridDoc parse_textgrid(std::string_view bytes) {
  const std::string utf8 = detail::textgrid_to_utf8(bytes);
  detail::TgCursor cur(detail::tokenize_textgrid(utf8));
  using detail::malformed_tg;

  if (cur.string("file type") != "ooTextFile") malformed_tg("not an ooTextFile", 1);
  if (cur.string("object class") != "TextGrid") malformed_tg("object class is not TextGrid", 2);
  TextGridDoc doc;
  doc.xmin = cur.number("xmin");
  doc.xmax = cur.number("xmax");
  const auto& flag = cur.next(detail::TgToken::Kind::flag, "<exists>");
  if (flag.text == "<absent>") return doc;
  const std::size_t n_tiers = cur.count("tier count");
  for (std::size_t t = 0; t < n_tiers; ++t) {
    Tier tier;
    const std::size_t tier_line = cur.line();
    const std::string cls = cur.string("tier class");
    if (cls != "IntervalTier" && cls != "TextTier") malformed_tg("unknown tier class '" + cls + "'", tier_line);
    tier.is_interval = cls == "IntervalTier";
    tier.name = cur.string("tier name");
    tier.xmin = cur.number("tier xmin");
    tier.xmax = cur.number("tier xmax");
    const std::size_t n = cur.count("interval count");
    tier.intervals.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t line = cur.line();
      Interval iv;
      iv.xmin = cur.number("xmin");
      iv.xmax = tier.is_interval ? cur.number("xmax") : iv.xmin;
      iv.label = cur.string("label");
      if (iv.xmax < iv.xmin) malformed_tg("interval ends before it starts", line);
      if (!tier.intervals.empty() && iv.xmin < tier.intervals.back().xmax)
        malformed_tg("overlapping or unordered intervals in tier '" + tier.name + "'", line);
      tier.intervals.push_back(std::move(iv));
    }
    doc.tiers.push_back(std::move(tier));
  }
  if (!cur.done()) malformed_tg("trailing content after last tier", cur.line());
  return doc;
}

inline TextGridDoc read_textgrid(const std::filesystem::path& path) {
  try {
    return parse_textgrid(io::read_file(path));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::malformed_textgrid) throw;
    auto d = e.details();
    d["path"] = path.string();
    throw Error(e.kind(), path.string() + ": " + e.what(), d);
  }
}

/// The phone tier: named "phones", else the first interval tier whose name
/// ends in "phones" (multi-speaker aligner output).
inline const Tier& phone_tier(const TextGridDoc& doc, std::string_view name = "phones") {
  for (const auto& t : doc.tiers)
    if (t.is_interval && t.name == name) return t;
  for (const auto& t : doc.tiers)
    if (t.is_interval && t.name.size() >= name.size() && t.name.ends_with(name)) return t;
  std::vector<std::string> names;
  for (const auto& t : doc.tiers) names.push_back(t.name);
  throw Error(ErrorKind::missing_tier, "no interval tier named '" + std::string(name) + "'",
              {{"wanted", name}, {"tiers", names}});
}

inline bool is_silence_label(std::string_view label) {
  auto t = text::trim(label);
  return t.empty() || t == "sil" || t == "sp" || t == "spn";
}

using FrameLabels = std::vector<std::optional<std::string>>;

namespace detail {
inline std::int64_t to_us(double seconds) { return std::llround(seconds * 1e6); }
}  // namespace detail

/// Number of whole-or-partial frames of period `frame_ms` covering `xmax`.
inline std::size_t frame_count(double xmax_s, double frame_ms) {
  const double n = std::ceil(xmax_s * 1000.0 / frame_ms - 1e-9);
  return n > 0 ? static_cast<std::size_t>(n) : 0;
}

/// Frame k spans [kT, (k+1)T); it takes the label of the interval containing
/// its centre (k+½)T, intervals being half-open so a centre on a boundary goes
/// to the later interval. Silence, gaps and padding yield nullopt. Times are
/// compared in integer microseconds.
inline FrameLabels frames_from_tier(const Tier& tier, double frame_ms, std::optional<std::size_t> n_frames = {}) {
  if (!(frame_ms > 0)) throw Error(ErrorKind::invalid_input, "frame period must be positive", {{"frame_ms", frame_ms}});
  const std::size_t n = n_frames.value_or(frame_count(tier.xmax, frame_ms));
  FrameLabels out(n);
  std::size_t j = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::int64_t centre = std::llround((2.0 * static_cast<double>(k) + 1.0) * frame_ms * 500.0);
    while (j < tier.intervals.size() && detail::to_us(tier.intervals[j].xmax) <= centre) ++j;
    if (j == tier.intervals.size()) break;
    const auto& iv = tier.intervals[j];
    if (detail::to_us(iv.xmin) <= centre && !is_silence_label(iv.label)) out[k] = std::string(text::trim(iv.label));
  }
  return out;
}

inline FrameLabels frames_from_textgrid(const TextGridDoc& doc, double frame_ms = 40.0,
                                        std::optional<std::size_t> n_frames = {},
                                        std::string_view tier_name = "phones") {
  const Tier& tier = phone_tier(doc, tier_name);
  if (!n_frames) n_frames = frame_count(std::max(doc.xmax, tier.xmax), frame_ms);
  return frames_from_tier(tier, frame_ms, n_frames);
}

}  // namespace phonosem::attnfrac
