#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phonosem/attnfrac/dump.hpp"
#include "phonosem/attnfrac/textgrid.hpp"
#include "phonosem/error.hpp"
#include "phonosem/text.hpp"

namespace phonosem::attnfrac {

/// One occurrence of an IPA symbol and the selected-index positions (into
/// the dump's n_sel axis) of the tokens or frames that carry it.
struct PhonemeSpan {
  std::string symbol;
  std::vector<std::uint32_t> token_indices;

  friend bool operator==(const PhonemeSpan&, const PhonemeSpan&) = default;
};

namespace detail {

/// Token text with whitespace and the usual subword space markers
/// ("Ġ", "▁") removed.
inline std::string token_core(std::string_view tok) {
  std::string out;
  for (std::size_t i = 0; i < tok.size();) {
    if (text::is_space(tok[i])) {
      ++i;
    } else if (tok.substr(i, 2) == "\xC4\xA0" || tok.substr(i, 3) == "\xE2\x96\x81") {
      i += tok[i] == '\xC4' ? 2 : 3;
    } else {
      out += tok[i++];
    }
  }
  return out;
}

[[noreturn]] inline void alignment_mismatch(const DumpManifest& m, const std::string& why, std::size_t token) {
  throw Error(ErrorKind::alignment_mismatch, "cannot align tokens of " + m.word_id + " to '" + m.ipa + "': " + why,
              {{"word_id", m.word_id}, {"ipa", m.ipa}, {"token_position", token}});
}

}  // namespace detail

/// Segments the input tokens of a text (IPA) dump into the word's symbols.
/// A symbol may be spelled by several consecutive tokens, but a token must
/// not straddle two symbols. Whitespace-only tokens join the span that
/// follows them (the last span when trailing).
inline std::vector<PhonemeSpan> align_text_spans(const DumpManifest& m) {
  const auto symbols = text::split_ws(m.ipa);
  if (symbols.empty()) detail::alignment_mismatch(m, "manifest has no IPA symbols", 0);
  std::vector<PhonemeSpan> spans;
  std::vector<std::uint32_t> pending;
  std::size_t sym = 0, offset = 0;
  for (std::size_t t = 0; t < m.input_token_indices.size(); ++t) {
    const auto idx = m.input_token_indices[t];
    const std::string core = detail::token_core(m.token_strings.at(idx));
    if (core.empty()) {
      pending.push_back(idx);
      continue;
    }
    if (sym >= symbols.size()) detail::alignment_mismatch(m, "extra token '" + core + "'", t);
    const std::string_view target = symbols[sym];
    if (target.substr(offset, core.size()) != core)
      detail::alignment_mismatch(m, "token '" + core + "' does not continue symbol '" + std::string(target) + "'", t);
    if (offset == 0) {
      spans.push_back({std::string(target), std::move(pending)});
      pending.clear();
    }
    spans.back().token_indices.push_back(idx);
    offset += core.size();
    if (offset == target.size()) {
      ++sym;
      offset = 0;
    }
  }
  if (sym != symbols.size()) detail::alignment_mismatch(m, "tokens end before the last symbol", m.input_token_indices.size());
  if (!pending.empty()) spans.back().token_indices.insert(spans.back().token_indices.end(), pending.begin(), pending.end());
  return spans;
}

/// Run-length merge of per-frame labels; null frames belong to no span and
/// break runs.
inline std::vector<PhonemeSpan> align_audio_spans(const DumpManifest& m, const FrameLabels& labels) {
  if (labels.size() != m.input_token_indices.size())
    throw Error(ErrorKind::length_mismatch,
                "word " + m.word_id + " has " + std::to_string(m.input_token_indices.size()) + " audio tokens but " +
                    std::to_string(labels.size()) + " frame labels",
                {{"word_id", m.word_id}, {"tokens", m.input_token_indices.size()}, {"frames", labels.size()}});
  std::vector<PhonemeSpan> spans;
  const std::optional<std::string>* prev = nullptr;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto& lab = labels[k];
    if (lab) {
      if (prev && *prev && **prev == *lab)
        spans.back().token_indices.push_back(m.input_token_indices[k]);
      else
        spans.push_back({*lab, {m.input_token_indices[k]}});
    }
    prev = &lab;
  }
  return spans;
}

/// Frame labels for an audio dump. Audio encoders pad, so when the dump has
/// more audio tokens than the TextGrid has frames the surplus frames are
/// unlabelled; fewer tokens than frames is a LengthMismatch.
inline FrameLabels audio_frame_labels(const DumpManifest& m, const TextGridDoc& doc) {
  const double period = m.frame_period_ms.value_or(40.0);
  const Tier& tier = phone_tier(doc);
  const std::size_t natural = frame_count(std::max(doc.xmax, tier.xmax), period);
  const std::size_t tokens = m.input_token_indices.size();
  if (tokens < natural)
    throw Error(ErrorKind::length_mismatch,
                "word " + m.word_id + " has " + std::to_string(tokens) + " audio tokens but the TextGrid spans " +
                    std::to_string(natural) + " frames",
                {{"word_id", m.word_id}, {"tokens", tokens}, {"frames", natural}});
  return frames_from_tier(tier, period, tokens);
}

}  // namespace phonosem::attnfrac
