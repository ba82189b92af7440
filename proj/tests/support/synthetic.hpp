#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "phonosem/attnfrac/dump.hpp"

namespace synthetic {

using phonosem::attnfrac::AttentionDump;

/// Dump whose selected axis is [input tokens..., feature1 tokens..., feature2 tokens...].
inline AttentionDump make_dump(const std::vector<std::string>& input_tokens, const std::string& ipa,
                               const std::vector<std::string>& f1_tokens, const std::vector<std::string>& f2_tokens,
                               std::uint32_t n_layers, std::uint32_t n_heads) {
  AttentionDump d;
  auto& m = d.manifest;
  m.word_id = "w";
  m.group = "constructed";
  m.input_type = "ipa";
  m.dimension_id = "fast-slow";
  m.feature_order = "normal";
  m.feature1 = "fast";
  m.feature2 = "slow";
  m.gold_feature = "fast";
  m.resolved_label = "fast";
  m.ipa = ipa;
  std::uint32_t next = 0;
  for (const auto& t : input_tokens) {
    m.token_strings.push_back(t);
    m.input_token_indices.push_back(next++);
  }
  for (const auto& t : f1_tokens) {
    m.token_strings.push_back(t);
    m.feature1_token_indices.push_back(next++);
  }
  for (const auto& t : f2_tokens) {
    m.token_strings.push_back(t);
    m.feature2_token_indices.push_back(next++);
  }
  m.n_layers = n_layers;
  m.n_heads = n_heads;
  m.n_sel = next;
  m.attention_kind = "synthetic";
  d.tensor.assign(d.expected_size(), 0.0f);
  return d;
}

/// The hand-planted 2-layer / 2-head dump for /b u/ on fast-slow. Token 0 is
/// "b", 1 is " u", 2 is "fast", 3 is "slow". Expected fractions of "fast":
///   head_sum  layer 0: b 0.5/0.6, u 0.3   layer 1: b 0.75, u 0.75
///   head_mean layer 0: b 0.875,   u 0.2916…   layer 1: b 0.75, u 0.75
inline AttentionDump planted() {
  auto d = make_dump({"b", " u"}, "b u", {"fast"}, {"slow"}, 2, 2);
  // layer 0
  d.at(0, 0, 2, 0) = 0.3f;
  d.at(0, 0, 2, 1) = 0.1f;
  d.at(0, 0, 3, 0) = 0.1f;
  d.at(0, 0, 3, 1) = 0.3f;
  d.at(0, 1, 2, 0) = 0.2f;
  d.at(0, 1, 2, 1) = 0.2f;
  d.at(0, 1, 3, 1) = 0.4f;
  // layer 1; head 0 never looks at "u"
  d.at(1, 0, 2, 0) = 0.25f;
  d.at(1, 0, 3, 0) = 0.25f;
  d.at(1, 1, 2, 0) = 0.5f;
  d.at(1, 1, 2, 1) = 0.6f;
  d.at(1, 1, 3, 1) = 0.2f;
  // rows that must not matter: input queries and feature self-attention
  for (std::uint32_t l = 0; l < 2; ++l)
    for (std::uint32_t h = 0; h < 2; ++h) {
      d.at(l, h, 0, 0) = 0.9f;
      d.at(l, h, 1, 0) = 0.7f;
      d.at(l, h, 2, 2) = 0.05f;
      d.at(l, h, 3, 3) = 0.05f;
      d.at(l, h, 3, 2) = 0.3f;
    }
  return d;
}

/// Random text dump over single-character symbols; some symbols are spelled
/// by two tokens. Weights are strictly positive.
inline AttentionDump random_dump(std::mt19937_64& rng, std::vector<std::string>* symbols_out = nullptr) {
  static const std::vector<std::string> pool{"p", "t", "k", "ow", "ej", "a", "i", "m", "s"};
  std::uniform_int_distribution<int> n_sym(1, 4), n_feat(1, 3), n_l(1, 4), n_h(1, 4);
  std::uniform_real_distribution<float> w(0.001f, 1.0f);
  std::vector<std::string> syms, toks;
  const int ns = n_sym(rng);
  for (int i = 0; i < ns; ++i) {
    const auto& s = pool[rng() % pool.size()];
    syms.push_back(s);
    const std::string lead = i == 0 ? "" : " ";
    if (s.size() == 2 && rng() % 2) {
      toks.push_back(lead + s.substr(0, 1));
      toks.push_back(s.substr(1));
    } else {
      toks.push_back(lead + s);
    }
  }
  std::string ipa;
  for (std::size_t i = 0; i < syms.size(); ++i) ipa += (i ? " " : "") + syms[i];
  std::vector<std::string> f1(n_feat(rng), "fa"), f2(n_feat(rng), "sl");
  auto d = make_dump(toks, ipa, f1, f2, n_l(rng), n_h(rng));
  for (auto& v : d.tensor) v = w(rng);
  if (symbols_out) *symbols_out = syms;
  return d;
}

}  // namespace synthetic
