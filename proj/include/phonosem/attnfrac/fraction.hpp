#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "phonosem/attnfrac/align.hpp"
#include "phonosem/attnfrac/dump.hpp"
#include "phonosem/attnfrac/textgrid.hpp"
#include "phonosem/error.hpp"

namespace phonosem::attnfrac {

enum class HeadMode { head_sum, head_mean };

inline std::optional<HeadMode> parse_head_mode(std::string_view s) {
  if (s == "head_sum" || s == "head-sum") return HeadMode::head_sum;
  if (s == "head_mean" || s == "head-mean") return HeadMode::head_mean;
  return std::nullopt;
}

inline std::string_view to_string(HeadMode m) { return m == HeadMode::head_sum ? "head_sum" : "head_mean"; }

struct SpanLayerFraction {
  std::size_t span = 0;
  std::size_t layer = 0;
  double s1 = 0;  ///< attention from feature-1 queries onto the span, all heads
  double s2 = 0;
  double fraction1 = 0;
  double fraction2() const { return 1.0 - fraction1; }
};

struct FractionOutcome {
  bool skipped_incorrect = false;
  std::size_t zero_attention = 0;  ///< (span, layer) pairs with s1 + s2 = 0
  std::vector<SpanLayerFraction> rows;
};

namespace detail {

/// Σ over `queries` × `keys` of one head's attention map, in double.
inline double block_sum(const AttentionDump& d, std::size_t layer, std::size_t head,
                        std::span<const std::uint32_t> queries, std::span<const std::uint32_t> keys) {
  double s = 0;
  for (auto q : queries)
    for (auto k : keys) s += d.at(layer, head, q, k);
  return s;
}

/// Sum that does not depend on the order of `xs` (sorted first), so a head
/// permutation leaves the result bit-identical.
inline double order_free_sum(std::vector<double>& xs) {
  std::sort(xs.begin(), xs.end());
  double s = 0;
  for (double x : xs) s += x;
  return s;
}

}  // namespace detail

/// Per-layer, per-span feature fractions of one dump. Only dumps whose model
/// answer matched the gold feature are scored; others are flagged as
/// skipped. head_sum pools all heads before normalizing; head_mean
/// normalizes each head and averages the heads that attended at all.
inline FractionOutcome fraction_scores(const AttentionDump& d, std::span<const PhonemeSpan> spans,
                                       HeadMode mode = HeadMode::head_sum) {
  FractionOutcome out;
  const auto& m = d.manifest;
  if (!m.correct()) {
    out.skipped_incorrect = true;
    return out;
  }
  for (const auto& sp : spans)
    for (auto idx : sp.token_indices)
      if (!std::binary_search(m.input_token_indices.begin(), m.input_token_indices.end(), idx))
        throw Error(ErrorKind::invalid_input, "span index is not an input token",
                    {{"word_id", m.word_id}, {"symbol", sp.symbol}, {"index", idx}});

  std::vector<double> h1(m.n_heads), h2(m.n_heads), fr;
  for (std::size_t layer = 0; layer < m.n_layers; ++layer)
    for (std::size_t s = 0; s < spans.size(); ++s) {
      fr.clear();
      for (std::size_t h = 0; h < m.n_heads; ++h) {
        h1[h] = detail::block_sum(d, layer, h, m.feature1_token_indices, spans[s].token_indices);
        h2[h] = detail::block_sum(d, layer, h, m.feature2_token_indices, spans[s].token_indices);
        if (mode == HeadMode::head_mean && h1[h] + h2[h] > 0) fr.push_back(h1[h] / (h1[h] + h2[h]));
      }
      auto a = h1, b = h2;
      SpanLayerFraction row{s, layer, detail::order_free_sum(a), detail::order_free_sum(b), 0};
      if (mode == HeadMode::head_sum) {
        if (!(row.s1 + row.s2 > 0)) {
          ++out.zero_attention;
          continue;
        }
        row.fraction1 = row.s1 / (row.s1 + row.s2);
      } else {
        if (fr.empty()) {
          ++out.zero_attention;
          continue;
        }
        const std::size_t n = fr.size();
        row.fraction1 = detail::order_free_sum(fr) / static_cast<double>(n);
      }
      out.rows.push_back(row);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Samples and order combination
// ---------------------------------------------------------------------------

struct FractionSample {
  std::string group;
  std::string language;
  std::string input_type;
  std::string word_id;
  std::string dimension_id;
  std::string feature_order;
  std::string symbol;
  std::size_t span_ordinal = 0;
  std::size_t layer = 0;
  std::string feature1;
  std::string feature2;
  std::string gold_feature;
  double fraction1 = 0;

  double fraction_of(std::string_view feature) const { return feature == feature1 ? fraction1 : 1.0 - fraction1; }
};

struct DumpAnalysis {
  std::vector<FractionSample> samples;
  bool skipped_incorrect = false;
  std::size_t zero_attention = 0;
};

/// Aligns and scores one dump. Audio dumps need the word's TextGrid.
inline DumpAnalysis analyze_dump(const AttentionDump& d, const TextGridDoc* textgrid,
                                 HeadMode mode = HeadMode::head_sum) {
  const auto& m = d.manifest;
  DumpAnalysis out;
  if (!m.correct()) {
    out.skipped_incorrect = true;
    return out;
  }
  std::vector<PhonemeSpan> spans;
  if (m.input_type == "audio") {
    if (!textgrid)
      throw Error(ErrorKind::missing_tier, "audio dump " + m.word_id + " has no TextGrid", {{"word_id", m.word_id}});
    spans = align_audio_spans(m, audio_frame_labels(m, *textgrid));
  } else {
    spans = align_text_spans(m);
  }
  auto res = fraction_scores(d, spans, mode);
  out.zero_attention = res.zero_attention;
  out.samples.reserve(res.rows.size());
  for (const auto& r : res.rows)
    out.samples.push_back({m.group, m.language, m.input_type, m.word_id, m.dimension_id, m.feature_order,
                           spans[r.span].symbol, r.span, r.layer, m.feature1, m.feature2, m.gold_feature,
                           r.fraction1});
  return out;
}

inline double combine_orders(double normal, double reversed) { return (normal + reversed) / 2.0; }

enum class OrderPolicy { both_required, available };

inline std::optional<OrderPolicy> parse_order_policy(std::string_view s) {
  if (s == "both-required" || s == "both_required") return OrderPolicy::both_required;
  if (s == "available") return OrderPolicy::available;
  return std::nullopt;
}

/// A sample after merging the two presentation orders; `fraction_x` is the
/// share of `feature_x` (the lexicographically smaller feature).
struct CombinedSample {
  std::string group;
  std::string language;
  std::string input_type;
  std::string word_id;
  std::string dimension_id;
  std::string symbol;
  std::size_t span_ordinal = 0;
  std::size_t layer = 0;
  std::string feature_x;
  std::string feature_y;
  std::string gold_feature;
  double fraction_x = 0;
  int n_orders = 0;

  double fraction_of(std::string_view feature) const { return feature == feature_x ? fraction_x : 1.0 - fraction_x; }
};

struct CombineResult {
  std::vector<CombinedSample> samples;
  std::size_t single_order_pairs = 0;  ///< (word, dimension) pairs seen in only one order
  std::size_t skipped_samples = 0;     ///< samples dropped by the both-required policy
};

inline CombineResult combine_samples(std::span<const FractionSample> samples,
                                     OrderPolicy policy = OrderPolicy::both_required) {
  using PairKey = std::tuple<std::string, std::string, std::string, std::string, std::string>;
  using SampleKey = std::tuple<PairKey, std::size_t, std::size_t>;
  struct Slot {
    std::optional<double> normal, reversed;
    const FractionSample* first = nullptr;
  };
  std::map<PairKey, int> orders_seen;
  std::map<SampleKey, Slot> slots;
  for (const auto& s : samples) {
    PairKey pk{s.group, s.language, s.input_type, s.word_id, s.dimension_id};
    const bool reversed = s.feature_order == "reversed";
    orders_seen[pk] |= reversed ? 2 : 1;
    auto& slot = slots[{pk, s.span_ordinal, s.layer}];
    const std::string& fx = std::min(s.feature1, s.feature2);
    const double x = s.fraction_of(fx);
    auto& target = reversed ? slot.reversed : slot.normal;
    if (target)
      throw Error(ErrorKind::invalid_input, "duplicate dump for " + s.word_id + " / " + s.dimension_id,
                  {{"word_id", s.word_id}, {"dimension", s.dimension_id}, {"feature_order", s.feature_order}});
    if (slot.first && slot.first->symbol != s.symbol)
      throw Error(ErrorKind::alignment_mismatch, "feature orders disagree on the symbol sequence of " + s.word_id,
                  {{"word_id", s.word_id}, {"span", s.span_ordinal}});
    target = x;
    if (!slot.first) slot.first = &s;
  }
  CombineResult out;
  for (const auto& [pk, mask] : orders_seen)
    if (mask != 3) ++out.single_order_pairs;
  for (const auto& [key, slot] : slots) {
    const auto& s = *slot.first;
    CombinedSample c{s.group, s.language, s.input_type, s.word_id, s.dimension_id, s.symbol,
                     s.span_ordinal, s.layer, std::min(s.feature1, s.feature2), std::max(s.feature1, s.feature2),
                     s.gold_feature, 0, 0};
    if (slot.normal && slot.reversed) {
      c.fraction_x = combine_orders(*slot.normal, *slot.reversed);
      c.n_orders = 2;
    } else if (policy == OrderPolicy::available) {
      c.fraction_x = slot.normal ? *slot.normal : *slot.reversed;
      c.n_orders = 1;
    } else {
      ++out.skipped_samples;
      continue;
    }
    out.samples.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct MeanCell {
  double sum = 0;
  std::size_t count = 0;
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  void add(double v) {
    sum += v;
    ++count;
  }
  void merge(const MeanCell& o) {
    sum += o.sum;
    count += o.count;
  }
};

struct FractionKey {
  std::string group;
  std::string input_type;
  std::string symbol;
  std::string dimension_id;
  std::string feature;
  std::size_t layer = 0;
  friend auto operator<=>(const FractionKey&, const FractionKey&) = default;
};

/// (group, input type, symbol, dimension, feature, layer) → mean fraction.
struct FractionTable {
  std::map<FractionKey, MeanCell> entries;
  void merge(const FractionTable& o) {
    for (const auto& [k, c] : o.entries) entries[k].merge(c);
  }
};

struct GoldKey {
  std::string group;
  std::string input_type;
  std::string symbol;
  std::string dimension_id;
  std::size_t layer = 0;
  friend auto operator<=>(const GoldKey&, const GoldKey&) = default;
};

/// (group, input type, symbol, dimension, layer) → mean fraction received by
/// whichever feature was the gold one for each word.
struct GoldTable {
  std::map<GoldKey, MeanCell> entries;
};

/// Unweighted mean over samples. Both features of a dimension are entered
/// from the same samples, so their means sum to one.
inline FractionTable aggregate_fractions(std::span<const CombinedSample> samples) {
  FractionTable t;
  for (const auto& s : samples) {
    t.entries[{s.group, s.input_type, s.symbol, s.dimension_id, s.feature_x, s.layer}].add(s.fraction_x);
    t.entries[{s.group, s.input_type, s.symbol, s.dimension_id, s.feature_y, s.layer}].add(1.0 - s.fraction_x);
  }
  return t;
}

inline GoldTable aggregate_gold(std::span<const CombinedSample> samples) {
  GoldTable t;
  for (const auto& s : samples)
    t.entries[{s.group, s.input_type, s.symbol, s.dimension_id, s.layer}].add(s.fraction_of(s.gold_feature));
  return t;
}

struct LayerPoint {
  std::string group;
  std::string input_type;
  std::size_t layer = 0;
  double mean_fraction = 0;
  std::size_t n_cells = 0;
};

/// Per (group, input type, layer): mean over (symbol, dimension) cells of the
/// gold-directed fraction.
inline std::vector<LayerPoint> layer_curve(const GoldTable& t) {
  std::map<std::tuple<std::string, std::string, std::size_t>, MeanCell> acc;
  for (const auto& [k, c] : t.entries) acc[{k.group, k.input_type, k.layer}].add(c.mean());
  std::vector<LayerPoint> out;
  for (const auto& [k, c] : acc) out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), c.mean(), c.count});
  return out;
}

struct HeatCell {
  std::string group;
  std::string input_type;
  std::string symbol;
  std::string dimension_id;
  std::string feature;
  double mean_fraction = 0;  ///< mean over layers of the per-layer means
  std::size_t n_layers = 0;
  std::size_t n_samples = 0;  ///< samples summed over layers
};

inline std::vector<HeatCell> heatmap(const FractionTable& t) {
  std::vector<HeatCell> out;
  MeanCell acc;
  std::size_t samples = 0;
  const FractionKey* cur = nullptr;
  auto flush = [&] {
    if (!cur) return;
    out.push_back({cur->group, cur->input_type, cur->symbol, cur->dimension_id, cur->feature, acc.mean(), acc.count,
                   samples});
  };
  for (const auto& [k, c] : t.entries) {
    if (!cur || std::tie(k.group, k.input_type, k.symbol, k.dimension_id, k.feature) !=
                    std::tie(cur->group, cur->input_type, cur->symbol, cur->dimension_id, cur->feature)) {
      flush();
      acc = {};
      samples = 0;
    }
    cur = &k;
    acc.add(c.mean());
    samples += c.count;
  }
  flush();
  return out;
}

}  // namespace phonosem::attnfrac
