#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/runner.hpp"
#include "phonosem/semdim.hpp"
#include "phonosem/text.hpp"

namespace phonosem::metrics {

using semdim::Pole;

/// Chance level of a balanced two-way choice; reported alongside scores.
inline constexpr double baseline_score = 0.5;

struct F1Result {
  double accuracy = 0;
  double macro_f1 = 0;
  double f1_a = 0;
  double f1_b = 0;
  std::size_t n = 0;          ///< valid (scored) pairs
  std::size_t n_invalid = 0;  ///< predictions excluded as invalid
  bool zero_denominator = false;  ///< some per-feature F1 had 2TP+FP+FN = 0
};

/// Accuracy and two-class macro-F1. Invalid predictions (nullopt) are
/// excluded from every count except `n_invalid`.
inline F1Result macro_f1(std::span<const Pole> gold, std::span<const std::optional<Pole>> pred) {
  if (gold.size() != pred.size() || gold.empty())
    throw Error(ErrorKind::invalid_input, "gold and prediction sequences must be equal-length and non-empty",
                {{"gold", gold.size()}, {"pred", pred.size()}});
  std::size_t tp[2]{}, fp[2]{}, fn[2]{}, correct = 0;
  F1Result r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!pred[i]) {
      ++r.n_invalid;
      continue;
    }
    ++r.n;
    const int g = gold[i] == Pole::a ? 0 : 1;
    const int p = *pred[i] == Pole::a ? 0 : 1;
    if (g == p) {
      ++correct;
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  if (r.n == 0)
    throw Error(ErrorKind::empty_after_exclusion, "no valid predictions left after excluding invalid responses",
                {{"n_invalid", r.n_invalid}});
  double f1[2];
  for (int c = 0; c < 2; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) r.zero_denominator = true;
    f1[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  r.f1_a = f1[0];
  r.f1_b = f1[1];
  r.macro_f1 = (f1[0] + f1[1]) / 2.0;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation cells
// ---------------------------------------------------------------------------

struct CellKey {
  std::string model;
  std::string group;
  std::string language;
  std::string input_type;
  std::string dimension_id;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct EvalCell {
  CellKey key;
  F1Result score;
};

struct CellBuild {
  std::vector<EvalCell> cells;  ///< sorted by key
  std::size_t records_without_gold = 0;
  std::vector<CellKey> empty_cells;  ///< every prediction invalid
};

/// Joins responses with gold features and scores each (model, group,
/// language, input type, dimension) cell. Failed requests count as invalid.
inline CellBuild compute_cells(std::span<const runner::ResponseRecord> records, std::span<const semdim::GoldRow> gold,
                               const semdim::DimensionRegistry& registry) {
  std::map<std::pair<std::string, std::string>, Pole> gold_pole;
  for (const auto& g : gold) {
    const auto& d = registry.at(g.dimension_id);
    auto p = d.pole_of(g.feature);
    if (!p)
      throw Error(ErrorKind::invalid_input, "gold feature '" + g.feature + "' is not part of " + d.id,
                  {{"word_id", g.word_id}, {"dimension", d.id}});
    gold_pole[{g.word_id, g.dimension_id}] = *p;
  }
  std::map<CellKey, std::pair<std::vector<Pole>, std::vector<std::optional<Pole>>>> grouped;
  CellBuild out;
  for (const auto& r : records) {
    auto it = gold_pole.find({r.word_id, r.dimension_id});
    if (it == gold_pole.end()) {
      ++out.records_without_gold;
      continue;
    }
    CellKey key{r.model, r.group, r.group == "constructed" ? std::string{} : r.language, r.input_type, r.dimension_id};
    auto& [g, p] = grouped[key];
    g.push_back(it->second);
    std::optional<Pole> pred;
    if (r.ok()) pred = registry.at(r.dimension_id).pole_of(r.resolved_label);
    p.push_back(pred);
  }
  for (const auto& [key, gp] : grouped) {
    try {
      out.cells.push_back({key, macro_f1(gp.first, gp.second)});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::empty_after_exclusion) throw;
      out.empty_cells.push_back(key);
    }
  }
  return out;
}

inline std::string cells_csv(std::span<const EvalCell> cells) {
  std::string out = io::csv_row({"model", "group", "language", "input_type", "dimension", "accuracy", "macro_f1", "n",
                                 "n_invalid", "zero_denominator"});
  for (const auto& c : cells)
    out += io::csv_row({c.key.model, c.key.group, c.key.language, c.key.input_type, c.key.dimension_id,
                        text::format_double(c.score.accuracy), text::format_double(c.score.macro_f1),
                        std::to_string(c.score.n), std::to_string(c.score.n_invalid),
                        c.score.zero_denominator ? "1" : "0"});
  return out;
}

inline std::vector<EvalCell> parse_cells_csv(const io::CsvTable& t) {
  const auto mi = t.column("model"), gi = t.column("group"), li = t.column("language"), ti = t.column("input_type"),
             di = t.column("dimension"), ai = t.column("accuracy"), fi = t.column("macro_f1");
  std::vector<EvalCell> cells;
  for (const auto& row : t.rows) {
    EvalCell c;
    c.key = {row[mi], row[gi], row[li], row[ti], row[di]};
    auto acc = text::parse_double(row[ai]);
    auto f1 = text::parse_double(row[fi]);
    if (!acc || !f1) throw Error(ErrorKind::invalid_input, "non-numeric score in metrics CSV");
    c.score.accuracy = *acc;
    c.score.macro_f1 = *f1;
    if (t.has_column("n")) c.score.n = text::parse_int<std::size_t>(row[t.column("n")]).value_or(0);
    if (t.has_column("n_invalid"))
      c.score.n_invalid = text::parse_int<std::size_t>(row[t.column("n_invalid")]).value_or(0);
    cells.push_back(std::move(c));
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

enum class Scheme { natural_group, constructed_group, per_input_type };

inline std::optional<Scheme> parse_scheme(std::string_view s) {
  if (s == "natural-group") return Scheme::natural_group;
  if (s == "constructed-group") return Scheme::constructed_group;
  if (s == "per-input-type") return Scheme::per_input_type;
  return std::nullopt;
}

struct AggregationAxes {
  std::vector<std::string> languages{"en", "fr", "ja", "ko"};
  std::vector<std::string> input_types{"original", "ipa", "audio"};
};

struct Summary {
  std::string model;
  std::string group;
  std::string input_type;    ///< set for per-input-type
  std::string dimension_id;  ///< set for the group schemes
  double macro_f1 = 0;
  std::vector<std::string> constituents;  ///< averaged cells, "language/input_type/dimension"
  std::vector<std::string> missing;       ///< expected cells that were absent
};

struct MetricTable {
  std::vector<Summary> summaries;
};

inline double unweighted_mean(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorKind::invalid_input, "mean of an empty set");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Unweighted means of macro-F1 over the scheme's axes. Group schemes average
/// languages × input types (natural) or input types (constructed) per model
/// and dimension; per-input-type averages every cell of a (model, group,
/// input type). Absent cells are listed, never silently skipped.
inline MetricTable aggregate(std::span<const EvalCell> cells, Scheme scheme, const AggregationAxes& axes = {}) {
  MetricTable out;
  std::map<CellKey, const EvalCell*> by_key;
  std::set<std::string> models, dims;
  for (const auto& c : cells) {
    by_key[c.key] = &c;
    models.insert(c.key.model);
  }
  auto label = [](const CellKey& k) { return k.language + "/" + k.input_type + "/" + k.dimension_id; };

  if (scheme == Scheme::per_input_type) {
    std::map<std::tuple<std::string, std::string, std::string>, Summary> acc;
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> vals;
    for (const auto& c : cells) {
      auto k = std::tuple{c.key.model, c.key.group, c.key.input_type};
      auto& s = acc[k];
      s.model = c.key.model;
      s.group = c.key.group;
      s.input_type = c.key.input_type;
      s.constituents.push_back(label(c.key));
      vals[k].push_back(c.score.macro_f1);
    }
    for (auto& [k, s] : acc) {
      s.macro_f1 = unweighted_mean(vals[k]);
      out.summaries.push_back(std::move(s));
    }
    return out;
  }

  const std::string group = scheme == Scheme::natural_group ? "natural" : "constructed";
  const std::vector<std::string> langs =
      scheme == Scheme::natural_group ? axes.languages : std::vector<std::string>{std::string{}};
  for (const auto& c : cells)
    if (c.key.group == group) dims.insert(c.key.dimension_id);
  for (const auto& m : models)
    for (const auto& d : dims) {
      Summary s;
      s.model = m;
      s.group = group;
      s.dimension_id = d;
      std::vector<double> vals;
      for (const auto& l : langs)
        for (const auto& t : axes.input_types) {
          CellKey k{m, group, l, t, d};
          if (auto it = by_key.find(k); it != by_key.end()) {
            vals.push_back(it->second->score.macro_f1);
            s.constituents.push_back(label(k));
          } else {
            s.missing.push_back(label(k));
          }
        }
      if (vals.empty()) continue;
      s.macro_f1 = unweighted_mean(vals);
      out.summaries.push_back(std::move(s));
    }
  return out;
}

inline std::string summaries_csv(const MetricTable& t) {
  std::string out =
      io::csv_row({"model", "group", "input_type", "dimension", "macro_f1", "n_cells", "n_missing", "constituents", "missing"});
  for (const auto& s : t.summaries)
    out += io::csv_row({s.model, s.group, s.input_type, s.dimension_id, text::format_double(s.macro_f1),
                        std::to_string(s.constituents.size()), std::to_string(s.missing.size()),
                        text::join(s.constituents, ";"), text::join(s.missing, ";")});
  return out;
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

using ScoreMap = std::map<std::string, double>;

/// Values of the keys present in both maps, in key order.
inline std::pair<std::vector<double>, std::vector<double>> paired_values(const ScoreMap& h, const ScoreMap& m) {
  std::vector<double> hv, mv;
  for (const auto& [k, v] : h)
    if (auto it = m.find(k); it != m.end()) {
      hv.push_back(v);
      mv.push_back(it->second);
    }
  return {std::move(hv), std::move(mv)};
}

inline double pearson(std::span<const double> h, std::span<const double> m) {
  if (h.size() != m.size() || h.size() < 2)
    throw Error(ErrorKind::invalid_input, "correlation needs at least 2 paired values", {{"n", h.size()}});
  const double mh = unweighted_mean(h), mm = unweighted_mean(m);
  double num = 0, sh = 0, sm = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    num += (h[i] - mh) * (m[i] - mm);
    sh += (h[i] - mh) * (h[i] - mh);
    sm += (m[i] - mm) * (m[i] - mm);
  }
  if (sh == 0 || sm == 0)
    throw Error(ErrorKind::degenerate_variance, "a score set has zero variance", {{"var_h", sh}, {"var_m", sm}});
  const double r = num / (std::sqrt(sh) * std::sqrt(sm));
  return std::clamp(r, -1.0, 1.0);
}

/// Pearson r over the dimensions present in both maps.
inline double pearson(const ScoreMap& h, const ScoreMap& m) {
  auto [hv, mv] = paired_values(h, m);
  return pearson(hv, mv);
}

/// 1-based ranks with ties sharing the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> h, std::span<const double> m) {
  auto rh = average_ranks(h);
  auto rm = average_ranks(m);
  return pearson(rh, rm);
}

inline double spearman(const ScoreMap& h, const ScoreMap& m) {
  auto [hv, mv] = paired_values(h, m);
  return spearman(hv, mv);
}

/// `dimension,score` CSV (extra columns ignored).
inline ScoreMap parse_score_map(const io::CsvTable& t, std::string_view score_column = "score") {
  const auto di = t.column("dimension");
  const auto si = t.column(score_column);
  ScoreMap out;
  for (const auto& row : t.rows) {
    auto v = text::parse_double(row[si]);
    if (!v) throw Error(ErrorKind::invalid_input, "non-numeric score for dimension " + row[di]);
    out[row[di]] = *v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audio advantage
// ---------------------------------------------------------------------------

struct Advantage {
  std::string group;
  std::string dimension_id;
  double audio = 0;     ///< model-averaged score, audio input
  double original = 0;  ///< model-averaged score, original text input
  double advantage = 0;
  std::size_t n_models = 0;
};

struct AdvantageResult {
  std::vector<Advantage> rows;
  std::vector<std::string> skipped;  ///< "group/dimension" lacking one input type
};

/// A(g, d) = S(g, audio, d) − S(g, original, d), where S is the unweighted
/// mean over models of each model's score (natural cells first averaged
/// over languages).
inline AdvantageResult advantage(std::span<const EvalCell> cells) {
  // (group, dim, input_type) -> model -> language scores
  std::map<std::tuple<std::string, std::string, std::string>, std::map<std::string, std::vector<double>>> acc;
  for (const auto& c : cells) {
    if (c.key.input_type != "audio" && c.key.input_type != "original") continue;
    acc[{c.key.group, c.key.dimension_id, c.key.input_type}][c.key.model].push_back(c.score.macro_f1);
  }
  auto model_mean = [](const std::map<std::string, std::vector<double>>& by_model) {
    std::vector<double> per_model;
    for (const auto& [m, xs] : by_model) per_model.push_back(unweighted_mean(xs));
    return std::pair{unweighted_mean(per_model), per_model.size()};
  };
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& [k, v] : acc) keys.insert({std::get<0>(k), std::get<1>(k)});
  AdvantageResult out;
  for (const auto& [g, d] : keys) {
    auto a = acc.find({g, d, "audio"});
    auto o = acc.find({g, d, "original"});
    if (a == acc.end() || o == acc.end()) {
      out.skipped.push_back(g + "/" + d);
      continue;
    }
    auto [sa, na] = model_mean(a->second);
    auto [so, no] = model_mean(o->second);
    out.rows.push_back({g, d, sa, so, sa - so, std::max(na, no)});
  }
  return out;
}

inline std::string advantage_csv(const AdvantageResult& r) {
  std::string out = io::csv_row({"group", "dimension", "audio", "original", "advantage", "n_models"});
  for (const auto& a : r.rows)
    out += io::csv_row({a.group, a.dimension_id, text::format_double(a.audio), text::format_double(a.original),
                        text::format_double(a.advantage), std::to_string(a.n_models)});
  return out;
}

}  // namespace phonosem::metrics
