#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phonosem/default_rules.hpp"
#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/phonology.hpp"
#include "phonosem/text.hpp"

namespace phonosem::semdim {

using phonology::PhonemeCategory;

/// Which end of a dimension. `a` is the first-listed feature; a positive
/// coefficient or score points towards it.
enum class Pole { a, b };

constexpr Pole opposite(Pole p) noexcept { return p == Pole::a ? Pole::b : Pole::a; }

struct SemanticDimension {
  std::string id;
  std::string feature_a;
  std::string feature_b;

  const std::string& feature(Pole p) const noexcept { return p == Pole::a ? feature_a : feature_b; }

  std::optional<Pole> pole_of(std::string_view feature) const noexcept {
    if (feature == feature_a) return Pole::a;
    if (feature == feature_b) return Pole::b;
    return std::nullopt;
  }
};

class DimensionRegistry {
 public:
  DimensionRegistry() = default;

  static DimensionRegistry parse(std::string_view content, const std::string& source = "<dimensions>") {
    DimensionRegistry reg;
    const auto lines = io::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (io::is_blank_or_comment(lines[i])) continue;
      auto f = text::split(lines[i], '\t');
      if (f.size() != 2)
        throw Error(ErrorKind::invalid_input, source + ":" + std::to_string(i + 1) + ": expected feature_a<TAB>feature_b",
                    {{"line", i + 1}});
      reg.add(std::string(text::trim(f[0])), std::string(text::trim(f[1])));
    }
    return reg;
  }

  static DimensionRegistry load(const std::filesystem::path& path) { return parse(io::read_file(path), path.string()); }

  /// The 25 bipolar pairs in table order.
  static const DimensionRegistry& defaults() {
    static const DimensionRegistry reg = parse(defaults::dimensions_tsv, "<default dimensions>");
    return reg;
  }

  void add(std::string feature_a, std::string feature_b) {
    if (feature_a.empty() || feature_b.empty() || feature_a == feature_b)
      throw Error(ErrorKind::invalid_input, "dimension features must be distinct and non-empty",
                  {{"feature_a", feature_a}, {"feature_b", feature_b}});
    std::string id = feature_a + "-" + feature_b;
    if (index_.contains(id)) throw Error(ErrorKind::invalid_input, "duplicate dimension " + id, {{"dimension", id}});
    index_.emplace(id, dims_.size());
    dims_.push_back({std::move(id), std::move(feature_a), std::move(feature_b)});
  }

  std::span<const SemanticDimension> dimensions() const noexcept { return dims_; }
  std::size_t size() const noexcept { return dims_.size(); }

  const SemanticDimension* find(std::string_view id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &dims_[it->second];
  }

  const SemanticDimension& at(std::string_view id) const {
    if (auto* d = find(id)) return *d;
    throw Error(ErrorKind::unknown_dimension, "unknown semantic dimension '" + std::string(id) + "'",
                {{"dimension", std::string(id)}});
  }

 private:
  std::vector<SemanticDimension> dims_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// ---------------------------------------------------------------------------
// Coefficient scoring
// ---------------------------------------------------------------------------

class CoefficientTable {
 public:
  /// CSV with columns category,dimension_id,coefficient.
  static CoefficientTable parse(std::string_view content, const std::string& source = "<coefficients>") {
    auto csv = io::parse_csv(content, source);
    const auto ci = csv.column("category"), di = csv.column("dimension_id"), vi = csv.column("coefficient");
    CoefficientTable t;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      const auto& row = csv.rows[r];
      auto cat = phonology::parse_category(text::trim(row[ci]));
      auto val = text::parse_double(row[vi]);
      if (!cat || !val || !std::isfinite(*val))
        throw Error(ErrorKind::invalid_input, source + ": bad coefficient row " + std::to_string(r + 2),
                    {{"row", r + 2}});
      t.set(*cat, std::string(text::trim(row[di])), *val);
    }
    return t;
  }

  static CoefficientTable load(const std::filesystem::path& path) { return parse(io::read_file(path), path.string()); }

  void set(PhonemeCategory cat, std::string dimension_id, double value) {
    coeff_[{cat, std::move(dimension_id)}] = value;
  }

  double at(PhonemeCategory cat, std::string_view dimension_id) const {
    auto it = coeff_.find(std::pair{cat, std::string(dimension_id)});
    if (it == coeff_.end())
      throw Error(ErrorKind::missing_coefficient,
                  "no coefficient for (" + std::string(phonology::to_string(cat)) + ", " + std::string(dimension_id) + ")",
                  {{"category", std::string(phonology::to_string(cat))}, {"dimension", std::string(dimension_id)}});
    return it->second;
  }

  /// Throws MissingCoefficient for the first absent (category, dimension).
  void require(std::span<const PhonemeCategory> categories, std::span<const std::string> dimension_ids) const {
    for (const auto& d : dimension_ids)
      for (auto c : categories) (void)at(c, d);
  }

  /// Dimension ids with at least one entry, sorted.
  std::vector<std::string> dimension_ids() const {
    std::set<std::string> ids;
    for (const auto& [k, v] : coeff_) ids.insert(k.second);
    return {ids.begin(), ids.end()};
  }

  CoefficientTable scaled(double factor) const {
    CoefficientTable t = *this;
    for (auto& [k, v] : t.coeff_) v *= factor;
    return t;
  }

 private:
  std::map<std::pair<PhonemeCategory, std::string>, double> coeff_;
};

/// Mean of the per-phoneme coefficients over the word's symbols.
inline double score_word(std::span<const std::string> symbols, const phonology::PhonemeInventory& inv,
                         const CoefficientTable& table, std::string_view dimension_id) {
  if (symbols.empty()) throw Error(ErrorKind::invalid_input, "cannot score an empty word");
  double sum = 0;
  for (const auto& s : symbols) {
    auto cat = inv.category_of(s);
    if (!cat)
      throw Error(ErrorKind::unknown_symbol, "symbol '" + s + "' is not in the inventory", {{"substring", s}});
    sum += table.at(*cat, dimension_id);
  }
  return sum / static_cast<double>(symbols.size());
}

struct ScoreRow {
  std::string word_id;
  std::string dimension_id;
  double score = 0;
};

enum class DimLabel { feature_a, feature_b, neutral };

struct LabeledScore {
  ScoreRow row;
  DimLabel label = DimLabel::neutral;
};

struct GoldRow {
  std::string word_id;
  std::string dimension_id;
  std::string feature;

  friend bool operator==(const GoldRow&, const GoldRow&) = default;
  friend auto operator<=>(const GoldRow&, const GoldRow&) = default;
};

enum class SigmaScope { per_dimension, pooled };

inline std::optional<SigmaScope> parse_sigma_scope(std::string_view s) {
  if (s == "per-dimension" || s == "per_dimension") return SigmaScope::per_dimension;
  if (s == "pooled") return SigmaScope::pooled;
  return std::nullopt;
}

struct ThresholdResult {
  std::vector<LabeledScore> labeled;  ///< input order, including neutral rows
  std::vector<GoldRow> gold;          ///< non-neutral rows only
  std::map<std::string, double> sigma;  ///< per dimension (pooled: same value everywhere)
  std::vector<std::string> degenerate_dimensions;  ///< sigma == 0, all neutral
};

/// Population standard deviation (mean-centred).
inline double population_sigma(std::span<const double> xs) {
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

/// Labels each score relative to the neutral point 0: |score| < k·sigma (or
/// score == 0) is neutral, otherwise the sign picks the pole.
inline ThresholdResult threshold_labels(std::span<const ScoreRow> rows, const DimensionRegistry& registry,
                                        double k = 1.0, SigmaScope scope = SigmaScope::per_dimension) {
  if (!(k >= 0) || !std::isfinite(k)) throw Error(ErrorKind::invalid_input, "threshold k must be finite and >= 0");
  std::map<std::string, std::vector<double>> by_dim;
  std::vector<double> all;
  for (const auto& r : rows) {
    (void)registry.at(r.dimension_id);
    by_dim[r.dimension_id].push_back(r.score);
    all.push_back(r.score);
  }
  ThresholdResult out;
  for (const auto& [dim, xs] : by_dim) {
    if (xs.size() < 2)
      throw Error(ErrorKind::insufficient_scores, "dimension " + dim + " needs at least 2 scores",
                  {{"dimension", dim}, {"count", xs.size()}});
  }
  const double pooled = all.size() >= 2 ? population_sigma(all) : 0.0;
  for (const auto& [dim, xs] : by_dim) {
    double s = scope == SigmaScope::pooled ? pooled : population_sigma(xs);
    out.sigma[dim] = s;
    if (s == 0) out.degenerate_dimensions.push_back(dim);
  }
  for (const auto& r : rows) {
    const double s = out.sigma.at(r.dimension_id);
    DimLabel label = DimLabel::neutral;
    if (s > 0 && r.score != 0 && !(std::abs(r.score) < k * s))
      label = r.score > 0 ? DimLabel::feature_a : DimLabel::feature_b;
    out.labeled.push_back({r, label});
    if (label != DimLabel::neutral) {
      const auto& d = registry.at(r.dimension_id);
      out.gold.push_back({r.word_id, r.dimension_id, d.feature(label == DimLabel::feature_a ? Pole::a : Pole::b)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unanimous merge of annotator labels
// ---------------------------------------------------------------------------

inline constexpr std::string_view label_neither = "neither";
inline constexpr std::string_view label_invalid = "invalid";

struct AnnotationRecord {
  std::string word_id;
  std::string dimension_id;
  std::string annotator_id;
  std::string label;  ///< a feature name, "neither" or "invalid"
};

inline AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  return {j.at("word_id").get<std::string>(), j.at("dimension_id").get<std::string>(),
          j.at("annotator_id").get<std::string>(), j.at("label").get<std::string>()};
}

inline nlohmann::ordered_json to_json(const AnnotationRecord& r) {
  nlohmann::ordered_json j;
  j["word_id"] = r.word_id;
  j["dimension_id"] = r.dimension_id;
  j["annotator_id"] = r.annotator_id;
  j["label"] = r.label;
  return j;
}

inline nlohmann::ordered_json to_json(const GoldRow& g) {
  nlohmann::ordered_json j;
  j["word_id"] = g.word_id;
  j["dimension_id"] = g.dimension_id;
  j["feature"] = g.feature;
  return j;
}

inline GoldRow gold_from_json(const nlohmann::json& j) {
  return {j.at("word_id").get<std::string>(), j.at("dimension_id").get<std::string>(), j.at("feature").get<std::string>()};
}

/// Checks a record's label against its dimension's three options.
inline void validate_annotation(const AnnotationRecord& r, const DimensionRegistry& registry) {
  const auto& d = registry.at(r.dimension_id);
  if (r.label != label_neither && r.label != label_invalid && !d.pole_of(r.label))
    throw Error(ErrorKind::invalid_input, "label '" + r.label + "' is not an option of " + d.id,
                {{"word_id", r.word_id}, {"dimension", d.id}, {"label", r.label}});
}

struct MergeStats {
  std::size_t cells = 0;
  std::size_t emitted = 0;
  std::size_t dropped_missing = 0;       ///< some annotator gave no valid label
  std::size_t dropped_disagreement = 0;  ///< labels differ
  std::size_t dropped_neither = 0;       ///< unanimous "neither"
};

struct MergeResult {
  std::vector<GoldRow> gold;
  MergeStats stats;
};

/// A gold row is emitted for a (word, dimension) cell iff every listed
/// annotator labelled it, all labels agree, and the label is a feature.
/// Cells appear in order of first occurrence.
inline MergeResult merge_unanimous(std::span<const AnnotationRecord> records, const std::set<std::string>& annotators) {
  using Cell = std::pair<std::string, std::string>;
  std::vector<Cell> order;
  std::map<Cell, std::map<std::string, std::set<std::string>>> labels;
  for (const auto& r : records) {
    if (!annotators.contains(r.annotator_id)) continue;
    Cell c{r.word_id, r.dimension_id};
    auto [it, inserted] = labels.try_emplace(c);
    if (inserted) order.push_back(c);
    it->second[r.annotator_id].insert(r.label);
  }
  MergeResult out;
  out.stats.cells = order.size();
  for (const auto& c : order) {
    const auto& by_annotator = labels.at(c);
    std::set<std::string> distinct;
    bool missing = false;
    for (const auto& a : annotators) {
      auto it = by_annotator.find(a);
      bool labelled = false;
      if (it != by_annotator.end())
        for (const auto& l : it->second)
          if (l != label_invalid) {
            distinct.insert(l);
            labelled = true;
          }
      if (!labelled) missing = true;
    }
    if (missing) {
      ++out.stats.dropped_missing;
      continue;
    }
    if (distinct.size() != 1) {
      ++out.stats.dropped_disagreement;
      continue;
    }
    if (*distinct.begin() == label_neither) {
      ++out.stats.dropped_neither;
      continue;
    }
    out.gold.push_back({c.first, c.second, *distinct.begin()});
    ++out.stats.emitted;
  }
  return out;
}

struct RetentionReport {
  std::size_t before = 0;
  std::size_t after = 0;
  double filtered_fraction = 0;

  /// Percentage with one decimal, e.g. "67.0".
  std::string filtered_percent() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", filtered_fraction * 100.0);
    return buf;
  }
};

inline RetentionReport filter_stats(std::size_t before, std::size_t after) {
  if (before == 0) throw Error(ErrorKind::invalid_input, "retention report needs a non-zero 'before' count");
  if (after > before)
    throw Error(ErrorKind::invalid_input, "'after' exceeds 'before'", {{"before", before}, {"after", after}});
  return {before, after, 1.0 - static_cast<double>(after) / static_cast<double>(before)};
}

}  // namespace phonosem::semdim
