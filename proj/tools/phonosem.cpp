// phonosem: file-in / file-out command line for the sound-symbolism pipeline.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "phonosem/attnfrac/align.hpp"
#include "phonosem/attnfrac/dump.hpp"
#include "phonosem/attnfrac/fraction.hpp"
#include "phonosem/attnfrac/report.hpp"
#include "phonosem/attnfrac/textgrid.hpp"
#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/metrics.hpp"
#include "phonosem/parallel.hpp"
#include "phonosem/phonology.hpp"
#include "phonosem/promptkit.hpp"
#include "phonosem/runner.hpp"
#include "phonosem/semdim.hpp"
#include "phonosem/wordgen.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace phonosem;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  std::string out = "-";
  std::string log_level = "info";
  std::string workdir;
  std::size_t threads = 0;
};

void emit(const std::string& path, std::string_view content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    io::write_file_atomic(path, content);
    spdlog::info("wrote {}", path);
  }
}

fs::path require_dir_out(const Globals& g, const char* cmd) {
  if (g.out.empty() || g.out == "-")
    throw Error(ErrorKind::invalid_input, std::string(cmd) + " writes several files; pass --out DIR");
  fs::create_directories(g.out);
  return g.out;
}

std::string pretty(const ordered_json& j) { return j.dump(2) + "\n"; }

phonology::PhonemeInventory inventory_from(const std::string& path) {
  return path.empty() ? phonology::PhonemeInventory::defaults() : phonology::PhonemeInventory::load(path);
}
phonology::NormalizationRules normalization_from(const std::string& path) {
  return path.empty() ? phonology::NormalizationRules::defaults() : phonology::NormalizationRules::load(path);
}
phonology::RomanizationRules romanization_from(const std::string& path) {
  return path.empty() ? phonology::RomanizationRules::defaults() : phonology::RomanizationRules::load(path);
}
semdim::DimensionRegistry dimensions_from(const std::string& path) {
  return path.empty() ? semdim::DimensionRegistry::defaults() : semdim::DimensionRegistry::load(path);
}

template <class T, class F>
std::vector<T> read_records(const std::string& path, F&& from_json) {
  std::vector<T> out;
  for (const auto& j : io::read_jsonl(path)) {
    try {
      out.push_back(from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::invalid_input, path + ": bad record: " + e.what(), {{"path", path}});
    }
  }
  return out;
}

template <class Range>
std::string jsonl_of(const Range& items) {
  std::string out;
  for (const auto& x : items) out += to_json(x).dump() + "\n";
  return out;
}

// --- gen-words ---------------------------------------------------------------

struct GenWordsArgs {
  std::string inventory, normalization, romanization, removals, report;
  std::vector<std::string> dicts;
};

void cmd_gen_words(const Globals& g, const GenWordsArgs& a) {
  const auto inv = inventory_from(a.inventory);
  const auto norm = normalization_from(a.normalization);
  const auto rom = romanization_from(a.romanization);

  auto candidates = wordgen::generate_candidates(inv);
  wordgen::attach_romanization(candidates, rom);

  std::vector<wordgen::RawPronunciation> entries;
  std::size_t malformed = 0;
  for (const auto& d : a.dicts) {
    auto load = wordgen::load_dictionary(d);
    malformed += load.malformed_lines;
    entries.insert(entries.end(), load.entries.begin(), load.entries.end());
    spdlog::info("{}: {} pronunciations, {} malformed lines", d, load.entries.size(), load.malformed_lines);
  }
  const auto index = wordgen::build_exclusion_index(entries, norm);
  auto filtered = wordgen::filter_candidates(candidates, index);

  std::vector<std::string> removal_list;
  if (!a.removals.empty()) removal_list = wordgen::parse_removal_list(io::read_file(a.removals), norm);
  auto manual = wordgen::apply_manual_removals(filtered.kept, removal_list);
  for (const auto& u : manual.unknown_removals) spdlog::warn("removal entry '{}' matches no kept word", u);

  spdlog::info("{} candidates, {} removed by dictionaries, {} removed manually, {} kept", candidates.size(),
               filtered.removed.size(), manual.removed.size(), manual.kept.size());
  emit(g.out, jsonl_of(manual.kept));

  if (!a.report.empty()) {
    ordered_json r;
    r["candidates"] = candidates.size();
    r["dictionary_entries"] = entries.size();
    r["malformed_dictionary_lines"] = malformed + index.malformed;
    ordered_json removed = ordered_json::array();
    for (const auto& w : filtered.removed)
      removed.push_back({{"id", w.word.id}, {"ipa", w.word.ipa_string()}, {"source", w.source_tag}});
    r["removed_by_dictionary"] = removed;
    r["removed_manually"] = manual.removed;
    r["unknown_removals"] = manual.unknown_removals;
    r["kept"] = manual.kept.size();
    emit(a.report, pretty(r));
  }
}

// --- score-dims --------------------------------------------------------------

struct ScoreDimsArgs {
  std::string coeffs, words, dimensions, inventory, scores;
  std::string sigma_scope = "per-dimension";
  double k = 1.0;
};

void cmd_score_dims(const Globals& g, const ScoreDimsArgs& a) {
  const auto inv = inventory_from(a.inventory);
  const auto reg = dimensions_from(a.dimensions);
  const auto scope = semdim::parse_sigma_scope(a.sigma_scope);
  if (!scope) throw Error(ErrorKind::invalid_input, "unknown --sigma-scope '" + a.sigma_scope + "'");
  const auto table = semdim::CoefficientTable::load(a.coeffs);
  const auto words = read_records<wordgen::PseudoWord>(a.words, wordgen::pseudo_word_from_json);

  std::vector<std::string> dims;
  const auto present = table.dimension_ids();
  for (const auto& id : present) (void)reg.at(id);
  for (const auto& d : reg.dimensions())
    if (std::binary_search(present.begin(), present.end(), d.id)) dims.push_back(d.id);

  std::vector<semdim::ScoreRow> rows;
  for (const auto& w : words)
    for (const auto& d : dims) rows.push_back({w.id, d, semdim::score_word(w.symbols, inv, table, d)});
  const auto res = semdim::threshold_labels(rows, reg, a.k, *scope);
  for (const auto& d : res.degenerate_dimensions) spdlog::warn("dimension {} has zero variance; all rows neutral", d);
  spdlog::info("{} scores, {} gold rows", rows.size(), res.gold.size());
  emit(g.out, jsonl_of(res.gold));

  if (!a.scores.empty()) {
    std::string csv = io::csv_row({"word_id", "dimension", "score", "sigma", "label"});
    for (const auto& l : res.labeled) {
      const auto& d = reg.at(l.row.dimension_id);
      std::string label = l.label == semdim::DimLabel::neutral ? "neutral"
                          : l.label == semdim::DimLabel::feature_a ? d.feature_a
                                                                  : d.feature_b;
      csv += io::csv_row({l.row.word_id, l.row.dimension_id, text::format_double(l.row.score),
                          text::format_double(res.sigma.at(l.row.dimension_id)), label});
    }
    emit(a.scores, csv);
  }
}

// --- merge-annotations -------------------------------------------------------

struct MergeArgs {
  std::vector<std::string> inputs, annotators;
  std::string strategy = "unanimous", dimensions, report;
  std::size_t before = 0;
};

void cmd_merge(const Globals& g, const MergeArgs& a) {
  if (a.strategy != "unanimous") throw Error(ErrorKind::invalid_input, "unknown --strategy '" + a.strategy + "'");
  const auto reg = dimensions_from(a.dimensions);
  std::vector<semdim::AnnotationRecord> records;
  for (const auto& p : a.inputs) {
    auto rs = read_records<semdim::AnnotationRecord>(p, semdim::annotation_from_json);
    for (const auto& r : rs) semdim::validate_annotation(r, reg);
    records.insert(records.end(), rs.begin(), rs.end());
  }
  std::set<std::string> annotators(a.annotators.begin(), a.annotators.end());
  if (annotators.empty())
    for (const auto& r : records) annotators.insert(r.annotator_id);
  const auto res = semdim::merge_unanimous(records, annotators);
  spdlog::info("{} cells, {} gold, {} missing, {} disagreement, {} neither", res.stats.cells, res.stats.emitted,
               res.stats.dropped_missing, res.stats.dropped_disagreement, res.stats.dropped_neither);
  emit(g.out, jsonl_of(res.gold));

  if (!a.report.empty() || a.before > 0) {
    ordered_json r;
    r["annotators"] = annotators;
    r["cells"] = res.stats.cells;
    r["emitted"] = res.stats.emitted;
    r["dropped_missing"] = res.stats.dropped_missing;
    r["dropped_disagreement"] = res.stats.dropped_disagreement;
    r["dropped_neither"] = res.stats.dropped_neither;
    if (a.before > 0) {
      const auto ret = semdim::filter_stats(a.before, res.gold.size());
      r["before"] = ret.before;
      r["after"] = ret.after;
      r["filtered_fraction"] = ret.filtered_fraction;
      r["filtered_percent"] = ret.filtered_percent();
      spdlog::info("filtered {}% of {} annotation points", ret.filtered_percent(), ret.before);
    }
    if (!a.report.empty()) emit(a.report, pretty(r));
  }
}

// --- build-prompts -----------------------------------------------------------

struct BuildPromptsArgs {
  std::string lexicon, dimensions, templates, task = "ab", language;
  std::vector<std::string> input_types{"original", "ipa", "audio"};
  std::vector<std::string> orders{"normal", "reversed"};
  bool all_dimensions = false;
};

void cmd_build_prompts(const Globals& g, const BuildPromptsArgs& a) {
  if (a.task != "ab" && a.task != "annotation") throw Error(ErrorKind::invalid_input, "unknown --task '" + a.task + "'");
  const auto reg = dimensions_from(a.dimensions);
  const auto tmpl =
      a.templates.empty() ? promptkit::PromptTemplates{} : promptkit::PromptTemplates::load_dir(a.templates);
  const auto entries = read_records<promptkit::LexiconEntry>(a.lexicon, promptkit::entry_from_json);
  std::vector<promptkit::InputType> types;
  for (const auto& t : a.input_types) {
    auto it = promptkit::parse_input_type(t);
    if (!it) throw Error(ErrorKind::invalid_input, "unknown input type '" + t + "'");
    types.push_back(*it);
  }
  std::vector<promptkit::FeatureOrder> orders;
  for (const auto& o : a.orders) {
    auto po = promptkit::parse_order(o);
    if (!po) throw Error(ErrorKind::invalid_input, "unknown feature order '" + o + "'");
    orders.push_back(*po);
  }

  std::vector<promptkit::PromptSpec> prompts;
  for (const auto& e : entries) {
    std::vector<const semdim::SemanticDimension*> dims;
    if (a.task == "ab" && !a.all_dimensions && !e.gold.empty()) {
      for (const auto& d : reg.dimensions())
        if (e.gold.contains(d.id)) dims.push_back(&d);
      for (const auto& [id, f] : e.gold) (void)reg.at(id);
    } else {
      for (const auto& d : reg.dimensions()) dims.push_back(&d);
    }
    for (const auto* d : dims) {
      if (a.task == "annotation") {
        prompts.push_back(
            promptkit::build_annotation_prompt(e, *d, a.language.empty() ? e.language : a.language, tmpl));
        continue;
      }
      for (auto t : types)
        for (auto o : orders) prompts.push_back(promptkit::build_ab_prompt(e, *d, t, o, tmpl));
    }
  }
  spdlog::info("{} prompts from {} entries", prompts.size(), entries.size());
  emit(g.out, jsonl_of(prompts));
}

// --- run-eval / run-annotation -----------------------------------------------

struct RunArgs {
  std::string prompts, log;
  std::vector<std::string> endpoints;
  std::string dimensions;
  int concurrency = 4;
  int max_attempts = 3;
  int backoff_ms = 1000;
};

runner::EndpointConfig endpoint_file(const std::string& path) {
  try {
    return runner::endpoint_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_input, path + ": bad endpoint config: " + e.what(), {{"path", path}});
  }
}

runner::RunOptions run_options(const RunArgs& a, const semdim::DimensionRegistry& reg) {
  runner::RunOptions opt;
  opt.concurrency = a.concurrency;
  opt.max_attempts = a.max_attempts;
  opt.initial_backoff = std::chrono::milliseconds(a.backoff_ms);
  opt.registry = &reg;
  return opt;
}

void cmd_run_eval(const Globals& g, const RunArgs& a) {
  if (a.endpoints.size() != 1) throw Error(ErrorKind::invalid_input, "run-eval takes exactly one --endpoint");
  const auto reg = dimensions_from(a.dimensions);
  const auto prompts = read_records<promptkit::PromptSpec>(a.prompts, promptkit::prompt_from_json);
  const auto cfg = endpoint_file(a.endpoints.front());
  runner::ResumeLog log(a.log);
  runner::HttpChatTransport http;
  runner::BatchStats stats;
  const auto records = runner::run_batch(prompts, cfg, http, log, run_options(a, reg), &stats);
  spdlog::info("{} prompts: {} sent, {} resumed, {} failed", prompts.size(), stats.requested, stats.resumed,
               stats.failed);
  emit(g.out, jsonl_of(records));
}

void cmd_run_annotation(const Globals& g, const RunArgs& a) {
  if (a.endpoints.empty()) throw Error(ErrorKind::invalid_input, "run-annotation needs at least one --endpoint");
  const auto reg = dimensions_from(a.dimensions);
  const auto prompts = read_records<promptkit::PromptSpec>(a.prompts, promptkit::prompt_from_json);
  std::vector<runner::EndpointConfig> cfgs;
  for (const auto& e : a.endpoints) cfgs.push_back(endpoint_file(e));
  runner::ResumeLog log(a.log);
  runner::HttpChatTransport http;
  const auto records = runner::run_annotation(prompts, cfgs, http, log, run_options(a, reg));
  emit(g.out, jsonl_of(records));
}

// --- metrics / correlate / advantage -----------------------------------------

struct MetricsArgs {
  std::vector<std::string> responses;
  std::string gold, dimensions, summaries;
};

void cmd_metrics(const Globals& g, const MetricsArgs& a) {
  const auto reg = dimensions_from(a.dimensions);
  std::vector<runner::ResponseRecord> records;
  for (const auto& p : a.responses) {
    auto rs = read_records<runner::ResponseRecord>(p, runner::record_from_json);
    records.insert(records.end(), rs.begin(), rs.end());
  }
  const auto gold = read_records<semdim::GoldRow>(a.gold, semdim::gold_from_json);
  const auto built = metrics::compute_cells(records, gold, reg);
  if (built.records_without_gold) spdlog::warn("{} responses have no gold label", built.records_without_gold);
  for (const auto& k : built.empty_cells)
    spdlog::warn("cell {}/{}/{}/{}/{} has only invalid responses", k.model, k.group, k.language, k.input_type,
                 k.dimension_id);
  emit(g.out, metrics::cells_csv(built.cells));

  if (!a.summaries.empty()) {
    fs::create_directories(a.summaries);
    for (auto [name, scheme] : {std::pair{"natural-group", metrics::Scheme::natural_group},
                                std::pair{"constructed-group", metrics::Scheme::constructed_group},
                                std::pair{"per-input-type", metrics::Scheme::per_input_type}}) {
      const auto t = metrics::aggregate(built.cells, scheme);
      for (const auto& s : t.summaries)
        if (!s.missing.empty())
          spdlog::warn("{} {} {}: {} expected cells missing", name, s.model, s.dimension_id, s.missing.size());
      emit((fs::path(a.summaries) / (std::string("summary_") + name + ".csv")).string(), metrics::summaries_csv(t));
    }
  }
}

struct CorrelateArgs {
  std::string human, model, method = "pearson", column = "score";
};

void cmd_correlate(const Globals& g, const CorrelateArgs& a) {
  const auto h = metrics::parse_score_map(io::read_csv(a.human), a.column);
  const auto m = metrics::parse_score_map(io::read_csv(a.model), a.column);
  double r;
  if (a.method == "pearson")
    r = metrics::pearson(h, m);
  else if (a.method == "spearman")
    r = metrics::spearman(h, m);
  else
    throw Error(ErrorKind::invalid_input, "unknown --method '" + a.method + "'");
  ordered_json j;
  j["method"] = a.method;
  j["n"] = metrics::paired_values(h, m).first.size();
  j["r"] = r;
  emit(g.out, j.dump() + "\n");
}

void cmd_advantage(const Globals& g, const std::string& cells_path) {
  const auto cells = metrics::parse_cells_csv(io::read_csv(cells_path));
  const auto res = metrics::advantage(cells);
  for (const auto& s : res.skipped) spdlog::warn("no audio/original pair for {}", s);
  emit(g.out, metrics::advantage_csv(res));
}

// --- attention fractions -----------------------------------------------------

struct AttnArgs {
  std::string dumps, textgrids, mode = "head_sum", order_policy = "both-required";
  bool svg = false;
};

std::vector<fs::path> files_with_extension(const fs::path& dir, std::string_view ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::io_error, "not a directory: " + dir.string(), {{"path", dir.string()}});
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

void write_attn_reports(const fs::path& dir, const attnfrac::FractionTable& table, const attnfrac::GoldTable& gold,
                        bool svg) {
  const auto heat = attnfrac::heatmap(table);
  emit((dir / "heatmap.csv").string(), attnfrac::heatmap_csv(heat));
  emit((dir / "layer_curve.csv").string(), attnfrac::layer_curve_csv(attnfrac::layer_curve(gold)));
  if (svg) emit((dir / "heatmap.svg").string(), attnfrac::heatmap_svg(heat));
}

void cmd_attn_fraction(const Globals& g, const AttnArgs& a) {
  const auto mode = attnfrac::parse_head_mode(a.mode);
  if (!mode) throw Error(ErrorKind::invalid_input, "unknown --mode '" + a.mode + "'");
  const auto policy = attnfrac::parse_order_policy(a.order_policy);
  if (!policy) throw Error(ErrorKind::invalid_input, "unknown --order-policy '" + a.order_policy + "'");
  const fs::path out = require_dir_out(g, "attn-fraction");
  const auto files = files_with_extension(a.dumps, ".afd");

  std::vector<attnfrac::DumpAnalysis> results(files.size());
  parallel_for(files.size(), g.threads ? g.threads : default_threads(), [&](std::size_t i) {
    const auto dump = attnfrac::read_dump(files[i]);
    std::optional<attnfrac::TextGridDoc> tg;
    if (dump.manifest.input_type == "audio" && dump.manifest.correct()) {
      if (a.textgrids.empty())
        throw Error(ErrorKind::invalid_input, "audio dumps need --textgrids", {{"dump", files[i].string()}});
      tg = attnfrac::read_textgrid(fs::path(a.textgrids) / (dump.manifest.word_id + ".TextGrid"));
    }
    results[i] = attnfrac::analyze_dump(dump, tg ? &*tg : nullptr, *mode);
  });

  // sequential reduce in file-name order keeps the output byte-stable
  std::vector<attnfrac::FractionSample> samples;
  std::size_t incorrect = 0, zero = 0;
  for (const auto& r : results) {
    incorrect += r.skipped_incorrect;
    zero += r.zero_attention;
    samples.insert(samples.end(), r.samples.begin(), r.samples.end());
  }
  const auto combined = attnfrac::combine_samples(samples, *policy);
  const auto table = attnfrac::aggregate_fractions(combined.samples);
  const auto gold = attnfrac::aggregate_gold(combined.samples);

  emit((out / "fraction_table.csv").string(), attnfrac::fraction_table_csv(table));
  emit((out / "gold_table.csv").string(), attnfrac::gold_table_csv(gold));
  write_attn_reports(out, table, gold, a.svg);

  ordered_json s;
  s["dumps"] = files.size();
  s["skipped_incorrect"] = incorrect;
  s["zero_attention"] = zero;
  s["samples"] = samples.size();
  s["combined_samples"] = combined.samples.size();
  s["single_order_pairs"] = combined.single_order_pairs;
  s["skipped_samples"] = combined.skipped_samples;
  s["mode"] = attnfrac::to_string(*mode);
  s["order_policy"] = a.order_policy;
  emit((out / "summary.json").string(), pretty(s));
  spdlog::info("{} dumps: {} incorrect skipped, {} zero-attention, {} combined samples", files.size(), incorrect, zero,
               combined.samples.size());
}

struct ReportArgs {
  std::string tables, layer_table;
  bool svg = false;
};

void cmd_report(const Globals& g, const ReportArgs& a) {
  if (a.tables.empty() && a.layer_table.empty())
    throw Error(ErrorKind::invalid_input, "report needs --tables and/or --layer-table");
  const fs::path out = require_dir_out(g, "report");
  if (!a.tables.empty()) {
    const fs::path dir = a.tables;
    const auto table = attnfrac::parse_fraction_table(io::read_csv(dir / "fraction_table.csv"));
    const auto gold = attnfrac::parse_gold_table(io::read_csv(dir / "gold_table.csv"));
    write_attn_reports(out, table, gold, a.svg);
  }
  if (!a.layer_table.empty()) {
    const auto lt = attnfrac::parse_layer_table(io::read_csv(a.layer_table));
    emit((out / "layer_average.csv").string(), attnfrac::layer_average_csv(attnfrac::layer_average(lt)));
  }
}

// --- check-dump --------------------------------------------------------------

int cmd_check_dump(const Globals& g, const std::vector<std::string>& paths) {
  std::string out;
  int bad = 0;
  for (const auto& p : paths) {
    ordered_json j;
    j["path"] = p;
    try {
      const auto d = attnfrac::read_dump(p);
      j["valid"] = true;
      j["word_id"] = d.manifest.word_id;
      j["n_layers"] = d.manifest.n_layers;
      j["n_heads"] = d.manifest.n_heads;
      j["n_sel"] = d.manifest.n_sel;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::io_error) throw;
      ++bad;
      j["valid"] = false;
      j["error"] = e.to_json();
    }
    out += j.dump() + "\n";
  }
  emit(g.out, out);
  return bad ? 2 : 0;
}

// --- sample ------------------------------------------------------------------

/// Uniform integer in [0, n) by rejection, identical on every platform.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % n;
}

void cmd_sample(const Globals& g, const std::string& input, std::size_t n) {
  std::vector<std::string> lines;
  for (auto& l : io::split_lines(io::read_file(input)))
    if (!text::trim(l).empty()) lines.push_back(std::move(l));
  std::mt19937_64 rng(g.seed);
  for (std::size_t i = lines.size(); i > 1; --i) std::swap(lines[i - 1], lines[uniform_below(rng, i)]);
  if (n < lines.size()) lines.resize(n);
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  emit(g.out, out);
}

int report_error(const Error& e) {
  std::cerr << e.to_json().dump() << std::endl;
  return e.is_validation() ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phonosem: phoneme-level sound-symbolism evaluation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed for sampling")->capture_default_str();
  app.add_option("--out,-o", g.out, "output file (or directory for multi-file commands); '-' = stdout");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();
  app.add_option("--workdir", g.workdir, "resolve relative paths against this directory");
  app.add_option("--threads", g.threads, "worker threads (0 = hardware concurrency)");

  GenWordsArgs gw;
  auto* c_gen = app.add_subcommand("gen-words", "generate CVCV pseudo-words and filter against dictionaries");
  c_gen->add_option("--inventory", gw.inventory, "symbol<TAB>category file (default: built-in)");
  c_gen->add_option("--normalization", gw.normalization);
  c_gen->add_option("--romanization", gw.romanization);
  c_gen->add_option("--dicts", gw.dicts, "pronunciation dictionaries (orthography<TAB>/ipa/)");
  c_gen->add_option("--removals", gw.removals, "IPA strings to drop, one per line");
  c_gen->add_option("--report", gw.report, "JSON removal report");

  ScoreDimsArgs sd;
  auto* c_score = app.add_subcommand("score-dims", "score pseudo-words per dimension and threshold into gold labels");
  c_score->add_option("--coeffs", sd.coeffs, "CSV category,dimension_id,coefficient")->required();
  c_score->add_option("--words", sd.words, "pseudo-word JSONL")->required();
  c_score->add_option("--dimensions", sd.dimensions);
  c_score->add_option("--inventory", sd.inventory);
  c_score->add_option("--sigma-scope", sd.sigma_scope, "per-dimension|pooled")->capture_default_str();
  c_score->add_option("--k", sd.k, "threshold in standard deviations")->capture_default_str();
  c_score->add_option("--scores", sd.scores, "CSV of every score and its label");

  MergeArgs mg;
  auto* c_merge = app.add_subcommand("merge-annotations", "unanimous merge of annotator labels");
  c_merge->add_option("--inputs", mg.inputs, "annotation JSONL files")->required();
  c_merge->add_option("--annotators", mg.annotators, "annotator ids (default: all seen)");
  c_merge->add_option("--strategy", mg.strategy)->capture_default_str();
  c_merge->add_option("--dimensions", mg.dimensions);
  c_merge->add_option("--before", mg.before, "annotation points before filtering (retention report)");
  c_merge->add_option("--report", mg.report, "JSON merge report");

  BuildPromptsArgs bp;
  auto* c_build = app.add_subcommand("build-prompts", "render prompts from a lexicon");
  c_build->add_option("--lexicon", bp.lexicon, "lexicon JSONL")->required();
  c_build->add_option("--dimensions", bp.dimensions);
  c_build->add_option("--templates", bp.templates, "directory of template .txt files");
  c_build->add_option("--task", bp.task, "ab|annotation")->capture_default_str();
  c_build->add_option("--input-types", bp.input_types)->capture_default_str();
  c_build->add_option("--orders", bp.orders)->capture_default_str();
  c_build->add_option("--language", bp.language, "language for annotation prompts (default: entry language)");
  c_build->add_flag("--all-dimensions", bp.all_dimensions, "ignore per-entry gold dimensions");

  RunArgs re, ra;
  auto add_run = [](CLI::App* c, RunArgs& r) {
    c->add_option("--prompts", r.prompts, "prompt JSONL")->required();
    c->add_option("--endpoint", r.endpoints, "endpoint JSON config")->required();
    c->add_option("--log", r.log, "resume log JSONL")->required();
    c->add_option("--dimensions", r.dimensions);
    c->add_option("--concurrency", r.concurrency)->capture_default_str();
    c->add_option("--max-attempts", r.max_attempts)->capture_default_str();
    c->add_option("--backoff-ms", r.backoff_ms)->capture_default_str();
  };
  auto* c_eval = app.add_subcommand("run-eval", "send prompts to a model endpoint (resumable)");
  add_run(c_eval, re);
  auto* c_ann = app.add_subcommand("run-annotation", "collect annotation labels from several endpoints");
  add_run(c_ann, ra);

  MetricsArgs mt;
  auto* c_metrics = app.add_subcommand("metrics", "accuracy and macro-F1 per evaluation cell");
  c_metrics->add_option("--responses", mt.responses, "response JSONL files")->required();
  c_metrics->add_option("--gold", mt.gold, "gold JSONL")->required();
  c_metrics->add_option("--dimensions", mt.dimensions);
  c_metrics->add_option("--summaries", mt.summaries, "directory for per-scheme summary CSVs");

  CorrelateArgs cr;
  auto* c_corr = app.add_subcommand("correlate", "correlation of two dimension,score tables");
  c_corr->add_option("--human", cr.human)->required();
  c_corr->add_option("--model", cr.model)->required();
  c_corr->add_option("--method", cr.method, "pearson|spearman")->capture_default_str();
  c_corr->add_option("--column", cr.column, "score column name")->capture_default_str();

  std::string adv_cells;
  auto* c_adv = app.add_subcommand("advantage", "audio minus original-text macro-F1 per group and dimension");
  c_adv->add_option("--cells", adv_cells, "cells CSV from `metrics`")->required();

  AttnArgs at;
  auto* c_attn = app.add_subcommand("attn-fraction", "phoneme/feature attention fractions from .afd dumps");
  c_attn->add_option("--dumps", at.dumps, "directory of .afd files")->required();
  c_attn->add_option("--textgrids", at.textgrids, "directory of <word_id>.TextGrid files");
  c_attn->add_option("--mode", at.mode, "head_sum|head_mean")->capture_default_str();
  c_attn->add_option("--order-policy", at.order_policy, "both-required|available")->capture_default_str();
  c_attn->add_flag("--svg", at.svg, "also render heatmap.svg");

  ReportArgs rp;
  auto* c_report = app.add_subcommand("report", "regenerate report CSVs from saved tables");
  c_report->add_option("--tables", rp.tables, "attn-fraction output directory");
  c_report->add_option("--layer-table", rp.layer_table, "wide per-layer CSV to average");
  c_report->add_flag("--svg", rp.svg);

  std::vector<std::string> check_paths;
  auto* c_check = app.add_subcommand("check-dump", "validate .afd files");
  c_check->add_option("files", check_paths)->required();

  std::string sample_input;
  std::size_t sample_n = 0;
  auto* c_sample = app.add_subcommand("sample", "seeded random sample of JSONL lines");
  c_sample->add_option("--input", sample_input)->required();
  c_sample->add_option("--n", sample_n)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("phonosem");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (!g.workdir.empty()) fs::current_path(g.workdir);
    if (*c_gen) cmd_gen_words(g, gw);
    else if (*c_score) cmd_score_dims(g, sd);
    else if (*c_merge) cmd_merge(g, mg);
    else if (*c_build) cmd_build_prompts(g, bp);
    else if (*c_eval) cmd_run_eval(g, re);
    else if (*c_ann) cmd_run_annotation(g, ra);
    else if (*c_metrics) cmd_metrics(g, mt);
    else if (*c_corr) cmd_correlate(g, cr);
    else if (*c_adv) cmd_advantage(g, adv_cells);
    else if (*c_attn) cmd_attn_fraction(g, at);
    else if (*c_report) cmd_report(g, rp);
    else if (*c_check) return cmd_check_dump(g, check_paths);
    else if (*c_sample) cmd_sample(g, sample_input, sample_n);
  } catch (const Error& e) {
    return report_error(e);
  } catch (const nlohmann::json::exception& e) {
    return report_error(Error(ErrorKind::invalid_input, e.what()));
  } catch (const fs::filesystem_error& e) {
    return report_error(Error(ErrorKind::io_error, e.what(), {{"path", e.path1().string()}}));
  }
  return 0;
}
