// Acceptance checks. Each criterion prints one PASS/FAIL line; the exit code is
// non-zero if any selected criterion fails.
//
//   phonosem_acceptance                    run every criterion
//   phonosem_acceptance --criterion NAME   run one
//   phonosem_acceptance --list

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_pipeline.hpp"
#include "oracles.hpp"
#include "phonosem/attnfrac/align.hpp"
#include "phonosem/attnfrac/fraction.hpp"
#include "phonosem/attnfrac/report.hpp"
#include "phonosem/attnfrac/textgrid.hpp"
#include "phonosem/io.hpp"
#include "phonosem/metrics.hpp"
#include "phonosem/phonology.hpp"
#include "phonosem/semdim.hpp"
#include "phonosem/wordgen.hpp"
#include "synthetic.hpp"

using namespace phonosem;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures = PHONOSEM_FIXTURE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed sub-checks; the first few end up in the detail line.
struct Checker {
  std::vector<std::string> failures;
  std::size_t checks = 0;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream os;
    os.precision(12);
    os << what << ": got " << got << ", want " << want << " ±" << tol;
    expect(std::abs(got - want) <= tol, os.str());
  }

  Outcome outcome(const std::string& summary) const {
    if (failures.empty()) return {true, summary};
    std::string d = std::to_string(failures.size()) + " of " + std::to_string(checks) + " checks failed: ";
    for (std::size_t i = 0; i < failures.size() && i < 3; ++i) d += (i ? "; " : "") + failures[i];
    return {false, d};
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// --- combinatorics -------------------------------------------------------------

Outcome combinatorics() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  const auto all = wordgen::generate_candidates(phonology::PhonemeInventory::defaults());
  c.expect(all.size() == 3600, "default inventory gives " + std::to_string(all.size()) + " candidates");

  const std::vector<std::string> consonants{"l", "m", "n", "v", "ð", "z", "f", "s", "ʃ", "p", "t", "k", "b", "d", "g"};
  const std::vector<std::string> ccats{"sonorant", "voiced_fricative", "voiceless_fricative", "voiceless_stop",
                                       "voiced_stop"};
  const std::vector<std::string> vowels{"i", "ej", "ɑ", "ow", "u", "e"};
  std::mt19937_64 rng(3600);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> cs = consonants, vs = vowels;
    std::shuffle(cs.begin(), cs.end(), rng);
    std::shuffle(vs.begin(), vs.end(), rng);
    cs.resize(1 + rng() % 6);
    vs.resize(1 + rng() % 3);
    std::string tsv;
    for (const auto& s : cs) tsv += s + "\t" + ccats[rng() % ccats.size()] + "\n";
    for (const auto& s : vs) tsv += s + "\t" + (rng() % 2 ? "front_vowel" : "back_vowel") + "\n";
    const auto inv = phonology::PhonemeInventory::parse(tsv);
    const auto cands = wordgen::generate_candidates(inv);
    const std::size_t nc = cs.size(), nv = vs.size();
    c.expect(cands.size() == nc * nc * nv * nv, "trial " + std::to_string(trial) + ": |C|²|V|² candidates");

    // excluded: a random share of the candidates plus strings that are not candidates
    std::vector<std::string> dict;
    std::set<std::string> excluded;
    for (const auto& w : cands)
      if (rng() % 4 == 0) {
        dict.push_back(w.ipa_string());
        excluded.insert(w.ipa_string());
      }
    dict.push_back("xyz");
    const auto index = wordgen::build_exclusion_index(dict, phonology::NormalizationRules::defaults());
    const auto r = wordgen::filter_candidates(cands, index);

    c.expect(r.kept.size() + r.removed.size() == cands.size(), "trial " + std::to_string(trial) + ": sizes add up");
    std::set<std::string> kept_ids, removed_ids;
    for (const auto& w : r.kept) kept_ids.insert(w.id);
    for (const auto& w : r.removed) removed_ids.insert(w.word.id);
    std::vector<std::string> both;
    std::set_intersection(kept_ids.begin(), kept_ids.end(), removed_ids.begin(), removed_ids.end(),
                          std::back_inserter(both));
    c.expect(both.empty(), "trial " + std::to_string(trial) + ": kept and removed overlap");
    for (const auto& w : r.kept) c.expect(!excluded.contains(w.ipa_string()), "kept an excluded word " + w.id);
    for (const auto& w : r.removed)
      c.expect(excluded.contains(w.word.ipa_string()), "removed a word not excluded " + w.word.id);
    // kept preserves candidate order
    std::vector<std::string> expected_kept;
    for (const auto& w : cands)
      if (!excluded.contains(w.ipa_string())) expected_kept.push_back(w.id);
    std::vector<std::string> got_kept;
    for (const auto& w : r.kept) got_kept.push_back(w.id);
    c.expect(got_kept == expected_kept, "trial " + std::to_string(trial) + ": kept order");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 1.0, "took " + fmt(secs) + " s (limit 1 s)");
  return c.outcome("3600 candidates; partition holds on 200 random inventories; " + fmt(secs) + " s");
}

// --- metric oracle ----------------------------------------------------------------

Outcome metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  std::mt19937_64 rng(1000);
  double worst = 0;
  int f1_runs = 0;
  while (f1_runs < 1000) {
    const std::size_t n = 1 + rng() % 80;
    std::vector<metrics::Pole> gold;
    std::vector<std::optional<metrics::Pole>> pred;
    std::vector<int> og, op;
    for (std::size_t i = 0; i < n; ++i) {
      const int g = static_cast<int>(rng() % 2);
      const int p = rng() % 8 == 0 ? -1 : static_cast<int>(rng() % 2);
      og.push_back(g);
      op.push_back(p);
      gold.push_back(g == 0 ? metrics::Pole::a : metrics::Pole::b);
      pred.push_back(p < 0 ? std::nullopt : std::optional(p == 0 ? metrics::Pole::a : metrics::Pole::b));
    }
    if (std::all_of(op.begin(), op.end(), [](int p) { return p < 0; })) continue;
    ++f1_runs;
    const auto got = metrics::macro_f1(gold, pred);
    const auto want = oracle::macro_f1(og, op);
    worst = std::max({worst, std::abs(got.macro_f1 - want.macro), std::abs(got.accuracy - want.accuracy)});
    c.near(got.macro_f1, want.macro, 1e-9, "macro-F1");
    c.near(got.accuracy, want.accuracy, 1e-9, "accuracy");
  }

  std::normal_distribution<double> z(0, 1);
  int corr_runs = 0;
  while (corr_runs < 1000) {
    const std::size_t len = 3 + rng() % 30;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < len; ++i) {
      x.push_back(std::round(z(rng) * 4) / 4);  // coarse values give ties
      y.push_back(0.4 * x.back() + z(rng));
    }
    const auto rx = oracle::ranks(x);
    if (std::all_of(rx.begin(), rx.end(), [&](double r) { return r == rx.front(); })) continue;
    ++corr_runs;
    const double p = metrics::pearson(x, y), s = metrics::spearman(x, y);
    const double po = oracle::pearson(x, y), so = oracle::spearman(x, y);
    worst = std::max({worst, std::abs(p - po), std::abs(s - so)});
    c.near(p, po, 1e-9, "pearson");
    c.near(s, so, 1e-9, "spearman");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 60, "took " + fmt(secs) + " s (limit 60 s)");
  std::ostringstream d;
  d << "1000 instances each of macro-F1/accuracy and Pearson/Spearman; max |Δ| " << worst << "; " << fmt(secs)
    << " s";
  return c.outcome(d.str());
}

// --- layer table -------------------------------------------------------------------

Outcome layer_table() {
  Checker c;
  const auto table = attnfrac::parse_layer_table(io::read_csv(fixtures / "layer_table.csv"));
  const auto avg = attnfrac::layer_average(table);
  const std::map<std::string, double> means{
      {"natural_ipa", 0.5073}, {"natural_audio", 0.5009}, {"constructed_ipa", 0.5226}, {"constructed_audio", 0.5053}};
  // values quoted in the running text, to three decimals
  const std::map<std::string, std::string> prose{
      {"natural_ipa", "0.507"}, {"natural_audio", "0.501"}, {"constructed_ipa", "0.523"}, {"constructed_audio", "0.506"}};
  c.expect(table.layers.size() == 28, "expected 28 layers, got " + std::to_string(table.layers.size()));
  for (const auto& [col, want] : means) c.near(avg.at(col), want, 1e-4, col + " mean");

  // rounding as written by `phonosem report --layer-table`
  const auto csv = io::parse_csv(attnfrac::layer_average_csv(avg));
  const auto ci = csv.column("column"), ri = csv.column("rounded_3dp");
  std::string rounded;
  for (const auto& row : csv.rows) {
    rounded += (rounded.empty() ? "" : ", ") + row[ci] + "=" + row[ri];
    c.expect(row[ri] == prose.at(row[ci]), row[ci] + " rounds to " + row[ri] + ", text says " + prose.at(row[ci]));
  }
  return c.outcome("column means within 1e-4; rounded " + rounded);
}

// --- attention fractions --------------------------------------------------------------

double fraction_at(const attnfrac::FractionOutcome& o, std::size_t span, std::size_t layer) {
  for (const auto& r : o.rows)
    if (r.span == span && r.layer == layer) return r.fraction1;
  return NAN;
}

Outcome attention_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker c;
  using attnfrac::HeadMode;

  const auto planted = synthetic::planted();
  const auto spans = attnfrac::align_text_spans(planted.manifest);
  const auto sum = attnfrac::fraction_scores(planted, spans, HeadMode::head_sum);
  const auto mean = attnfrac::fraction_scores(planted, spans, HeadMode::head_mean);
  // hand-computed from the planted weights
  const double want_sum[2][2] = {{0.5 / 0.6, 0.3}, {0.75, 0.75}};
  const double want_mean[2][2] = {{0.875, (0.25 + 1.0 / 3.0) / 2}, {0.75, 0.75}};
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t s = 0; s < 2; ++s) {
      const std::string at = " layer " + std::to_string(l) + " span " + std::to_string(s);
      c.near(fraction_at(sum, s, l), want_sum[l][s], 1e-6, "head_sum" + at);
      c.near(fraction_at(mean, s, l), want_mean[l][s], 1e-6, "head_mean" + at);
    }

  std::mt19937_64 rng(500);
  for (int trial = 0; trial < 500; ++trial) {
    const std::string t = "dump " + std::to_string(trial);
    auto d = synthetic::random_dump(rng);
    const auto sp = attnfrac::align_text_spans(d.manifest);
    const auto base = attnfrac::fraction_scores(d, sp, HeadMode::head_sum);
    const auto base_mean = attnfrac::fraction_scores(d, sp, HeadMode::head_mean);
    c.expect(base.rows.size() == sp.size() * d.manifest.n_layers, t + ": row count");

    // pair closure, both per row and after aggregation
    for (const auto& r : base.rows) c.near(r.fraction1 + r.fraction2(), 1.0, 1e-9, t + ": pair closure");
    auto analysis = attnfrac::analyze_dump(d, nullptr);
    auto table = attnfrac::aggregate_fractions(
        attnfrac::combine_samples(analysis.samples, attnfrac::OrderPolicy::available).samples);
    std::map<std::tuple<std::string, std::size_t>, double> pair_sum;
    for (const auto& [k, v] : table.entries) pair_sum[{k.symbol, k.layer}] += v.mean();
    for (const auto& [k, v] : pair_sum) c.near(v, 1.0, 1e-9, t + ": aggregated pair closure");

    // head permutation
    std::vector<std::size_t> perm(d.manifest.n_heads);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto p = d;
    const auto& m = d.manifest;
    for (std::size_t l = 0; l < m.n_layers; ++l)
      for (std::size_t h = 0; h < m.n_heads; ++h)
        for (std::size_t q = 0; q < m.n_sel; ++q)
          for (std::size_t k = 0; k < m.n_sel; ++k) p.at(l, perm[h], q, k) = d.at(l, h, q, k);
    const auto ps = attnfrac::fraction_scores(p, sp, HeadMode::head_sum);
    const auto pm = attnfrac::fraction_scores(p, sp, HeadMode::head_mean);
    for (std::size_t i = 0; i < base.rows.size(); ++i) {
      c.expect(ps.rows[i].fraction1 == base.rows[i].fraction1, t + ": head permutation changed head_sum");
      c.near(pm.rows[i].fraction1, base_mean.rows[i].fraction1, 1e-12, t + ": head permutation head_mean");
    }

    // scale invariance: powers of two are exact in float, other factors to 1e-6
    for (float factor : {0.5f, 4.0f, 3.0f}) {
      auto s = d;
      for (auto& v : s.tensor) v *= factor;
      const auto ss = attnfrac::fraction_scores(s, sp, HeadMode::head_sum);
      for (std::size_t i = 0; i < base.rows.size(); ++i) {
        if (factor == 3.0f)
          c.near(ss.rows[i].fraction1, base.rows[i].fraction1, 1e-6, t + ": scale by 3");
        else
          c.expect(ss.rows[i].fraction1 == base.rows[i].fraction1, t + ": scale by " + fmt(factor, 1) + " not exact");
      }
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 30, "took " + fmt(secs) + " s (limit 30 s)");
  return c.outcome("planted 2x2 dump matches hand values; closure, head permutation and scale invariance on 500 "
                   "random dumps; " +
                   fmt(secs) + " s");
}

// --- TextGrid frames -----------------------------------------------------------------

std::string show(const attnfrac::FrameLabels& f) {
  std::string s;
  for (const auto& x : f) s += (s.empty() ? "" : " ") + (x ? *x : std::string("∅"));
  return s;
}

Outcome textgrid_frames() {
  Checker c;
  const auto whizz = attnfrac::read_textgrid(fixtures / "whizz.TextGrid");
  const auto f = attnfrac::frames_from_textgrid(whizz, 40);
  // interval bounds 0–0.1 w, 0.1–0.24 ɪ, 0.24–0.4 z; frame k is centred on (k + ½)·40 ms,
  // and frame 2's centre (100 ms) sits on the w|ɪ boundary, so it goes to ɪ
  const std::string want = "w w ɪ ɪ ɪ ɪ z z z z";
  c.expect(show(f) == want, "whizz frames '" + show(f) + "' != '" + want + "'");
  for (const char* name : {"whizz_short.TextGrid", "whizz_utf16.TextGrid", "whizz_utf16be.TextGrid"})
    c.expect(show(attnfrac::frames_from_textgrid(attnfrac::read_textgrid(fixtures / name), 40)) == want,
             std::string(name) + " frames differ");
  const auto padded = attnfrac::frames_from_textgrid(attnfrac::read_textgrid(fixtures / "padded.TextGrid"), 40);
  const std::string want_padded = "∅ b b ∅ ∅ b ∅ ∅";
  c.expect(show(padded) == want_padded, "padded frames '" + show(padded) + "' != '" + want_padded + "'");
  return c.outcome("whizz: " + show(f) + "; padded: " + show(padded));
}

// --- romanization ------------------------------------------------------------------------

Outcome romanization_goldens() {
  Checker c;
  const std::vector<std::pair<std::vector<std::string>, std::string>> cases{
      {{"l", "ɑ", "m", "ow"}, "lah-mo"},
      {{"l", "ej", "ð", "i"}, "laythey"},
      {{"ð", "ow", "m", "ɑ"}, "though-mah"},
      {{"ð", "i", "l", "ɑ"}, "thee-lah"},
      {{"ð", "ow", "ð", "i"}, "thoughthey"},
  };
  std::string shown;
  for (const auto& [syms, want] : cases) {
    const auto got = phonology::romanize(syms, phonology::RomanizationRules::defaults());
    c.expect(got == want, "romanized '" + got + "', want '" + want + "'");
    shown += (shown.empty() ? "" : ", ") + got;
  }
  return c.outcome(shown);
}

// --- unanimity merge ------------------------------------------------------------------

Outcome unanimity_merge() {
  Checker c;
  std::vector<semdim::AnnotationRecord> recs;
  const auto& reg = semdim::DimensionRegistry::defaults();
  for (const auto& j : io::read_jsonl(fixtures / "annotations_4.jsonl")) {
    recs.push_back(semdim::annotation_from_json(j));
    semdim::validate_annotation(recs.back(), reg);
  }
  const auto merged = semdim::merge_unanimous(recs, {"m1", "m2", "m3", "m4"});
  std::vector<semdim::GoldRow> want;
  for (const auto& j : io::read_jsonl(fixtures / "annotations_4_gold.jsonl")) want.push_back(semdim::gold_from_json(j));
  auto got = merged.gold;
  auto key = [](const semdim::GoldRow& g) { return std::tie(g.word_id, g.dimension_id, g.feature); };
  std::sort(got.begin(), got.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::sort(want.begin(), want.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  c.expect(got == want, std::to_string(got.size()) + " gold rows vs " + std::to_string(want.size()) + " hand-filtered");

  const auto t = io::read_csv(fixtures / "retention.csv");
  const auto& row = t.rows.at(0);
  const auto words = std::stoul(row[t.column("natural_words")]);
  const auto dims = std::stoul(row[t.column("dimensions")]);
  const auto kept = std::stoul(row[t.column("kept")]);
  const auto report = semdim::filter_stats(words * dims, kept);
  c.expect(report.filtered_percent() == "67.0", "filtered " + report.filtered_percent() + "%, want 67.0%");
  return c.outcome(std::to_string(got.size()) + " of " + std::to_string(merged.stats.cells) +
                   " cells survive, matching the hand-filtered set; filtered " + report.filtered_percent() + "% of " +
                   std::to_string(words * dims) + " points");
}

// --- CLI determinism ---------------------------------------------------------------------

Outcome cli_determinism() {
  Checker c;
  const fs::path root = fs::temp_directory_path() / ("phonosem_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  clipipe::FakeEndpoint endpoint;
  clipipe::write_inputs(root / "in", fixtures, endpoint.port());
  const auto a = clipipe::run_pipeline(PHONOSEM_CLI_PATH, root / "in", root / "a");
  const fs::path a_dir = root / "a";
  const auto b = clipipe::run_pipeline(PHONOSEM_CLI_PATH, root / "in", root / "b", &a_dir);
  for (const auto& f : a.failures) c.expect(false, "first run: " + f);
  for (const auto& f : b.failures) c.expect(false, "second run: " + f);

  const auto cmds = clipipe::commands(root / "in");
  std::set<std::string> names;
  for (const auto& cmd : cmds) names.insert(cmd.name);
  const auto files = clipipe::output_files(a_dir, cmds);
  for (const auto& d : clipipe::compare_runs(a_dir, root / "b", cmds)) c.expect(false, d.file + ": " + d.why);

  // network commands from an empty resume log: everything but the measured latency agrees
  const auto fresh = root / "c";
  fs::create_directories(fresh);
  const int rc = clipipe::run_cli(PHONOSEM_CLI_PATH, fresh,
                                  {"-o", "responses.jsonl", "run-eval", "--prompts", (a_dir / "prompts.jsonl").string(),
                                   "--endpoint", (root / "in" / "endpoint_m1.json").string(), "--log", "log.jsonl"},
                                  fresh / "stderr.log");
  c.expect(rc == 0, "fresh run-eval exited " + std::to_string(rc));
  if (rc == 0)
    c.expect(clipipe::without_latency(fresh / "responses.jsonl") == clipipe::without_latency(a_dir / "responses.jsonl"),
             "fresh run-eval answers differ");

  const auto out = c.outcome(std::to_string(names.size()) + " subcommands, " + std::to_string(files.size()) +
                             " output files byte-identical across runs");
  if (out.pass) fs::remove_all(root);
  return out;
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
    {"combinatorics", combinatorics},
    {"metric-oracle", metric_oracle},
    {"layer-table", layer_table},
    {"attention-fraction", attention_end_to_end},
    {"textgrid-frames", textgrid_frames},
    {"romanization", romanization_goldens},
    {"unanimity-merge", unanimity_merge},
    {"cli-determinism", cli_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string only;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--list") {
      for (const auto& [name, fn] : criteria) std::cout << name << "\n";
      return 0;
    }
    if (args[i] == "--criterion" && i + 1 < args.size()) {
      only = args[++i];
    } else {
      std::cerr << "usage: phonosem_acceptance [--list] [--criterion NAME]\n";
      return 2;
    }
  }
  if (!only.empty() &&
      std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == only; })) {
    std::cerr << "unknown criterion '" << only << "'\n";
    return 2;
  }

  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && name != only) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
