#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "phonosem/attnfrac/fraction.hpp"
#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/text.hpp"

namespace phonosem::attnfrac {

inline std::string fraction_table_csv(const FractionTable& t) {
  std::string out = io::csv_row({"group", "input_type", "symbol", "dimension", "feature", "layer", "mean_fraction", "n"});
  for (const auto& [k, c] : t.entries)
    out += io::csv_row({k.group, k.input_type, k.symbol, k.dimension_id, k.feature, std::to_string(k.layer),
                        text::format_double(c.mean()), std::to_string(c.count)});
  return out;
}

inline std::string gold_table_csv(const GoldTable& t) {
  std::string out = io::csv_row({"group", "input_type", "symbol", "dimension", "layer", "mean_gold_fraction", "n"});
  for (const auto& [k, c] : t.entries)
    out += io::csv_row({k.group, k.input_type, k.symbol, k.dimension_id, std::to_string(k.layer),
                        text::format_double(c.mean()), std::to_string(c.count)});
  return out;
}

inline std::string heatmap_csv(const std::vector<HeatCell>& cells) {
  std::string out = io::csv_row(
      {"group", "input_type", "symbol", "dimension", "feature", "mean_fraction", "n_layers", "n_samples"});
  for (const auto& c : cells)
    out += io::csv_row({c.group, c.input_type, c.symbol, c.dimension_id, c.feature, text::format_double(c.mean_fraction),
                        std::to_string(c.n_layers), std::to_string(c.n_samples)});
  return out;
}

inline std::string layer_curve_csv(const std::vector<LayerPoint>& pts) {
  std::string out = io::csv_row({"group", "input_type", "layer", "mean_fraction", "n_cells"});
  for (const auto& p : pts)
    out += io::csv_row({p.group, p.input_type, std::to_string(p.layer), text::format_double(p.mean_fraction),
                        std::to_string(p.n_cells)});
  return out;
}

// --- reading tables back (report regeneration) -------------------------------

namespace detail {
inline double cell_double(const std::vector<std::string>& row, std::size_t i, const char* what) {
  auto v = text::parse_double(row.at(i));
  if (!v) throw Error(ErrorKind::invalid_input, std::string("non-numeric ") + what + " '" + row.at(i) + "'");
  return *v;
}
inline std::size_t cell_size(const std::vector<std::string>& row, std::size_t i, const char* what) {
  auto v = text::parse_int<std::size_t>(row.at(i));
  if (!v) throw Error(ErrorKind::invalid_input, std::string("non-integer ") + what + " '" + row.at(i) + "'");
  return *v;
}
}  // namespace detail

/// Inverse of fraction_table_csv (sums are rebuilt from mean × n).
inline FractionTable parse_fraction_table(const io::CsvTable& t) {
  const auto g = t.column("group"), it = t.column("input_type"), s = t.column("symbol"), d = t.column("dimension"),
             f = t.column("feature"), l = t.column("layer"), m = t.column("mean_fraction"), n = t.column("n");
  FractionTable out;
  for (const auto& row : t.rows) {
    MeanCell c;
    c.count = detail::cell_size(row, n, "n");
    c.sum = detail::cell_double(row, m, "mean_fraction") * static_cast<double>(c.count);
    out.entries[{row[g], row[it], row[s], row[d], row[f], detail::cell_size(row, l, "layer")}] = c;
  }
  return out;
}

inline GoldTable parse_gold_table(const io::CsvTable& t) {
  const auto g = t.column("group"), it = t.column("input_type"), s = t.column("symbol"), d = t.column("dimension"),
             l = t.column("layer"), m = t.column("mean_gold_fraction"), n = t.column("n");
  GoldTable out;
  for (const auto& row : t.rows) {
    MeanCell c;
    c.count = detail::cell_size(row, n, "n");
    c.sum = detail::cell_double(row, m, "mean_gold_fraction") * static_cast<double>(c.count);
    out.entries[{row[g], row[it], row[s], row[d], detail::cell_size(row, l, "layer")}] = c;
  }
  return out;
}

// --- per-layer summary tables ----------------------------------------------

/// A wide table: one row per layer, one numeric column per condition
/// (e.g. natural_ipa, constructed_audio).
struct LayerTable {
  std::vector<std::size_t> layers;
  std::vector<std::string> columns;
  std::map<std::string, std::vector<double>> values;
};

inline LayerTable parse_layer_table(const io::CsvTable& t) {
  LayerTable out;
  const auto li = t.column("layer");
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != li) out.columns.push_back(t.header[c]);
  for (const auto& row : t.rows) {
    out.layers.push_back(detail::cell_size(row, li, "layer"));
    for (std::size_t c = 0; c < t.header.size(); ++c)
      if (c != li) out.values[t.header[c]].push_back(detail::cell_double(row, c, t.header[c].c_str()));
  }
  if (out.layers.empty()) throw Error(ErrorKind::invalid_input, "layer table has no rows");
  return out;
}

/// Unweighted mean of each column over layers.
inline std::map<std::string, double> layer_average(const LayerTable& t) {
  std::map<std::string, double> out;
  for (const auto& c : t.columns) {
    const auto& v = t.values.at(c);
    double s = 0;
    for (double x : v) s += x;
    out[c] = s / static_cast<double>(v.size());
  }
  return out;
}

/// Wide layer table built from a computed curve: column "<group>_<input_type>".
inline LayerTable layer_table_from_curve(const std::vector<LayerPoint>& pts) {
  LayerTable out;
  std::set<std::size_t> layers;
  std::set<std::string> cols;
  std::map<std::pair<std::string, std::size_t>, double> v;
  for (const auto& p : pts) {
    const std::string col = p.group + "_" + p.input_type;
    layers.insert(p.layer);
    cols.insert(col);
    v[{col, p.layer}] = p.mean_fraction;
  }
  out.layers.assign(layers.begin(), layers.end());
  out.columns.assign(cols.begin(), cols.end());
  for (const auto& c : out.columns)
    for (auto l : out.layers) {
      auto it = v.find({c, l});
      out.values[c].push_back(it == v.end() ? std::nan("") : it->second);
    }
  return out;
}

inline std::string layer_average_csv(const std::map<std::string, double>& avg) {
  std::string out = io::csv_row({"column", "mean", "rounded_3dp"});
  for (const auto& [c, m] : avg) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", m);
    out += io::csv_row({c, text::format_double(m), buf});
  }
  return out;
}

// --- SVG ----------------------------------------------------------------------

namespace detail {
inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Diverging blue–white–red around 0.5.
inline std::string fraction_colour(double f) {
  const double t = std::clamp((f - 0.5) * 4.0, -1.0, 1.0);
  const int r = t < 0 ? static_cast<int>(std::lround(255 * (1 + t))) : 255;
  const int b = t > 0 ? static_cast<int>(std::lround(255 * (1 - t))) : 255;
  const int g = static_cast<int>(std::lround(255 * (1 - std::fabs(t))));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}
}  // namespace detail

/// Plain rendering of heatmap cells for one (group, input type, dimension):
/// rows are symbols, columns the dimension's two features.
inline std::string heatmap_svg(const std::vector<HeatCell>& cells) {
  std::vector<std::string> rows, cols;
  std::map<std::pair<std::string, std::string>, double> v;
  for (const auto& c : cells) {
    const std::string row = c.group + " " + c.input_type + " " + c.symbol;
    const std::string col = c.dimension_id + ":" + c.feature;
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
    if (std::find(cols.begin(), cols.end(), col) == cols.end()) cols.push_back(col);
    v[{row, col}] = c.mean_fraction;
  }
  const int cell = 28, left = 200, top = 140;
  const int w = left + cell * static_cast<int>(cols.size()) + 10;
  const int h = top + cell * static_cast<int>(rows.size()) + 10;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                    std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const int x = left + static_cast<int>(j) * cell + cell / 2;
    out += "<text transform=\"translate(" + std::to_string(x) + "," + std::to_string(top - 4) +
           ") rotate(-60)\">" + detail::xml_escape(cols[j]) + "</text>\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int y = top + static_cast<int>(i) * cell;
    out += "<text x=\"4\" y=\"" + std::to_string(y + cell * 2 / 3) + "\">" + detail::xml_escape(rows[i]) + "</text>\n";
    for (std::size_t j = 0; j < cols.size(); ++j) {
      auto it = v.find({rows[i], cols[j]});
      if (it == v.end()) continue;
      out += "<rect x=\"" + std::to_string(left + static_cast<int>(j) * cell) + "\" y=\"" + std::to_string(y) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" +
             detail::fraction_colour(it->second) + "\"><title>" + text::format_double(it->second) + "</title></rect>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace phonosem::attnfrac
