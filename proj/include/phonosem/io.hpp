#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phonosem/error.hpp"
#include "phonosem/text.hpp"

namespace phonosem::io {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string(), {{"path", path.string()}});
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Write-temp-then-rename so readers never observe a partial file.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io_error, "cannot write " + tmp.string(), {{"path", tmp.string()}});
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::io_error, "write failed for " + tmp.string(), {{"path", tmp.string()}});
  }
  fs::rename(tmp, path);
}

/// Lines with the trailing '\r' removed; a final newline does not produce an
/// extra empty line. A leading UTF-8 BOM is dropped.
inline std::vector<std::string> split_lines(std::string_view content) {
  if (content.substr(0, 3) == "\xEF\xBB\xBF") content.remove_prefix(3);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    auto nl = content.find('\n', start);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

/// True for lines a rule/table parser should skip.
inline bool is_blank_or_comment(std::string_view line) {
  auto t = text::trim(line);
  return t.empty() || t.front() == '#';
}

inline std::vector<nlohmann::json> parse_jsonl(std::string_view content, const std::string& source = "<input>") {
  std::vector<nlohmann::json> out;
  const auto lines = split_lines(content);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    auto j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorKind::invalid_input, source + ":" + std::to_string(i + 1) + ": invalid JSON",
                  {{"source", source}, {"line", i + 1}});
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  return parse_jsonl(read_file(path), path.string());
}

template <class Json>
std::string to_jsonl(const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    out += '\n';
  }
  return out;
}

// --- CSV (RFC 4180 subset: comma separator, double-quote escaping) ---------

inline std::string csv_field(std::string_view v) {
  bool quote = v.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!quote) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  out += '\n';
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by header name; throws when absent.
  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw Error(ErrorKind::invalid_input, "missing CSV column '" + std::string(name) + "'",
                {{"column", std::string(name)}});
  }
  bool has_column(std::string_view name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

inline std::vector<std::vector<std::string>> parse_csv_records(std::string_view content, const std::string& source) {
  if (content.substr(0, 3) == "\xEF\xBB\xBF") content.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool in_quotes = false, field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    rec.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    bool blank = rec.size() == 1 && rec[0].empty();
    if (!blank) records.push_back(std::move(rec));
    rec.clear();
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
      ++line;
    } else if (c == '\r') {
      // handled with the following '\n'
    } else {
      field += c;
      field_started = true;
    }
  }
  if (in_quotes)
    throw Error(ErrorKind::invalid_input, source + ": unterminated quoted field", {{"source", source}, {"line", line}});
  if (field_started || !rec.empty()) end_record();
  return records;
}

inline CsvTable parse_csv(std::string_view content, const std::string& source = "<input>") {
  CsvTable t;
  auto records = parse_csv_records(content, source);
  if (records.empty()) return t;
  t.header = std::move(records.front());
  for (auto& h : t.header) h = std::string(text::trim(h));
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size())
      throw Error(ErrorKind::invalid_input,
                  source + ": row " + std::to_string(i + 1) + " has " + std::to_string(records[i].size()) +
                      " fields, expected " + std::to_string(t.header.size()),
                  {{"source", source}, {"row", i + 1}});
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

inline CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

}  // namespace phonosem::io
