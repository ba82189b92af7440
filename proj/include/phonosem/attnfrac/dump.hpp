#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "phonosem/error.hpp"
#include "phonosem/io.hpp"

namespace phonosem::attnfrac {

inline constexpr std::string_view dump_magic = "AFD1";
inline constexpr std::size_t dump_header_size = 8;

struct DumpManifest {
  std::string word_id;
  std::string group;
  std::string language;
  std::string input_type;  ///< "ipa" or "audio"
  std::string dimension_id;
  std::string feature_order;  ///< "normal" or "reversed"
  std::string feature1;       ///< feature presented first
  std::string feature2;
  std::string gold_feature;
  std::string resolved_label;
  std::string ipa;  ///< space-separated symbols of the word
  std::vector<std::string> token_strings;
  std::vector<std::uint32_t> input_token_indices;
  std::vector<std::uint32_t> feature1_token_indices;
  std::vector<std::uint32_t> feature2_token_indices;
  std::optional<double> frame_period_ms;
  std::uint32_t n_layers = 0;
  std::uint32_t n_heads = 0;
  std::uint32_t n_sel = 0;
  std::string attention_kind;

  bool correct() const { return !gold_feature.empty() && resolved_label == gold_feature; }
};

/// Attention weights restricted to the selected tokens, laid out
/// [layer][head][query][key].
struct AttentionDump {
  DumpManifest manifest;
  std::vector<float> tensor;

  std::size_t offset(std::size_t layer, std::size_t head, std::size_t q, std::size_t k) const {
    const std::size_t n = manifest.n_sel;
    return ((layer * manifest.n_heads + head) * n + q) * n + k;
  }
  float at(std::size_t layer, std::size_t head, std::size_t q, std::size_t k) const {
    return tensor[offset(layer, head, q, k)];
  }
  float& at(std::size_t layer, std::size_t head, std::size_t q, std::size_t k) {
    return tensor[offset(layer, head, q, k)];
  }
  std::size_t expected_size() const {
    return std::size_t{manifest.n_layers} * manifest.n_heads * manifest.n_sel * manifest.n_sel;
  }
};

inline nlohmann::ordered_json to_json(const DumpManifest& m) {
  nlohmann::ordered_json j;
  j["word_id"] = m.word_id;
  j["group"] = m.group;
  j["language"] = m.language;
  j["input_type"] = m.input_type;
  j["dimension_id"] = m.dimension_id;
  j["feature_order"] = m.feature_order;
  j["feature1"] = m.feature1;
  j["feature2"] = m.feature2;
  j["gold_feature"] = m.gold_feature;
  j["resolved_label"] = m.resolved_label;
  j["ipa"] = m.ipa;
  j["token_strings"] = m.token_strings;
  j["input_token_indices"] = m.input_token_indices;
  j["feature1_token_indices"] = m.feature1_token_indices;
  j["feature2_token_indices"] = m.feature2_token_indices;
  if (m.frame_period_ms)
    j["frame_period_ms"] = *m.frame_period_ms;
  else
    j["frame_period_ms"] = nullptr;
  j["n_layers"] = m.n_layers;
  j["n_heads"] = m.n_heads;
  j["n_sel"] = m.n_sel;
  j["attention_kind"] = m.attention_kind;
  return j;
}

namespace detail {

[[noreturn]] inline void malformed(const std::string& what, const std::string& source,
                                   nlohmann::json details = nlohmann::json::object()) {
  details["source"] = source;
  throw Error(ErrorKind::malformed_dump, source + ": " + what, std::move(details));
}

template <class T>
T required(const nlohmann::json& j, const char* key, const std::string& source) {
  if (!j.contains(key)) malformed(std::string("manifest lacks field '") + key + "'", source, {{"field", key}});
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    malformed(std::string("manifest field '") + key + "' has the wrong type", source, {{"field", key}});
  }
}

inline void check_index_set(const std::vector<std::uint32_t>& idx, std::uint32_t n_sel, const char* name,
                            const std::string& source) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n_sel)
      malformed(std::string(name) + " index out of range", source, {{"field", name}, {"index", idx[i]}});
    if (i > 0 && idx[i] <= idx[i - 1])
      malformed(std::string(name) + " is not strictly increasing", source, {{"field", name}, {"position", i}});
  }
}

inline std::uint32_t read_u32_le(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

inline void write_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xffu);
}

}  // namespace detail

inline DumpManifest manifest_from_json(const nlohmann::json& j, const std::string& source = "<dump>") {
  using detail::required;
  if (!j.is_object()) detail::malformed("manifest is not a JSON object", source);
  DumpManifest m;
  m.word_id = required<std::string>(j, "word_id", source);
  m.group = j.value("group", "");
  m.language = j.value("language", "");
  m.input_type = required<std::string>(j, "input_type", source);
  m.dimension_id = required<std::string>(j, "dimension_id", source);
  m.feature_order = j.value("feature_order", "normal");
  m.feature1 = j.value("feature1", "");
  m.feature2 = j.value("feature2", "");
  m.gold_feature = required<std::string>(j, "gold_feature", source);
  m.resolved_label = required<std::string>(j, "resolved_label", source);
  m.ipa = j.value("ipa", "");
  m.token_strings = required<std::vector<std::string>>(j, "token_strings", source);
  m.input_token_indices = required<std::vector<std::uint32_t>>(j, "input_token_indices", source);
  m.feature1_token_indices = required<std::vector<std::uint32_t>>(j, "feature1_token_indices", source);
  m.feature2_token_indices = required<std::vector<std::uint32_t>>(j, "feature2_token_indices", source);
  if (j.contains("frame_period_ms") && !j["frame_period_ms"].is_null())
    m.frame_period_ms = required<double>(j, "frame_period_ms", source);
  m.n_layers = required<std::uint32_t>(j, "n_layers", source);
  m.n_heads = required<std::uint32_t>(j, "n_heads", source);
  m.n_sel = required<std::uint32_t>(j, "n_sel", source);
  m.attention_kind = j.value("attention_kind", "");
  return m;
}

/// Structural checks on a manifest (independent of the tensor).
inline void validate_manifest(const DumpManifest& m, const std::string& source = "<dump>") {
  using detail::malformed;
  if (m.input_type != "ipa" && m.input_type != "audio")
    malformed("input_type must be 'ipa' or 'audio'", source, {{"input_type", m.input_type}});
  if (m.feature_order != "normal" && m.feature_order != "reversed")
    malformed("feature_order must be 'normal' or 'reversed'", source, {{"feature_order", m.feature_order}});
  if (m.feature1.empty() || m.feature2.empty() || m.feature1 == m.feature2)
    malformed("feature1 and feature2 must be two distinct non-empty features", source);
  if (m.gold_feature != m.feature1 && m.gold_feature != m.feature2)
    malformed("gold_feature is neither feature1 nor feature2", source, {{"gold_feature", m.gold_feature}});
  if (m.n_layers == 0 || m.n_heads == 0) malformed("n_layers and n_heads must be positive", source);
  detail::check_index_set(m.input_token_indices, m.n_sel, "input_token_indices", source);
  detail::check_index_set(m.feature1_token_indices, m.n_sel, "feature1_token_indices", source);
  detail::check_index_set(m.feature2_token_indices, m.n_sel, "feature2_token_indices", source);
  const std::size_t total =
      m.input_token_indices.size() + m.feature1_token_indices.size() + m.feature2_token_indices.size();
  if (total != m.n_sel)
    malformed("n_sel does not equal the number of selected indices", source, {{"n_sel", m.n_sel}, {"indices", total}});
  std::vector<std::uint32_t> all;
  all.insert(all.end(), m.input_token_indices.begin(), m.input_token_indices.end());
  all.insert(all.end(), m.feature1_token_indices.begin(), m.feature1_token_indices.end());
  all.insert(all.end(), m.feature2_token_indices.begin(), m.feature2_token_indices.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) malformed("index sets are not disjoint", source);
  if (m.token_strings.size() != m.n_sel)
    malformed("token_strings length differs from n_sel", source,
              {{"token_strings", m.token_strings.size()}, {"n_sel", m.n_sel}});
  if (m.input_type == "audio" && (!m.frame_period_ms || !(*m.frame_period_ms > 0)))
    malformed("audio dumps need a positive frame_period_ms", source);
}

inline void validate(const AttentionDump& d, const std::string& source = "<dump>") {
  validate_manifest(d.manifest, source);
  if (d.tensor.size() != d.expected_size())
    detail::malformed("tensor size does not match declared shape", source,
                      {{"values", d.tensor.size()}, {"expected", d.expected_size()}});
  for (std::size_t i = 0; i < d.tensor.size(); ++i)
    if (!std::isfinite(d.tensor[i]) || d.tensor[i] < 0.0f)
      detail::malformed("tensor holds a negative or non-finite weight", source, {{"offset", i}});
}

inline std::string serialize(const AttentionDump& d) {
  static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
  const std::string manifest = to_json(d.manifest).dump();
  std::string out;
  out.reserve(dump_header_size + manifest.size() + d.tensor.size() * 4);
  out += dump_magic;
  detail::write_u32_le(out, static_cast<std::uint32_t>(manifest.size()));
  out += manifest;
  for (float f : d.tensor) detail::write_u32_le(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

/// Decodes and fully validates a dump.
inline AttentionDump parse_dump(std::string_view bytes, const std::string& source = "<dump>") {
  if (bytes.size() < dump_header_size || bytes.substr(0, 4) != dump_magic)
    detail::malformed("missing AFD1 magic", source);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t mlen = detail::read_u32_le(raw + 4);
  if (bytes.size() - dump_header_size < mlen)
    detail::malformed("manifest length exceeds file size", source, {{"manifest_length", mlen}});
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(dump_header_size, mlen));
  } catch (const nlohmann::json::parse_error& e) {
    detail::malformed(std::string("manifest is not valid JSON: ") + e.what(), source);
  }
  AttentionDump d;
  d.manifest = manifest_from_json(j, source);
  const std::size_t body = bytes.size() - dump_header_size - mlen;
  if (body % 4 != 0) detail::malformed("tensor byte count is not a multiple of 4", source, {{"bytes", body}});
  if (body / 4 != d.expected_size())
    detail::malformed("tensor size does not match declared shape", source,
                      {{"values", body / 4}, {"expected", d.expected_size()}});
  d.tensor.resize(body / 4);
  const unsigned char* p = raw + dump_header_size + mlen;
  for (std::size_t i = 0; i < d.tensor.size(); ++i) d.tensor[i] = std::bit_cast<float>(detail::read_u32_le(p + 4 * i));
  validate(d, source);
  return d;
}

inline AttentionDump read_dump(const std::filesystem::path& path) {
  return parse_dump(io::read_file(path), path.string());
}

inline void write_dump(const std::filesystem::path& path, const AttentionDump& d) {
  validate(d, path.string());
  io::write_file_atomic(path, serialize(d));
}

}  // namespace phonosem::attnfrac
