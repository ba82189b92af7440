#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "phonosem/error.hpp"
#include "phonosem/io.hpp"
#include "phonosem/promptkit.hpp"
#include "phonosem/semdim.hpp"

namespace phonosem::runner {

using promptkit::PromptSpec;

struct EndpointConfig {
  std::string base_url;  ///< e.g. http://localhost:8000/v1/chat
  std::string model_name;
  std::string auth_token_env_name;  ///< name of the env var holding a bearer token; empty = none
  double temperature = 0.0;
  int max_tokens = 1024;
  double request_timeout_s = 60.0;
  bool inline_audio = false;  ///< send audio as base64 instead of a path
};

inline EndpointConfig endpoint_from_json(const nlohmann::json& j) {
  EndpointConfig c;
  c.base_url = j.at("base_url").get<std::string>();
  c.model_name = j.at("model").get<std::string>();
  c.auth_token_env_name = j.value("auth_token_env", "");
  c.temperature = j.value("temperature", 0.0);
  c.max_tokens = j.value("max_tokens", 1024);
  c.request_timeout_s = j.value("request_timeout_s", 60.0);
  c.inline_audio = j.value("inline_audio", false);
  return c;
}

struct ResponseRecord {
  std::string prompt_id;
  std::string model;
  std::string word_id;
  std::string group;
  std::string language;
  std::string dimension_id;
  std::string input_type;
  std::string feature_order;
  std::string raw_text;
  std::string resolved_label;  ///< feature name, "neither" or "invalid"
  long long latency_ms = 0;
  int attempt_count = 0;
  std::string error;  ///< empty on success; otherwise an error kind name

  bool ok() const noexcept { return error.empty(); }
};

inline nlohmann::ordered_json to_json(const ResponseRecord& r) {
  nlohmann::ordered_json j;
  j["prompt_id"] = r.prompt_id;
  j["model"] = r.model;
  j["word_id"] = r.word_id;
  j["group"] = r.group;
  j["language"] = r.language;
  j["dimension_id"] = r.dimension_id;
  j["input_type"] = r.input_type;
  j["feature_order"] = r.feature_order;
  j["raw_text"] = r.raw_text;
  j["resolved_label"] = r.resolved_label;
  j["latency_ms"] = r.latency_ms;
  j["attempt_count"] = r.attempt_count;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline ResponseRecord record_from_json(const nlohmann::json& j) {
  ResponseRecord r;
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.model = j.value("model", "");
  r.word_id = j.value("word_id", "");
  r.group = j.value("group", "");
  r.language = j.value("language", "");
  r.dimension_id = j.value("dimension_id", "");
  r.input_type = j.value("input_type", "");
  r.feature_order = j.value("feature_order", "normal");
  r.raw_text = j.value("raw_text", "");
  r.resolved_label = j.value("resolved_label", "invalid");
  r.latency_ms = j.value("latency_ms", 0LL);
  r.attempt_count = j.value("attempt_count", 0);
  r.error = j.value("error", "");
  return r;
}

// ---------------------------------------------------------------------------
// Wire protocol
// ---------------------------------------------------------------------------

/// `{model, temperature, max_tokens, messages:[{role:"user", content:[...]}]}`
inline nlohmann::ordered_json build_request_body(const PromptSpec& spec, const EndpointConfig& cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model_name;
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens;
  auto content = nlohmann::ordered_json::array();
  for (const auto& p : spec.parts) {
    nlohmann::ordered_json part;
    if (p.kind == promptkit::PromptPart::Kind::text) {
      part["type"] = "text";
      part["text"] = p.value;
    } else {
      part["type"] = "audio";
      if (cfg.inline_audio) {
        part["format"] = "wav";
        part["base64"] = httplib::detail::base64_encode(io::read_file(p.value));
      } else {
        part["path"] = p.value;
      }
    }
    content.push_back(std::move(part));
  }
  nlohmann::ordered_json msg;
  msg["role"] = "user";
  msg["content"] = std::move(content);
  body["messages"] = nlohmann::ordered_json::array({std::move(msg)});
  return body;
}

/// Sends one request and returns the model text. Throws Error(endpoint_error)
/// on any transport or protocol failure.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const EndpointConfig& cfg, const nlohmann::ordered_json& body) = 0;
};

class HttpChatTransport final : public ChatTransport {
 public:
  std::string complete(const EndpointConfig& cfg, const nlohmann::ordered_json& body) override {
    auto [origin, path] = split_url(cfg.base_url);
    httplib::Client client(origin);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(cfg.request_timeout_s));
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!cfg.auth_token_env_name.empty()) {
      if (const char* token = std::getenv(cfg.auth_token_env_name.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res)
      throw Error(ErrorKind::endpoint_error, "request to " + cfg.base_url + " failed: " + httplib::to_string(res.error()),
                  {{"url", cfg.base_url}});
    if (res->status != 200)
      throw Error(ErrorKind::endpoint_error, "endpoint returned HTTP " + std::to_string(res->status),
                  {{"url", cfg.base_url}, {"status", res->status}});
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("text") || !j["text"].is_string())
      throw Error(ErrorKind::endpoint_error, "endpoint response lacks a string 'text' field", {{"url", cfg.base_url}});
    return j["text"].get<std::string>();
  }

  /// "http://host:port/a/b" -> {"http://host:port", "/a/b"}
  static std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme = url.find("://");
    auto start = scheme == std::string::npos ? 0 : scheme + 3;
    auto slash = url.find('/', start);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
  }
};

// ---------------------------------------------------------------------------
// Resume log
// ---------------------------------------------------------------------------

/// Append-only JSONL of ResponseRecords. Successful records mark their
/// (prompt_id, model) as done; failed ones are retried on the next run.
class ResumeLog {
 public:
  ResumeLog() = default;

  explicit ResumeLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
      const auto content = io::read_file(path_);
      for (const auto& line : io::split_lines(content)) {
        if (text::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;  // torn tail from an interrupted run
        auto rec = record_from_json(j);
        if (rec.ok()) done_[{rec.prompt_id, rec.model}] = std::move(rec);
      }
      // an interrupted writer may leave the last line unterminated
      if (!content.empty() && content.back() != '\n') {
        std::ofstream(path_, std::ios::app) << '\n';
      }
    }
  }

  std::optional<ResponseRecord> completed(const std::string& prompt_id, const std::string& model) const {
    std::lock_guard lock(mu_);
    auto it = done_.find({prompt_id, model});
    if (it == done_.end()) return std::nullopt;
    return it->second;
  }

  void append(const ResponseRecord& rec) {
    std::lock_guard lock(mu_);
    if (!path_.empty()) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      std::ofstream out(path_, std::ios::app | std::ios::binary);
      if (!out) throw Error(ErrorKind::io_error, "cannot append to " + path_.string());
      out << to_json(rec).dump() << '\n';
      out.flush();
    }
    if (rec.ok()) done_[{rec.prompt_id, rec.model}] = rec;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return done_.size();
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, ResponseRecord> done_;
};

// ---------------------------------------------------------------------------
// Batch execution
// ---------------------------------------------------------------------------

struct RunOptions {
  int concurrency = 4;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  const semdim::DimensionRegistry* registry = &semdim::DimensionRegistry::defaults();
};

struct BatchStats {
  std::size_t requested = 0;  ///< prompts sent to the endpoint this run
  std::size_t resumed = 0;    ///< prompts answered from the log
  std::size_t failed = 0;
};

namespace detail {

inline ResponseRecord execute_one(const PromptSpec& spec, const EndpointConfig& cfg, ChatTransport& transport,
                                  const RunOptions& opt) {
  ResponseRecord rec;
  rec.prompt_id = spec.prompt_id;
  rec.model = cfg.model_name;
  rec.word_id = spec.word_id;
  rec.group = spec.group;
  rec.language = spec.language;
  rec.dimension_id = spec.dimension_id;
  rec.input_type = std::string(promptkit::to_string(spec.input_type));
  rec.feature_order = std::string(promptkit::to_string(spec.feature_order));
  rec.resolved_label = std::string(semdim::label_invalid);

  for (const auto& p : spec.parts) {
    if (p.kind == promptkit::PromptPart::Kind::audio && !std::filesystem::exists(p.value)) {
      rec.error = std::string(kind_name(ErrorKind::audio_missing));
      rec.raw_text = p.value;
      return rec;
    }
  }
  const auto body = build_request_body(spec, cfg);
  auto backoff = opt.initial_backoff;
  for (int attempt = 1; attempt <= std::max(1, opt.max_attempts); ++attempt) {
    rec.attempt_count = attempt;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.raw_text = transport.complete(cfg, body);
      rec.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
      rec.error.clear();
      const auto parsed = promptkit::parse_response(rec.raw_text, spec.n_options);
      const auto& dim = opt.registry->at(spec.dimension_id);
      rec.resolved_label = promptkit::label_of(promptkit::resolve_choice(parsed, spec.feature_order), dim);
      return rec;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::endpoint_error) throw;
      rec.error = std::string(kind_name(e.kind()));
      rec.raw_text = e.what();
    }
    if (attempt < opt.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  return rec;
}

}  // namespace detail

/// One record per prompt, in input order. Prompts already completed in `log`
/// are not re-sent; new records are appended to `log` as they finish.
inline std::vector<ResponseRecord> run_batch(std::span<const PromptSpec> prompts, const EndpointConfig& cfg,
                                             ChatTransport& transport, ResumeLog& log, const RunOptions& opt = {},
                                             BatchStats* stats = nullptr) {
  std::vector<ResponseRecord> out(prompts.size());
  std::vector<std::size_t> todo;
  BatchStats local;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (auto done = log.completed(prompts[i].prompt_id, cfg.model_name)) {
      out[i] = std::move(*done);
      ++local.resumed;
    } else {
      todo.push_back(i);
    }
  }
  local.requested = todo.size();

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      const std::size_t i = todo[k];
      try {
        out[i] = detail::execute_one(prompts[i], cfg, transport, opt);
        log.append(out[i]);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        next = todo.size();
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp(opt.concurrency, 1, 64));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, todo.size()); ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  for (std::size_t i : todo) local.failed += !out[i].ok();
  if (stats) *stats = local;
  return out;
}

/// One AnnotationRecord per (prompt × endpoint), prompt-major; the annotator
/// id is the endpoint's model name. Failed requests yield label "invalid".
inline std::vector<semdim::AnnotationRecord> run_annotation(std::span<const PromptSpec> prompts,
                                                            std::span<const EndpointConfig> cfgs,
                                                            ChatTransport& transport, ResumeLog& log,
                                                            const RunOptions& opt = {}) {
  if (cfgs.empty()) throw Error(ErrorKind::invalid_input, "run_annotation needs at least one endpoint");
  std::vector<std::vector<ResponseRecord>> per_endpoint;
  for (const auto& cfg : cfgs) per_endpoint.push_back(run_batch(prompts, cfg, transport, log, opt));
  std::vector<semdim::AnnotationRecord> out;
  out.reserve(prompts.size() * cfgs.size());
  for (std::size_t i = 0; i < prompts.size(); ++i)
    for (std::size_t e = 0; e < cfgs.size(); ++e) {
      const auto& r = per_endpoint[e][i];
      out.push_back({r.word_id, r.dimension_id, cfgs[e].model_name,
                     r.ok() ? r.resolved_label : std::string(semdim::label_invalid)});
    }
  return out;
}

}  // namespace phonosem::runner
