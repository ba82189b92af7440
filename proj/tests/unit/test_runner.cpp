#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>
#include <httplib.h>

#include "phonosem/io.hpp"
#include "phonosem/runner.hpp"

using namespace phonosem;
using namespace phonosem::runner;
namespace fs = std::filesystem;

namespace {

/// Answers "1" for every prompt unless told to fail the first N calls.
class FakeTransport : public ChatTransport {
 public:
  explicit FakeTransport(int fail_first = 0, std::string answer = "1") : fail_first_(fail_first), answer_(std::move(answer)) {}

  std::string complete(const EndpointConfig& cfg, const nlohmann::ordered_json& body) override {
    const int n = ++calls;
    {
      std::lock_guard lock(mu);
      bodies.push_back(body);
      models.push_back(cfg.model_name);
    }
    if (n <= fail_first_) throw Error(ErrorKind::endpoint_error, "simulated outage");
    return answer_;
  }

  std::atomic<int> calls{0};
  std::mutex mu;
  std::vector<nlohmann::ordered_json> bodies;
  std::vector<std::string> models;

 private:
  int fail_first_;
  std::string answer_;
};

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("phonosem_runner_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<PromptSpec> sample_prompts(std::size_t n, promptkit::FeatureOrder order = promptkit::FeatureOrder::normal) {
  std::vector<PromptSpec> out;
  const auto& dim = semdim::DimensionRegistry::defaults().at("fast-slow");
  for (std::size_t i = 0; i < n; ++i) {
    promptkit::LexiconEntry e;
    e.id = "w" + std::to_string(i);
    e.word = e.id;
    e.language = "en";
    e.group = "natural";
    out.push_back(promptkit::build_ab_prompt(e, dim, promptkit::InputType::original, order));
  }
  return out;
}

RunOptions fast_options() {
  RunOptions o;
  o.initial_backoff = std::chrono::milliseconds(1);
  return o;
}

EndpointConfig model(const std::string& name) {
  EndpointConfig c;
  c.base_url = "http://127.0.0.1:1/v1/chat";
  c.model_name = name;
  return c;
}

}  // namespace

TEST(RequestBody, WireShape) {
  promptkit::LexiconEntry e;
  e.id = "boom";
  e.ipa = "b u m";
  e.audio = "boom.wav";
  auto spec = promptkit::build_ab_prompt(e, semdim::DimensionRegistry::defaults().at("exciting-calming"),
                                         promptkit::InputType::ipa_plus_audio, promptkit::FeatureOrder::normal);
  auto cfg = model("m");
  auto body = build_request_body(spec, cfg);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["temperature"], 0.0);
  EXPECT_EQ(body["max_tokens"], 1024);
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["messages"][0]["role"], "user");
  const auto& content = body["messages"][0]["content"];
  ASSERT_EQ(content.size(), 3u);
  EXPECT_EQ(content[0]["type"], "text");
  EXPECT_EQ(content[1]["type"], "audio");
  EXPECT_EQ(content[1]["path"], "boom.wav");
}

TEST(RequestBody, InlineAudioIsBase64) {
  TempDir tmp;
  const auto wav = (tmp.path / "a.wav").string();
  io::write_file_atomic(wav, "RIFF");
  PromptSpec spec;
  spec.parts = {{promptkit::PromptPart::Kind::audio, wav}};
  auto cfg = model("m");
  cfg.inline_audio = true;
  auto body = build_request_body(spec, cfg);
  EXPECT_EQ(body["messages"][0]["content"][0]["base64"], "UklGRg==");
  EXPECT_EQ(body["messages"][0]["content"][0]["format"], "wav");
}

TEST(RunBatch, ResolvesLabelsInInputOrder) {
  auto prompts = sample_prompts(20, promptkit::FeatureOrder::reversed);
  FakeTransport t;
  ResumeLog log;
  auto opt = fast_options();
  opt.concurrency = 8;
  auto recs = run_batch(prompts, model("m"), t, log, opt);
  ASSERT_EQ(recs.size(), 20u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].prompt_id, prompts[i].prompt_id);
    EXPECT_EQ(recs[i].resolved_label, "slow");  // option 1 of a reversed prompt
    EXPECT_EQ(recs[i].attempt_count, 1);
  }
}

TEST(RunBatch, InvalidAnswerIsRecordedNotRetried) {
  auto prompts = sample_prompts(1);
  FakeTransport t(0, "I think fast");
  ResumeLog log;
  auto r = run_batch(prompts, model("m"), t, log, fast_options());
  EXPECT_TRUE(r[0].ok());
  EXPECT_EQ(r[0].resolved_label, "invalid");
  EXPECT_EQ(r[0].raw_text, "I think fast");
  EXPECT_EQ(t.calls, 1);
}

TEST(RunBatch, RetriesWithBackoff) {
  auto prompts = sample_prompts(1);
  FakeTransport t(2);
  ResumeLog log;
  auto r = run_batch(prompts, model("m"), t, log, fast_options());
  EXPECT_TRUE(r[0].ok());
  EXPECT_EQ(r[0].attempt_count, 3);
  EXPECT_EQ(r[0].resolved_label, "fast");
}

TEST(RunBatch, GivesUpAfterMaxAttempts) {
  auto prompts = sample_prompts(1);
  FakeTransport t(100);
  ResumeLog log;
  BatchStats stats;
  auto r = run_batch(prompts, model("m"), t, log, fast_options(), &stats);
  EXPECT_FALSE(r[0].ok());
  EXPECT_EQ(r[0].error, "EndpointError");
  EXPECT_EQ(r[0].attempt_count, 3);
  EXPECT_EQ(r[0].resolved_label, "invalid");
  EXPECT_EQ(stats.failed, 1u);
}

TEST(RunBatch, MissingAudioIsNotSent) {
  PromptSpec spec;
  spec.prompt_id = "p";
  spec.dimension_id = "fast-slow";
  spec.parts = {{promptkit::PromptPart::Kind::audio, "/nonexistent/x.wav"}};
  FakeTransport t;
  ResumeLog log;
  auto r = run_batch(std::vector<PromptSpec>{spec}, model("m"), t, log, fast_options());
  EXPECT_EQ(r[0].error, "AudioMissing");
  EXPECT_EQ(t.calls, 0);
}

TEST(ResumeLog, SecondRunSendsNothing) {
  TempDir tmp;
  const auto path = tmp.path / "log.jsonl";
  auto prompts = sample_prompts(10);
  {
    FakeTransport t;
    ResumeLog log(path);
    run_batch(prompts, model("m"), t, log, fast_options());
    EXPECT_EQ(t.calls, 10);
  }
  FakeTransport t;
  ResumeLog log(path);
  BatchStats stats;
  auto r = run_batch(prompts, model("m"), t, log, fast_options(), &stats);
  EXPECT_EQ(t.calls, 0);
  EXPECT_EQ(stats.resumed, 10u);
  EXPECT_EQ(r[3].resolved_label, "fast");
  // a different model is a different key
  FakeTransport t2;
  run_batch(prompts, model("other"), t2, log, fast_options());
  EXPECT_EQ(t2.calls, 10);
}

TEST(ResumeLog, FailedRecordsAreRetriedAndTornTailIgnored) {
  TempDir tmp;
  const auto path = tmp.path / "log.jsonl";
  auto prompts = sample_prompts(3);
  {
    FakeTransport t(100);
    ResumeLog log(path);
    run_batch(prompts, model("m"), t, log, fast_options());
  }
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"prompt_id":"ab|w0|fast-slow|original|normal","model":"m","resolved_)";  // torn write
  }
  FakeTransport t;
  ResumeLog log(path);
  EXPECT_EQ(log.size(), 0u);
  run_batch(prompts, model("m"), t, log, fast_options());
  EXPECT_EQ(t.calls, 3);
  // the torn fragment stays on its own line; later records are not glued to it
  std::size_t parsed = 0, bad = 0;
  for (const auto& line : io::split_lines(io::read_file(path))) {
    if (line.empty()) continue;
    nlohmann::json::parse(line, nullptr, false).is_discarded() ? ++bad : ++parsed;
  }
  EXPECT_EQ(bad, 1u);
  EXPECT_EQ(parsed, 3u + 3u);  // one record per prompt per run
  EXPECT_EQ(ResumeLog(path).size(), 3u);
}

TEST(RunAnnotation, OneRecordPerPromptAndEndpoint) {
  auto prompts = sample_prompts(4);
  for (auto& p : prompts) p.n_options = 3;
  FakeTransport t(0, "3");
  ResumeLog log;
  std::vector<EndpointConfig> cfgs{model("a"), model("b"), model("c")};
  auto recs = run_annotation(prompts, cfgs, t, log, fast_options());
  ASSERT_EQ(recs.size(), 12u);
  EXPECT_EQ(recs[0].annotator_id, "a");
  EXPECT_EQ(recs[2].annotator_id, "c");
  EXPECT_EQ(recs[3].word_id, "w1");
  for (const auto& r : recs) EXPECT_EQ(r.label, "neither");
}

TEST(HttpTransport, TalksToJsonEndpoint) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  server.Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    seen_auth = req.get_header_value("Authorization");
    auto body = nlohmann::json::parse(req.body);
    const bool reversed = body["messages"][0]["content"][0]["text"].get<std::string>().find("1: slow") !=
                          std::string::npos;
    res.set_content(nlohmann::json{{"text", reversed ? "2" : "1"}}.dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  server.Post("/nofield", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"answer\":\"1\"}", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("PHONOSEM_TEST_TOKEN", "sekret", 1);
  EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat";
  cfg.model_name = "local";
  cfg.auth_token_env_name = "PHONOSEM_TEST_TOKEN";
  HttpChatTransport http;
  ResumeLog log;
  auto prompts = sample_prompts(3, promptkit::FeatureOrder::reversed);
  auto recs = run_batch(prompts, cfg, http, log, fast_options());
  for (const auto& r : recs) {
    EXPECT_TRUE(r.ok()) << r.raw_text;
    EXPECT_EQ(r.resolved_label, "fast");
  }
  EXPECT_EQ(hits, 3);
  EXPECT_EQ(seen_auth, "Bearer sekret");

  auto bad = cfg;
  bad.base_url = "http://127.0.0.1:" + std::to_string(port) + "/broken";
  bad.model_name = "down";
  auto r = run_batch(prompts, bad, http, log, fast_options());
  EXPECT_EQ(r[0].error, "EndpointError");
  EXPECT_NE(r[0].raw_text.find("503"), std::string::npos);

  auto nofield = cfg;
  nofield.base_url = "http://127.0.0.1:" + std::to_string(port) + "/nofield";
  nofield.model_name = "other";
  r = run_batch(prompts, nofield, http, log, fast_options());
  EXPECT_EQ(r[0].error, "EndpointError");

  server.stop();
  th.join();
}

TEST(HttpTransport, SplitUrl) {
  EXPECT_EQ(HttpChatTransport::split_url("http://h:8000/v1/chat"),
            (std::pair<std::string, std::string>{"http://h:8000", "/v1/chat"}));
  EXPECT_EQ(HttpChatTransport::split_url("http://h:8000"), (std::pair<std::string, std::string>{"http://h:8000", "/"}));
}

TEST(EndpointConfig, FromJson) {
  auto c = endpoint_from_json(nlohmann::json::parse(R"({"base_url":"http://x/v1","model":"m","max_tokens":8})"));
  EXPECT_EQ(c.model_name, "m");
  EXPECT_EQ(c.max_tokens, 8);
  EXPECT_EQ(c.temperature, 0.0);
  EXPECT_FALSE(c.inline_audio);
}
