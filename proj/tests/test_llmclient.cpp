#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "ambig/llmclient.hpp"
#include "support.hpp"

using namespace ambig;
using nlohmann::json;

namespace {

RenderedPrompt hello_prompt() {
  PromptContext ctx;
  ctx.source_sentence = "Hello";
  ctx.target_language = "Chinese";
  return render(TemplateId::T1, ctx);
}

RetryPolicy no_sleep(std::vector<std::chrono::milliseconds> *slept = nullptr) {
  RetryPolicy p;
  p.jitter = 0;
  p.sleep = [slept](std::chrono::milliseconds d) {
    if (slept) slept->push_back(d);
  };
  return p;
}

struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port); }
};

std::string completion(const std::string &text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

// Echoes "译:<source>" after a short delay and tracks concurrency.
class LatencyBackend : public ChatBackend {
 public:
  std::string name() const override { return "latency"; }
  std::string send(const RenderedPrompt &p, const GenerationConfig &) override {
    const int now = ++in_flight;
    int seen = max_in_flight.load();
    while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    const auto &u = p.messages.back().content;
    return "译:" + u.substr(u.rfind('\n') + 1);
  }
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
};

// Fails on the listed sources.
class FlakyBackend : public ChatBackend {
 public:
  explicit FlakyBackend(std::set<std::string> bad) : bad_(std::move(bad)) {}
  std::string name() const override { return "flaky"; }
  std::string send(const RenderedPrompt &p, const GenerationConfig &) override {
    ++calls;
    const auto &u = p.messages.back().content;
    const auto src = u.substr(u.rfind('\n') + 1);
    if (bad_.count(src)) throw Error("boom");
    return "ok " + src;
  }
  std::atomic<int> calls{0};

 private:
  std::set<std::string> bad_;
};

std::vector<RunItem> dataset(int n) {
  std::vector<RunItem> out;
  for (int i = 1; i <= n; ++i) out.push_back({i, "s" + std::to_string(i), "r", {}, {}});
  return out;
}

}  // namespace

TEST_CASE("generation defaults") {
  const GenerationConfig cfg;
  CHECK(cfg.temperature == 0.8);
  CHECK(cfg.top_p == 0.95);
  CHECK(cfg.max_input_tokens == 1024);
  CHECK(cfg.max_output_tokens == 512);
  CHECK(GenerationConfig::for_template(TemplateId::T3).max_input_tokens == 3000);
  CHECK(GenerationConfig::for_template(TemplateId::T9).max_input_tokens == 3000);
  CHECK(GenerationConfig::for_template(TemplateId::T5).max_input_tokens == 1024);
  GenerationConfig bad;
  bad.top_p = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("mock backend and input budget") {
  MockBackend mock(MockRule{{{"hello", "你好"}}, MockRule::Fallback::echo});
  const auto ex = complete(hello_prompt(), GenerationConfig{}, mock);
  CHECK(ex.response_text == "你好");
  CHECK(ex.latency_ms == 0);
  CHECK(ex.attempt == 1);
  GenerationConfig tiny;
  tiny.max_input_tokens = 3;
  CHECK_THROWS_AS(complete(hello_prompt(), tiny, mock), InputTooLongError);
}

TEST_CASE("openai backend speaks the chat-completions wire format") {
  StubServer stub;
  json seen;
  std::string auth;
  stub.server.Post("/v1/chat/completions", [&](const httplib::Request &req, httplib::Response &res) {
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(completion("你好"), "application/json");
  });
  stub.start();
  ::setenv("AMBIG_API_BASE", stub.base().c_str(), 1);
  ::setenv("AMBIG_API_KEY", "sk-test", 1);
  const auto opts = OpenAIBackend::options_from_env();
  ::unsetenv("AMBIG_API_BASE");
  ::unsetenv("AMBIG_API_KEY");
  CHECK(opts.base_url == stub.base());
  OpenAIBackend backend(opts);
  CHECK(complete(hello_prompt(), GenerationConfig{}, backend).response_text == "你好");
  CHECK(auth == "Bearer sk-test");
  CHECK(seen["model"] == "Qwen2.5-7B-Instruct");
  CHECK(seen["temperature"] == 0.8);
  CHECK(seen["top_p"] == 0.95);
  CHECK(seen["max_tokens"] == 512);
  CHECK(seen["messages"].size() == 2);
  CHECK(seen["messages"][1]["content"] == "Please translate the following sentence into Chinese:\nHello");
}

TEST_CASE("retries transient failures with backoff") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server.Post("/v1/chat/completions", [&](const httplib::Request &, httplib::Response &res) {
    if (++hits < 3) {
      res.status = 503;
      return;
    }
    res.set_content(completion("好"), "application/json");
  });
  stub.start();
  OpenAIBackend backend({stub.base(), "k", 5});
  std::vector<std::chrono::milliseconds> slept;
  const auto ex = complete(hello_prompt(), GenerationConfig{}, backend, no_sleep(&slept));
  CHECK(ex.attempt == 3);
  CHECK(slept == std::vector<std::chrono::milliseconds>{std::chrono::seconds(1), std::chrono::seconds(4)});
}

TEST_CASE("429 exhausts retries, 401 fails at once") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server.Post("/v1/chat/completions", [&](const httplib::Request &req, httplib::Response &res) {
    ++hits;
    res.status = req.get_header_value("Authorization") == "Bearer bad" ? 401 : 429;
  });
  stub.start();
  OpenAIBackend limited({stub.base(), "k", 5});
  CHECK_THROWS_AS(complete(hello_prompt(), GenerationConfig{}, limited, no_sleep()), RateLimitError);
  CHECK(hits == 4);
  hits = 0;
  OpenAIBackend denied({stub.base(), "bad", 5});
  CHECK_THROWS_AS(complete(hello_prompt(), GenerationConfig{}, denied, no_sleep()), AuthError);
  CHECK(hits == 1);
}

TEST_CASE("unreachable endpoint is transient") {
  OpenAIBackend backend({"http://127.0.0.1:1", "k", 1});
  RetryPolicy p = no_sleep();
  p.max_retries = 1;
  CHECK_THROWS_AS(complete(hello_prompt(), GenerationConfig{}, backend, p), TransientError);
}

TEST_CASE("run_strategy keeps input order under parallelism") {
  LatencyBackend backend;
  RunOptions opt;
  opt.domain = "laws";
  opt.parallelism = 8;
  const auto data = dataset(60);
  const auto out = run_strategy(data, TemplateId::T1, GenerationConfig{}, backend, opt);
  REQUIRE(out.size() == 60);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].line_no == data[i].line_no);
    CHECK(out[i].hypothesis == "译:" + data[i].source);
  }
  CHECK(backend.max_in_flight <= 8);
  CHECK(backend.max_in_flight > 1);
}

TEST_CASE("reflection templates record two exchanges") {
  ScriptedBackend backend({"first", "second"});
  RunOptions opt;
  opt.domain = "laws";
  const auto out = run_strategy(dataset(1), TemplateId::T4, GenerationConfig{}, backend, opt);
  REQUIRE(out[0].exchanges.size() == 2);
  CHECK(out[0].hypothesis == "second");
  CHECK(out[0].exchanges[1].request.messages.size() == 4);
}

TEST_CASE("failures are recorded, a majority of failures aborts") {
  RunOptions opt;
  opt.domain = "laws";
  FlakyBackend some({"s2"});
  const auto out = run_strategy(dataset(4), TemplateId::T1, GenerationConfig{}, some, opt);
  CHECK(out[1].error == "boom");
  CHECK(out[1].hypothesis.empty());
  CHECK(out[0].ok());
  FlakyBackend most({"s1", "s2", "s3"});
  CHECK_THROWS_AS(run_strategy(dataset(4), TemplateId::T1, GenerationConfig{}, most, opt), RunAborted);
}

TEST_CASE("checkpoint resume skips completed sentences") {
  testing::TempDir dir;
  RunOptions opt;
  opt.domain = "laws";
  opt.checkpoint = dir / "run.jsonl";
  {
    FlakyBackend partial({"s3"});
    run_strategy(dataset(4), TemplateId::T1, GenerationConfig{}, partial, opt);
  }
  FlakyBackend rest({});
  const auto out = run_strategy(dataset(4), TemplateId::T1, GenerationConfig{}, rest, opt);
  CHECK(rest.calls == 1);
  CHECK(out[2].hypothesis == "ok s3");
  CHECK(read_run_file(dir / "run.jsonl") == out);
  CHECK_FALSE(std::filesystem::exists(dir / "run.jsonl.partial"));

  // an interrupted run leaves a partial file that the next run adopts
  testing::TempDir dir2;
  opt.checkpoint = dir2 / "run.jsonl";
  testing::write_text(dir2 / "run.jsonl.partial", record_to_json_line(out[0]) + "\n");
  FlakyBackend resumed({});
  run_strategy(dataset(4), TemplateId::T1, GenerationConfig{}, resumed, opt);
  CHECK(resumed.calls == 3);
}

TEST_CASE("run records round-trip") {
  MockBackend mock(MockRule{{{"s1", "一"}}, MockRule::Fallback::echo});
  RunOptions opt;
  opt.domain = "laws";
  const auto out = run_strategy(dataset(2), TemplateId::T1, GenerationConfig{}, mock, opt);
  CHECK(records_from_jsonl(records_to_jsonl(out)) == out);
  auto bad = out[0];
  bad.hypothesis.clear();
  bad.error = "x";
  CHECK(record_from_json_line(record_to_json_line(bad)) == bad);
}
