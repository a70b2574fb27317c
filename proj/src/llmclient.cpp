#include "ambig/llmclient.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ambig/checksum.hpp"
#include "ambig/corpus.hpp"
#include "ambig/random.hpp"
#include "ambig/text.hpp"
#include "http_util.hpp"

namespace ambig {

namespace fs = std::filesystem;
using nlohmann::json;

void GenerationConfig::validate() const {
  if (!(temperature >= 0.0)) throw Error("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error("top_p must be in (0, 1]");
  if (max_input_tokens < 1) throw Error("max_input_tokens must be positive");
  if (max_output_tokens < 1) throw Error("max_output_tokens must be positive");
}

GenerationConfig GenerationConfig::for_template(TemplateId id) {
  GenerationConfig cfg;
  if (is_few_shot(id)) cfg.max_input_tokens = kFewShotInputTokens;
  return cfg;
}

// Mock

MockBackend::MockBackend(MockRule rule, std::string source_lang, std::string target_lang)
    : rule_(std::move(rule)),
      source_lang_(std::move(source_lang)),
      target_lang_(std::move(target_lang)) {
  language_script(source_lang_);
  language_script(target_lang_);
}

std::string MockBackend::translate(const std::string &sentence) const {
  const bool join_tight = language_script(target_lang_) == Script::cjk;
  std::string out;
  for (const auto &tok : tokenize(sentence, source_lang_)) {
    std::string piece;
    auto it = rule_.dictionary.find(tok);
    if (it == rule_.dictionary.end()) it = rule_.dictionary.find(text::lowercase(tok));
    if (it != rule_.dictionary.end()) piece = it->second;
    else if (rule_.fallback == MockRule::Fallback::echo) piece = tok;
    if (piece.empty()) continue;
    if (!out.empty() && !join_tight) out += ' ';
    out += piece;
  }
  return out;
}

std::string MockBackend::send(const RenderedPrompt &prompt, const GenerationConfig &) {
  for (const auto &m : prompt.messages) {
    if (m.role != Role::user) continue;
    auto nl = m.content.rfind('\n');
    return translate(nl == std::string::npos ? m.content : m.content.substr(nl + 1));
  }
  throw Error("mock backend: prompt has no user message");
}

MockRule read_mock_dictionary(const fs::path &path, MockRule::Fallback fallback) {
  MockRule rule;
  rule.fallback = fallback;
  int n = 0;
  for (const auto &line : read_lines(path)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error("mock dictionary " + path.string() + " line " + std::to_string(n) +
                  ": expected source<TAB>target");
    rule.dictionary[text::nfc(line.substr(0, tab))] = text::nfc(line.substr(tab + 1));
  }
  return rule;
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies)
    : replies_(std::move(replies)) {
  if (replies_.empty()) throw Error("scripted backend needs at least one reply");
}

std::string ScriptedBackend::send(const RenderedPrompt &prompt, const GenerationConfig &) {
  std::lock_guard lock(mu_);
  requests_.push_back(prompt);
  auto i = std::min(next_, replies_.size() - 1);
  ++next_;
  return replies_[i];
}

std::vector<RenderedPrompt> ScriptedBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

// OpenAI-compatible HTTP

OpenAIBackend::Options OpenAIBackend::options_from_env() {
  Options o;
  if (const char *base = std::getenv("AMBIG_API_BASE"); base && *base) o.base_url = base;
  if (const char *key = std::getenv("AMBIG_API_KEY"); key) o.api_key = key;
  return o;
}

OpenAIBackend::OpenAIBackend(Options options) : options_(std::move(options)) {
  auto split = detail::split_url(options_.base_url);
  scheme_host_port_ = split.scheme_host_port;
  path_ = split.path;
  if (!path_.ends_with("/v1")) path_ += "/v1";
  path_ += "/chat/completions";
}

std::string chat_request_body(const RenderedPrompt &prompt, const GenerationConfig &cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model_name;
  body["messages"] = nlohmann::ordered_json::array();
  for (const auto &m : prompt.messages)
    body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
  body["temperature"] = cfg.temperature;
  body["top_p"] = cfg.top_p;
  body["max_tokens"] = cfg.max_output_tokens;
  return body.dump();
}

std::string OpenAIBackend::send(const RenderedPrompt &prompt, const GenerationConfig &cfg) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(options_.timeout_seconds, 0);
  client.set_read_timeout(options_.timeout_seconds, 0);
  client.set_write_timeout(options_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!options_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  auto res = client.Post(path_, headers, chat_request_body(prompt, cfg), "application/json");
  if (!res)
    throw TransientError("request to " + scheme_host_port_ + path_ +
                         " failed: " + httplib::to_string(res.error()));
  const int status = res->status;
  if (status == 401 || status == 403)
    throw AuthError("authentication failed (HTTP " + std::to_string(status) +
                    "); check AMBIG_API_KEY");
  if (status == 429) throw RateLimitError("rate limited (HTTP 429)");
  if (status >= 500) throw TransientError("server error (HTTP " + std::to_string(status) + ")");
  if (status != 200)
    throw Error("chat completion rejected (HTTP " + std::to_string(status) + "): " + res->body);
  try {
    auto j = json::parse(res->body);
    const auto &content = j.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception &e) {
    throw Error(std::string("malformed chat completion response: ") + e.what());
  }
}

// Single request with retries

int count_prompt_tokens(const RenderedPrompt &prompt) {
  int n = 0;
  for (const auto &m : prompt.messages)
    n += static_cast<int>(tokenize(m.content, "zh").size());
  return n;
}

ChatExchange complete(const RenderedPrompt &prompt, const GenerationConfig &cfg,
                      ChatBackend &backend, const RetryPolicy &retry) {
  cfg.validate();
  if (prompt.messages.empty() || prompt.messages.back().role != Role::user)
    throw Error("prompt must be nonempty and end with a user message");
  const int tokens = count_prompt_tokens(prompt);
  if (tokens > cfg.max_input_tokens)
    throw InputTooLongError("input of " + std::to_string(tokens) +
                            " tokens exceeds max_input_tokens=" +
                            std::to_string(cfg.max_input_tokens));

  thread_local std::mt19937 jitter_rng{std::random_device{}()};
  for (int attempt = 1;; ++attempt) {
    auto start = std::chrono::steady_clock::now();
    try {
      ChatExchange ex;
      ex.request = prompt;
      ex.response_text = backend.send(prompt, cfg);
      ex.backend = backend.name();
      ex.attempt = attempt;
      ex.latency_ms = backend.deterministic()
                          ? 0
                          : std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count();
      return ex;
    } catch (const TransientError &e) {
      if (attempt > retry.max_retries) {
        if (dynamic_cast<const RateLimitError *>(&e))
          throw RateLimitError(std::string(e.what()) + "; gave up after " +
                               std::to_string(attempt) + " attempts");
        throw TransientError(std::string(e.what()) + "; gave up after " +
                             std::to_string(attempt) + " attempts");
      }
      auto base = retry.backoff.empty()
                      ? std::chrono::milliseconds(0)
                      : retry.backoff[std::min<std::size_t>(attempt - 1, retry.backoff.size() - 1)];
      std::uniform_real_distribution<double> jit(1.0 - retry.jitter, 1.0 + retry.jitter);
      auto delay = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(base.count()) * jit(jitter_rng)));
      if (retry.sleep) retry.sleep(delay);
      else std::this_thread::sleep_for(delay);
    }
  }
}

// Runner

std::uint64_t few_shot_seed_for(std::uint64_t seed, int line_no) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(line_no)));
}

namespace {

EvalRecord run_one(const RunItem &item, TemplateId id, const GenerationConfig &cfg,
                   ChatBackend &backend, const RunOptions &opt,
                   const TemplateCatalog &catalog) {
  EvalRecord rec;
  rec.line_no = item.line_no;
  rec.domain = opt.domain;
  rec.template_id = id;
  rec.source = item.source;
  rec.reference = item.reference;
  try {
    PromptContext ctx;
    ctx.source_sentence = item.source;
    ctx.target_language = opt.target_language;
    if (!opt.domain_label.empty()) ctx.domain = opt.domain_label;
    ctx.candidate_domains = opt.candidate_domains;
    if (spec_of(id).domain_info == DomainInfo::word_tags) {
      ctx.word_domain_tags = item.word_tags;
      ctx.source_tokens = item.source_tokens;
    }
    if (is_few_shot(id)) {
      const bool tagged = spec_of(id).domain_info == DomainInfo::tagged_examples;
      auto examples = sample_few_shot(
          opt.few_shot_pool, opt.shots, few_shot_seed_for(opt.few_shot_seed, item.line_no),
          tagged ? std::optional<std::string>(opt.domain_label) : std::nullopt);
      if (!tagged)
        for (auto &ex : examples) ex.domain.reset();
      ctx.few_shot_examples = std::move(examples);
    }
    auto first = complete(render(id, ctx, catalog), cfg, backend, opt.retry);
    rec.exchanges.push_back(first);
    std::string reply = first.response_text;
    if (is_reflection(id)) {
      ctx.prior_hypothesis = first.response_text;
      auto second = complete(build_reflection_turns(id, ctx, catalog), cfg, backend, opt.retry);
      rec.exchanges.push_back(second);
      reply = second.response_text;
    }
    rec.hypothesis = extract_translation(reply);
    if (rec.hypothesis.empty()) rec.error = "model returned an empty translation";
  } catch (const Error &e) {
    rec.error = e.what();
  }
  if (rec.error) rec.hypothesis.clear();
  return rec;
}

}  // namespace

std::vector<EvalRecord> run_strategy(const std::vector<RunItem> &dataset, TemplateId id,
                                     const GenerationConfig &cfg, ChatBackend &backend,
                                     const RunOptions &opt) {
  if (dataset.empty()) throw Error("run_strategy: dataset is empty");
  if (opt.parallelism < 1) throw Error("parallelism must be >= 1");
  cfg.validate();
  const TemplateCatalog &catalog = opt.catalog ? *opt.catalog : TemplateCatalog::builtin();

  std::vector<std::optional<EvalRecord>> slots(dataset.size());
  std::optional<fs::path> partial;
  if (opt.checkpoint) {
    partial = *opt.checkpoint;
    *partial += ".partial";
    std::map<int, EvalRecord> done;
    auto absorb = [&](const fs::path &p) {
      if (!fs::exists(p)) return;
      for (auto &r : read_run_file(p))
        if (r.ok() && r.template_id == id && r.domain == opt.domain)
          done[r.line_no] = std::move(r);
    };
    absorb(*opt.checkpoint);
    absorb(*partial);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      auto it = done.find(dataset[i].line_no);
      if (it != done.end()) slots[i] = it->second;
    }
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (!slots[i]) todo.push_back(i);

  std::mutex out_mu;
  std::ofstream partial_out;
  if (partial && !todo.empty()) {
    if (partial->has_parent_path()) fs::create_directories(partial->parent_path());
    partial_out.open(*partial, std::ios::app | std::ios::binary);
    if (!partial_out) throw Error("cannot open checkpoint " + partial->string());
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failures{0};
  std::atomic<bool> abort{false};
  const std::size_t limit = dataset.size() / 2;

  auto worker = [&] {
    while (!abort.load()) {
      auto k = next.fetch_add(1);
      if (k >= todo.size()) return;
      const auto idx = todo[k];
      EvalRecord rec = run_one(dataset[idx], id, cfg, backend, opt, catalog);
      if (!rec.ok() && failures.fetch_add(1) + 1 > limit) abort.store(true);
      std::lock_guard lock(out_mu);
      if (partial_out.is_open()) {
        partial_out << record_to_json_line(rec) << '\n';
        partial_out.flush();
      }
      slots[idx] = std::move(rec);
    }
  };

  const std::size_t n_threads = std::min(opt.parallelism, std::max<std::size_t>(todo.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto &t : threads) t.join();
  }
  if (partial_out.is_open()) partial_out.close();

  if (abort.load())
    throw RunAborted("run aborted: more than half of " + std::to_string(dataset.size()) +
                     " sentences in domain '" + opt.domain + "' failed");

  std::vector<EvalRecord> out;
  out.reserve(dataset.size());
  for (auto &s : slots) out.push_back(std::move(*s));
  if (opt.checkpoint) {
    write_file_atomic(*opt.checkpoint, records_to_jsonl(out));
    std::error_code ec;
    fs::remove(*partial, ec);
  }
  return out;
}

}  // namespace ambig
