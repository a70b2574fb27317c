#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ambig/error.hpp"
#include "ambig/prompts.hpp"
#include "ambig/records.hpp"

namespace ambig {

/// Sampling defaults follow the vLLM defaults used for all reported runs.
struct GenerationConfig {
  double temperature = 0.8;
  double top_p = 0.95;
  int max_input_tokens = 1024;
  int max_output_tokens = 512;
  std::string model_name = "Qwen2.5-7B-Instruct";

  void validate() const;
  /// Defaults with the few-shot input budget (3000) for T3/T9.
  static GenerationConfig for_template(TemplateId id);
};

inline constexpr int kDefaultInputTokens = 1024;
inline constexpr int kFewShotInputTokens = 3000;

/// Retryable failure: rate limiting, 5xx, or a dropped connection.
class TransientError : public Error {
 public:
  using Error::Error;
};
class RateLimitError : public TransientError {
 public:
  using TransientError::TransientError;
};
class AuthError : public Error {
 public:
  using Error::Error;
};
class InputTooLongError : public Error {
 public:
  using Error::Error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string name() const = 0;
  /// Returns the reply text for one request. Must be callable concurrently.
  virtual std::string send(const RenderedPrompt &prompt,
                           const GenerationConfig &cfg) = 0;
  /// Deterministic backends record zero latency so artifacts are reproducible.
  virtual bool deterministic() const { return false; }
};

struct MockRule {
  enum class Fallback { echo, drop };
  std::map<std::string, std::string> dictionary;
  Fallback fallback = Fallback::echo;
};

/// Dictionary "translator" for tests and dry runs. It translates the last
/// line of the first user message (every catalog template puts the source
/// sentence there) token by token.
class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(MockRule rule, std::string source_lang = "en",
                       std::string target_lang = "zh");
  std::string name() const override { return "mock"; }
  std::string send(const RenderedPrompt &prompt, const GenerationConfig &cfg) override;
  bool deterministic() const override { return true; }

  std::string translate(const std::string &sentence) const;

 private:
  MockRule rule_;
  std::string source_lang_;
  std::string target_lang_;
};

/// Reads a two-column TSV dictionary (`source<TAB>target`).
MockRule read_mock_dictionary(const std::filesystem::path &path,
                              MockRule::Fallback fallback = MockRule::Fallback::echo);

/// Replies from a fixed script, one per call; the last reply repeats.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies);
  std::string name() const override { return "scripted"; }
  std::string send(const RenderedPrompt &prompt, const GenerationConfig &cfg) override;
  bool deterministic() const override { return true; }
  std::vector<RenderedPrompt> requests() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
  std::vector<RenderedPrompt> requests_;
};

/// OpenAI-compatible chat-completions client (`POST /v1/chat/completions`).
class OpenAIBackend : public ChatBackend {
 public:
  struct Options {
    std::string base_url = "https://api.openai.com";
    std::string api_key;
    int timeout_seconds = 120;
  };
  /// Reads AMBIG_API_BASE and AMBIG_API_KEY.
  static Options options_from_env();

  explicit OpenAIBackend(Options options);
  std::string name() const override { return "openai"; }
  std::string send(const RenderedPrompt &prompt, const GenerationConfig &cfg) override;

 private:
  Options options_;
  std::string scheme_host_port_;
  std::string path_;
};

/// Request body for the chat-completions wire format.
std::string chat_request_body(const RenderedPrompt &prompt, const GenerationConfig &cfg);

struct RetryPolicy {
  /// Retries after the first attempt; backoff[i] precedes retry i+1.
  int max_retries = 3;
  std::vector<std::chrono::milliseconds> backoff{std::chrono::seconds(1),
                                                 std::chrono::seconds(4),
                                                 std::chrono::seconds(16)};
  double jitter = 0.2;
  std::function<void(std::chrono::milliseconds)> sleep;  // default: sleep_for
};

/// Budget estimate used for the input-length check: CJK characters, ASCII
/// alphanumeric runs, and punctuation each count as one token.
int count_prompt_tokens(const RenderedPrompt &prompt);

ChatExchange complete(const RenderedPrompt &prompt, const GenerationConfig &cfg,
                      ChatBackend &backend, const RetryPolicy &retry = {});

struct RunItem {
  int line_no = 0;
  std::string source;
  std::string reference;
  std::vector<std::string> source_tokens;
  /// Token index -> domain label, for word-tag templates.
  std::map<int, std::string> word_tags;
};

struct RunOptions {
  std::string domain;        ///< domain id stored in records
  std::string domain_label;  ///< domain as shown in prompts
  std::string target_language = "Chinese";
  std::vector<std::string> candidate_domains;
  /// Few-shot datastore; example domains hold display labels.
  std::vector<FewShotExample> few_shot_pool;
  std::size_t shots = kDefaultShots;
  std::uint64_t few_shot_seed = 0;
  std::size_t parallelism = 1;
  RetryPolicy retry;
  /// Final run file. Progress is appended to "<path>.partial" and the final
  /// file is written in input order once every sentence is done.
  std::optional<std::filesystem::path> checkpoint;
  const TemplateCatalog *catalog = nullptr;
};

class RunAborted : public Error {
 public:
  using Error::Error;
};

/// Runs one template over one domain's sentences. Per-sentence failures are
/// recorded in the record; the run aborts (RunAborted) once more than half
/// of the sentences have failed.
std::vector<EvalRecord> run_strategy(const std::vector<RunItem> &dataset,
                                     TemplateId id, const GenerationConfig &cfg,
                                     ChatBackend &backend, const RunOptions &options);

/// Seed for one sentence's few-shot draw.
std::uint64_t few_shot_seed_for(std::uint64_t seed, int line_no);

}  // namespace ambig
