#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ambig/error.hpp"
#include "ambig/llmclient.hpp"
#include "ambig/metrics.hpp"
#include "ambig/prompts.hpp"
#include "ambig/report.hpp"

namespace ambig {

inline constexpr const char *kToolVersion = "0.1.0";

/// Bad configuration or inputs; nothing has been written.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A stage failed. `artifact` is the path being produced when it did.
class StageError : public Error {
 public:
  StageError(std::string stage, std::filesystem::path artifact, const std::string &why);
  const std::string &stage() const { return stage_; }
  const std::filesystem::path &artifact() const { return artifact_; }

 private:
  std::string stage_;
  std::filesystem::path artifact_;
};

struct BackendSpec {
  enum class Kind { mock, openai };
  Kind kind = Kind::mock;
  /// mock: dictionary TSV per domain id; "*" applies to domains not listed.
  std::map<std::string, std::filesystem::path> dictionaries;
  MockRule::Fallback fallback = MockRule::Fallback::echo;
};

struct Seeds {
  std::uint64_t sampling = 0;
  std::uint64_t bootstrap = 0;
  std::uint64_t few_shot = 0;
};

/// Loaded from a JSON file; relative paths resolve against the file's
/// directory.
struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::vector<TemplateId> templates;
  BackendSpec backend;
  GenerationConfig generation;  // base; few-shot templates raise the input budget
  std::optional<int> max_input_tokens;
  Seeds seeds;
  MatchMode mode = MatchMode::lenient;
  std::int64_t min_count = 2;
  std::optional<std::filesystem::path> stopwords;
  std::size_t sample_size = 100;
  std::string target_language = "Chinese";
  std::size_t parallelism = 4;
  std::size_t shots = kDefaultShots;
  std::optional<std::string> scorer_url;
  std::optional<std::filesystem::path> catalog;
  std::vector<ReportFormat> report_formats{ReportFormat::markdown, ReportFormat::json};
  /// sha256 of the config file bytes.
  std::string checksum;
};

PipelineConfig parse_pipeline_config(std::string_view json_text,
                                     const std::filesystem::path &base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path &path);
/// Checks that referenced paths exist. Throws ValidationError.
void validate_pipeline_config(const PipelineConfig &cfg);

struct PipelineEvent {
  std::string stage;
  std::string event;  // "start", "done", "skip", "warn"
  std::string detail;
};

struct PipelineOptions {
  bool force = false;
  std::function<void(const PipelineEvent &)> on_event;
  /// Overrides the backend built from the config (tests).
  ChatBackend *backend = nullptr;
  RetryPolicy retry;
};

struct PipelineResult {
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  std::vector<std::filesystem::path> reports;
  std::vector<std::string> warnings;
};

/// lexicon -> ambiguity -> annotate -> run:Tn -> score:Tn -> report.
/// Stage completion is recorded in <out_dir>/pipeline.lock.json together
/// with the config checksum, tool version and the sha256 of every artifact.
PipelineResult pipeline_all(const PipelineConfig &cfg, const PipelineOptions &opts = {});

}  // namespace ambig
