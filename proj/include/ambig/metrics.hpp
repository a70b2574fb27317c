#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ambig/ambiguity.hpp"
#include "ambig/error.hpp"
#include "ambig/llmclient.hpp"
#include "ambig/records.hpp"

namespace ambig {

// ---------------------------------------------------------------------------
// BLEU

/// Sufficient statistics for corpus BLEU (max order 4, one reference).
struct BleuStats {
  std::array<std::int64_t, 4> correct{};
  std::array<std::int64_t, 4> total{};
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;

  BleuStats &operator+=(const BleuStats &o);
};

struct BleuScore {
  double score = 0.0;
  /// Smoothed n-gram precisions as percentages, n = 1..4.
  std::array<double, 4> ngram_precisions{};
  double brevity_penalty = 1.0;
  std::int64_t hyp_len = 0;
  std::int64_t ref_len = 0;
};

BleuStats bleu_stats(const std::vector<std::string> &hyp,
                     const std::vector<std::string> &ref);

/// Corpus BLEU from summed statistics, with "exp" smoothing: the k-th
/// n-gram order that has zero matches gets precision 100 / (2^k * total).
/// Scores 0 when there are no unigram matches.
BleuScore bleu_from_stats(const BleuStats &stats);

/// Tokenizes with the corpus tokenizer for `target_language` (a language
/// code) and scores all records that have no error.
BleuScore corpus_bleu(std::span<const EvalRecord> records,
                      const std::string &target_language);

/// Metric signature printed alongside scores.
std::string bleu_signature(const std::string &target_language);

// ---------------------------------------------------------------------------
// Disambiguation accuracy

enum class MatchMode { lenient, strict };
MatchMode parse_match_mode(std::string_view s);
std::string_view to_string(MatchMode m);

struct DisambiguationResult {
  std::int64_t m = 0;
  std::int64_t n = 0;
  /// m/n; absent when n == 0.
  std::optional<double> accuracy() const;
};

/// Lenient: the normalized hypothesis contains an expected translation as a
/// contiguous token run. Strict: additionally no distractor (outside the
/// expected set) occurs.
bool occurrence_correct(const std::vector<std::string> &hyp_tokens,
                        const AnnotatedOccurrence &occ, MatchMode mode,
                        const std::string &target_language,
                        const NormalizeOptions &opts = {});

DisambiguationResult disambiguation_accuracy(
    std::span<const EvalRecord> records,
    std::span<const AnnotatedOccurrence> annotations, MatchMode mode,
    const std::string &target_language, const NormalizeOptions &opts = {},
    Diagnostics *diag = nullptr);

// ---------------------------------------------------------------------------
// Paired bootstrap resampling

/// A corpus metric expressed through additive per-sentence statistics.
struct SentenceMetric {
  std::string name;
  std::function<std::vector<double>(const EvalRecord &)> stats;
  std::function<double(const std::vector<double> &)> score;
};

SentenceMetric bleu_metric(const std::string &target_language);
SentenceMetric disambiguation_metric(std::vector<AnnotatedOccurrence> annotations,
                                     MatchMode mode, const std::string &target_language,
                                     NormalizeOptions opts = {});

struct SignificanceResult {
  double p_value = 1.0;
  int n_resamples = 0;
  std::string better_system;  // "A", "B" or "tie"
  double score_a = 0.0;
  double score_b = 0.0;
};

inline constexpr int kDefaultResamples = 1000;
inline constexpr double kSignificanceLevel = 0.05;

/// Resamples line_nos with replacement; p is the fraction of resamples in
/// which the lower-scoring system scores at least as high as the other.
SignificanceResult paired_bootstrap(std::span<const EvalRecord> records_a,
                                    std::span<const EvalRecord> records_b,
                                    const SentenceMetric &metric,
                                    int n_resamples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// LLM judge

class JudgeError : public Error {
 public:
  using Error::Error;
};

struct JudgeResult {
  int found = 0;
  int correct = 0;
  bool operator==(const JudgeResult &) const = default;
};

/// The judge instruction with source, reference and hypothesis filled in,
/// followed by the required answer format.
std::string judge_prompt_text(const EvalRecord &record);
RenderedPrompt judge_prompt(const EvalRecord &record);

/// nullopt when the reply lacks either number; JudgeError when correct > found.
std::optional<JudgeResult> parse_judge_reply(std::string_view reply);

/// Asks the judge once, and once more with a format reminder if the reply
/// cannot be parsed. Throws JudgeError when both fail.
JudgeResult gpt_judge(const EvalRecord &record, ChatBackend &judge,
                      const GenerationConfig &cfg, const RetryPolicy &retry = {});

struct JudgeAggregate {
  std::int64_t found = 0;
  std::int64_t correct = 0;
  std::size_t judged = 0;
  std::vector<std::string> errors;
};

JudgeAggregate judge_records(std::span<const EvalRecord> records, ChatBackend &judge,
                             const GenerationConfig &cfg, std::size_t parallelism,
                             const RetryPolicy &retry = {});

// ---------------------------------------------------------------------------
// External (e.g. COMET) scorer

struct ExternalScores {
  /// Per record, scaled to 0-100; absent for errored records.
  std::vector<std::optional<double>> scores;
  std::map<std::string, double> domain_average;
};

/// POSTs {source, reference, hypothesis} triples to `<scorer_url>/score`.
/// Any failure yields nullopt (with a warning) so the pipeline can continue.
std::optional<ExternalScores> external_score(std::span<const EvalRecord> records,
                                             const std::string &scorer_url,
                                             Diagnostics *diag = nullptr);

// ---------------------------------------------------------------------------
// Score files

struct ScoreSummary {
  std::string domain;
  TemplateId template_id = TemplateId::T1;
  std::optional<double> bleu;
  std::optional<double> comet;
  DisambiguationResult disamb;
  std::optional<JudgeAggregate> judge;
  std::string bleu_signature;
  MatchMode mode = MatchMode::lenient;
};

std::string score_to_json(const ScoreSummary &s);
ScoreSummary score_from_json(std::string_view text);
void write_score(const std::filesystem::path &path, const ScoreSummary &s);
ScoreSummary read_score(const std::filesystem::path &path);

}  // namespace ambig
