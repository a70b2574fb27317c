#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ambig {

struct Domain {
  std::string id;
  std::string display_name;

  bool operator==(const Domain &) const = default;
};

/// True if `id` is a nonempty slug matching [a-z0-9_-]+.
bool is_valid_domain_id(std::string_view id);

enum class Split { train, test };
std::string_view to_string(Split s);

struct SentencePair {
  std::vector<std::string> source_tokens;
  std::vector<std::string> target_tokens;
  std::string domain;
  Split split = Split::train;
  int line_no = 1;
  // NFC-normalized raw lines, kept for prompting and scoring.
  std::string source_text;
  std::string target_text;

  bool operator==(const SentencePair &) const = default;
};

struct AlignmentLink {
  int src_index = 0;
  int tgt_index = 0;

  bool operator==(const AlignmentLink &) const = default;
};

struct Corpus {
  std::string source_lang;
  std::string target_lang;
  std::vector<Domain> domains;
  /// Grouped by domain in manifest order; train pairs before test pairs.
  std::vector<SentencePair> pairs;
  /// One entry per train pair, in the order train pairs appear in `pairs`.
  std::vector<std::vector<AlignmentLink>> alignments;

  const Domain *find_domain(std::string_view id) const;
  std::vector<const SentencePair *> split_pairs(std::string_view domain,
                                                Split split) const;

  struct AlignedPair {
    const SentencePair *pair;
    const std::vector<AlignmentLink> *links;
  };
  std::vector<AlignedPair> aligned_train(std::string_view domain) const;

  bool operator==(const Corpus &) const = default;
};

enum class Script { spaced, cjk };

/// Script class of a configured language code; throws Error for unknown codes.
Script language_script(std::string_view lang);
bool is_known_language(std::string_view lang);

/// Deterministic word tokenizer. Text is NFC-normalized first.
///
/// Space-delimited languages: whitespace split, then punctuation and symbols
/// become single-character tokens, except apostrophes, hyphens, periods and
/// commas sitting between two alphanumerics ("doesn't", "1,000", "U.S").
/// CJK languages: one token per character, with runs of ASCII letters and
/// digits kept whole.
std::vector<std::string> tokenize(std::string_view text, std::string_view lang);

/// Parses one Pharaoh-format alignment line ("0-0 1-2 ...").
/// Throws ParseError carrying the 1-based token index and column.
std::vector<AlignmentLink> parse_alignment_line(std::string_view line);

std::string format_alignment_line(const std::vector<AlignmentLink> &links);

/// Loads and validates a corpus manifest (JSON). Relative paths resolve
/// against the manifest's directory.
Corpus load_corpus(const std::filesystem::path &manifest_path);

/// Re-checks every Corpus invariant; throws Error on the first violation.
void validate_corpus(const Corpus &corpus);

/// Splits a file into lines (LF; a trailing CR is dropped). A final newline
/// does not start an extra line.
std::vector<std::string> read_lines(const std::filesystem::path &path);

}  // namespace ambig
