#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ambig/corpus.hpp"
#include "ambig/lexicon.hpp"

namespace ambig {

/// A translation valid in another domain, tagged with that domain.
struct Distractor {
  std::string word;
  std::string origin;

  auto operator<=>(const Distractor &) const = default;
};

struct AmbiguousEntry {
  std::string source_word;
  std::set<std::string> in_domain;
  std::set<Distractor> distractors;

  /// Distractor words without their origins.
  std::set<std::string> distractor_words() const;
  bool operator==(const AmbiguousEntry &) const = default;
};

struct AmbiguousVocabulary {
  std::string domain;
  std::map<std::string, AmbiguousEntry> entries;

  bool operator==(const AmbiguousVocabulary &) const = default;
};

/// Throws Error if an entry has an empty side or overlapping sides.
void check_entry(const AmbiguousEntry &entry);

/// A source word is ambiguous for domain d when some other domain translates
/// it with a word d never uses. The entry keeps d's own translations as the
/// in-domain set and every such foreign translation as a distractor.
std::map<std::string, AmbiguousVocabulary> build_ambiguous_vocabulary(
    const std::map<std::string, DomainLexicon> &lexicons);

struct AnnotatedOccurrence {
  std::string domain;
  int line_no = 0;
  int token_index = 0;
  std::string source_word;
  std::set<std::string> expected;
  std::set<std::string> distractors;

  bool operator==(const AnnotatedOccurrence &) const = default;
};

std::vector<AnnotatedOccurrence> annotate_test_set(
    const std::vector<const SentencePair *> &test_pairs,
    const AmbiguousVocabulary &vocab, const NormalizeOptions &opts = {});

struct AmbiguityStats {
  std::size_t occurrences = 0;
  std::size_t distinct_words = 0;
  std::size_t sentences = 0;

  bool operator==(const AmbiguityStats &) const = default;
};

std::map<std::string, AmbiguityStats> ambiguity_stats(
    const std::map<std::string, std::vector<AnnotatedOccurrence>> &annotations,
    const NormalizeOptions &opts = {});

// Serialization

std::string vocabulary_to_json(const AmbiguousVocabulary &vocab);
AmbiguousVocabulary vocabulary_from_json(std::string_view json_text);
void write_vocabulary(const std::filesystem::path &path,
                      const AmbiguousVocabulary &vocab);
AmbiguousVocabulary read_vocabulary(const std::filesystem::path &path);
/// Reads every `*.json` vocabulary in a directory, keyed by domain.
std::map<std::string, AmbiguousVocabulary> read_vocabulary_dir(
    const std::filesystem::path &dir);

std::string occurrences_to_jsonl(const std::vector<AnnotatedOccurrence> &occ);
std::vector<AnnotatedOccurrence> occurrences_from_jsonl(std::string_view text);
void write_occurrences(const std::filesystem::path &path,
                       const std::vector<AnnotatedOccurrence> &occ);
std::vector<AnnotatedOccurrence> read_occurrences(
    const std::filesystem::path &path);

}  // namespace ambig
