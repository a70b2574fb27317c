#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ambig/corpus.hpp"

namespace ambig {

/// Word identity rules shared by lexicon construction and test-set matching.
struct NormalizeOptions {
  bool casefold = true;
};

/// NFC, then lowercase unless casefolding is disabled.
std::string normalize_word(std::string_view word, const NormalizeOptions &opts = {});

struct BilingualEntry {
  std::string source_word;
  std::string target_word;
  std::int64_t count = 1;

  bool operator==(const BilingualEntry &) const = default;
};

using TranslationCounts = std::map<std::string, std::int64_t>;

struct DomainLexicon {
  std::string domain;
  std::map<std::string, TranslationCounts> entries;

  std::int64_t total_count() const;
  std::size_t pair_count() const;
  bool operator==(const DomainLexicon &) const = default;
};

std::vector<BilingualEntry> extract_pairs(const SentencePair &pair,
                                          const std::vector<AlignmentLink> &links,
                                          const NormalizeOptions &opts = {});

DomainLexicon build_domain_lexicon(const std::vector<BilingualEntry> &entries,
                                   std::string domain);

/// Drops pairs under `min_count`, pairs whose source is a stopword, and pairs
/// with a punctuation-only side; prunes emptied source keys.
DomainLexicon filter_lexicon(const DomainLexicon &lex, std::int64_t min_count,
                             const std::set<std::string> &stopwords);

/// Unfiltered lexicons for every domain of the corpus, keyed by domain id.
std::map<std::string, DomainLexicon> build_corpus_lexicons(
    const Corpus &corpus, const NormalizeOptions &opts = {});

/// Train line numbers (up to `max_per_pair`) where each (source, target)
/// pair was aligned, keyed by domain then pair.
using ExampleIndex =
    std::map<std::string,
             std::map<std::pair<std::string, std::string>, std::vector<int>>>;
ExampleIndex collect_examples(const Corpus &corpus, const NormalizeOptions &opts,
                              std::size_t max_per_pair = 3);

/// TSV rows `domain<TAB>source<TAB>target<TAB>count`, sorted by source, then
/// descending count, then target.
std::string lexicon_to_tsv(const DomainLexicon &lex);
/// Parses TSV rows; rows for several domains are split by domain.
std::map<std::string, DomainLexicon> lexicons_from_tsv(std::string_view tsv);

void write_lexicon(const std::filesystem::path &path, const DomainLexicon &lex);
std::map<std::string, DomainLexicon> read_lexicon_dir(
    const std::filesystem::path &dir);

std::set<std::string> read_stopwords(const std::filesystem::path &path);

}  // namespace ambig
