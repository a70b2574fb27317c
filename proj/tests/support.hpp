#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ambig/ambiguity.hpp"
#include "ambig/lexicon.hpp"
#include "ambig/records.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(AMBIG_SOURCE_DIR); }
inline fs::path fixture(const std::string &rel) { return source_dir() / "fixtures" / rel; }

inline std::string join(const std::vector<std::string> &parts) {
  std::string out;
  for (const auto &p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  const fs::path &path() const { return path_; }
  fs::path operator/(const std::string &rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

void write_text(const fs::path &p, const std::string &text);
std::string slurp(const fs::path &p);
/// Relative path -> bytes for every regular file under `root`.
std::map<std::string, std::string> snapshot_tree(const fs::path &root);

// Brute-force ambiguity rule: enumerate (d, s, d') triples directly.
struct OracleEntry {
  std::set<std::string> in_domain;
  std::set<std::pair<std::string, std::string>> distractors;  // (word, origin)
  bool operator==(const OracleEntry &) const = default;
};
using OracleVocab = std::map<std::string, std::map<std::string, OracleEntry>>;
OracleVocab brute_force_ambiguity(const std::map<std::string, ambig::DomainLexicon> &lexicons);
OracleVocab flatten(const std::map<std::string, ambig::AmbiguousVocabulary> &vocab);

/// Random lexicons: 2..max_domains domains, up to max_words source words
/// per domain drawn from a shared pool, 1..max_translations each.
std::map<std::string, ambig::DomainLexicon> random_lexicons(std::mt19937 &rng, int max_domains,
                                                            int max_words, int max_translations);

/// Naive corpus BLEU over pre-tokenized sentences, written from the
/// textbook definition with the same exponential smoothing convention.
double naive_bleu(const std::vector<std::vector<std::string>> &hyps,
                  const std::vector<std::vector<std::string>> &refs);

/// Independent rewrite of the seeded sampler: splitmix64-seeded mt19937_64,
/// unbiased bounded draws, partial Fisher-Yates over a sparse index map.
std::vector<std::size_t> oracle_sample(std::uint64_t seed, std::size_t n, std::size_t k);
std::uint64_t oracle_stream_seed(std::uint64_t seed, const std::string &stream);

ambig::EvalRecord make_record(int line_no, const std::string &domain, const std::string &reference,
                              const std::string &hypothesis);

}  // namespace testing
