#include <doctest.h>

#include <algorithm>

#include "ambig/lexicon.hpp"
#include "support.hpp"

using namespace ambig;

namespace {

SentencePair basin_pair() {
  SentencePair p;
  p.source_tokens = {"He", "washed", "his", "hands", "in", "a", "basin"};
  p.target_tokens = {"他", "在", "盆", "里", "洗", "了", "手"};
  p.domain = "education";
  return p;
}

DomainLexicon lex_of(std::map<std::string, TranslationCounts> entries, std::string domain = "laws") {
  DomainLexicon l;
  l.domain = std::move(domain);
  l.entries = std::move(entries);
  return l;
}

}  // namespace

TEST_CASE("extract_pairs maps each link to a count-1 entry") {
  const auto p = basin_pair();
  CHECK(extract_pairs(p, {{6, 2}}) == std::vector<BilingualEntry>{{"basin", "盆", 1}});
  CHECK(extract_pairs(p, {}).empty());
  const auto dup = extract_pairs(p, {{0, 0}, {0, 0}});
  REQUIRE(dup.size() == 2);
  CHECK(dup[0] == dup[1]);
  CHECK(dup[0].source_word == "he");  // case-folded
  NormalizeOptions keep_case;
  keep_case.casefold = false;
  CHECK(extract_pairs(p, {{0, 0}}, keep_case)[0].source_word == "He");
}

TEST_CASE("build_domain_lexicon merges by sum") {
  CHECK(build_domain_lexicon({{"basin", "盆", 1}, {"basin", "盆", 1}}, "x").entries ==
        std::map<std::string, TranslationCounts>{{"basin", {{"盆", 2}}}});
  CHECK(build_domain_lexicon({{"power", "权力", 3}, {"power", "能量", 1}}, "x").entries ==
        std::map<std::string, TranslationCounts>{{"power", {{"权力", 3}, {"能量", 1}}}});
  CHECK(build_domain_lexicon({}, "x").entries.empty());
}

TEST_CASE("build_domain_lexicon: count conservation and order independence") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> w(0, 9), t(0, 4), n(0, 60);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<BilingualEntry> entries;
    for (int i = n(rng); i > 0; --i)
      entries.push_back({"s" + std::to_string(w(rng)), "t" + std::to_string(t(rng)), 1});
    const auto lex = build_domain_lexicon(entries, "d");
    CHECK(lex.total_count() == static_cast<std::int64_t>(entries.size()));
    auto shuffled = entries;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(build_domain_lexicon(shuffled, "d") == lex);
  }
}

TEST_CASE("filter_lexicon") {
  CHECK(filter_lexicon(lex_of({{"power", {{"权力", 3}, {"系统", 1}}}}), 2, {}).entries ==
        std::map<std::string, TranslationCounts>{{"power", {{"权力", 3}}}});
  CHECK(filter_lexicon(lex_of({{"the", {{"的", 100}}}}), 1, {"the"}).entries.empty());
  CHECK(filter_lexicon(lex_of({{".", {{"。", 50}}}, {"law", {{"法", 2}}}}), 1, {}).entries ==
        std::map<std::string, TranslationCounts>{{"law", {{"法", 2}}}});
  CHECK_THROWS_AS(filter_lexicon(lex_of({}), 0, {}), Error);
}

TEST_CASE("filter_lexicon: identity at min_count 1, idempotent otherwise") {
  std::mt19937 rng(11);
  for (int iter = 0; iter < 100; ++iter) {
    const auto lexicons = testing::random_lexicons(rng, 2, 30, 4);
    for (const auto &[d, lex] : lexicons) {
      CHECK(filter_lexicon(lex, 1, {}) == lex);
      const auto once = filter_lexicon(lex, 4, {"w1", "w2"});
      CHECK(filter_lexicon(once, 4, {"w1", "w2"}) == once);
      for (const auto &[s, ts] : once.entries) {
        CHECK_FALSE(ts.empty());
        for (const auto &[t, c] : ts) CHECK(c >= 4);
      }
    }
  }
}

TEST_CASE("lexicon TSV is sorted by source then descending count and round-trips") {
  auto lex = lex_of({{"power", {{"能量", 1}, {"权力", 3}, {"力", 3}}}, {"basin", {{"盆", 2}}}});
  const auto tsv = lexicon_to_tsv(lex);
  CHECK(tsv ==
        "laws\tbasin\t盆\t2\n"
        "laws\tpower\t力\t3\n"
        "laws\tpower\t权力\t3\n"
        "laws\tpower\t能量\t1\n");
  const auto back = lexicons_from_tsv(tsv);
  REQUIRE(back.count("laws"));
  CHECK(back.at("laws") == lex);
  CHECK_THROWS_AS(lexicons_from_tsv("laws\tpower\t权力\n"), Error);
  CHECK_THROWS_AS(lexicons_from_tsv("laws\tpower\t权力\t0\n"), Error);
}

TEST_CASE("corpus lexicons from the bundled fixture") {
  const auto corpus = load_corpus(testing::fixture("tiny/manifest.json"));
  const auto lexicons = build_corpus_lexicons(corpus);
  REQUIRE(lexicons.size() == 2);
  CHECK(lexicons.at("laws").entries.at("power") == TranslationCounts{{"权", 2}});
  CHECK(lexicons.at("science").entries.at("power") == TranslationCounts{{"能", 2}});
  CHECK(lexicons.at("laws").entries.at("of") == TranslationCounts{{"的", 4}});
  const auto examples = collect_examples(corpus, {});
  CHECK(examples.at("laws").at({"power", "权"}) == std::vector<int>{1, 2});
}
