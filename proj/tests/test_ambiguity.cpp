#include <doctest.h>

#include "ambig/ambiguity.hpp"
#include "support.hpp"

using namespace ambig;

namespace {

DomainLexicon lex(const std::string &domain, std::map<std::string, TranslationCounts> entries) {
  DomainLexicon l;
  l.domain = domain;
  l.entries = std::move(entries);
  return l;
}

SentencePair sentence(const std::string &domain, int line_no, std::vector<std::string> tokens) {
  SentencePair p;
  p.domain = domain;
  p.split = Split::test;
  p.line_no = line_no;
  p.source_tokens = std::move(tokens);
  p.target_tokens = {"x"};
  return p;
}

AmbiguousVocabulary power_vocab() {
  AmbiguousVocabulary v;
  v.domain = "news";
  v.entries["power"] = {"power", {"权力"}, {{"能量", "science"}}};
  return v;
}

}  // namespace

TEST_CASE("power is ambiguous between law and science") {
  const auto out = build_ambiguous_vocabulary(
      {{"law", lex("law", {{"power", {{"权力", 3}}}})},
       {"science", lex("science", {{"power", {{"能量", 1}}}})}});
  REQUIRE(out.at("law").entries.count("power"));
  const auto &e = out.at("law").entries.at("power");
  CHECK(e.in_domain == std::set<std::string>{"权力"});
  CHECK(e.distractors == std::set<Distractor>{{"能量", "science"}});
  const auto &s = out.at("science").entries.at("power");
  CHECK(s.in_domain == std::set<std::string>{"能量"});
  CHECK(s.distractors == std::set<Distractor>{{"权力", "law"}});
}

TEST_CASE("identical translation sets are not ambiguous") {
  const auto out = build_ambiguous_vocabulary({{"a", lex("a", {{"power", {{"权力", 3}}}})},
                                               {"b", lex("b", {{"power", {{"权力", 9}}}})},
                                               {"c", lex("c", {{"power", {{"权力", 1}}}})}});
  for (const auto &[d, v] : out) CHECK(v.entries.empty());
}

TEST_CASE("a word seen only in other domains is not an entry") {
  const auto out = build_ambiguous_vocabulary(
      {{"a", lex("a", {{"cell", {{"胞", 2}}}})}, {"b", lex("b", {{"power", {{"权", 2}}}})}});
  CHECK(out.at("a").entries.empty());
  CHECK(out.at("b").entries.empty());
}

TEST_CASE("subset translation sets are ambiguous in one direction only") {
  const auto out = build_ambiguous_vocabulary(
      {{"a", lex("a", {{"s", {{"x", 1}}}})}, {"b", lex("b", {{"s", {{"x", 1}, {"y", 1}}}})}});
  CHECK(out.at("a").entries.at("s").distractors == std::set<Distractor>{{"y", "b"}});
  CHECK(out.at("b").entries.empty());
}

TEST_CASE("fewer than two domains is an error") {
  CHECK_THROWS_WITH_AS(build_ambiguous_vocabulary({{"a", lex("a", {})}}),
                       "ambiguity undefined for a single domain", Error);
  CHECK_THROWS_AS(build_ambiguous_vocabulary({}), Error);
}

TEST_CASE("build_ambiguous_vocabulary equals the brute-force oracle on random lexicons") {
  std::mt19937 rng(2024);
  for (int iter = 0; iter < 300; ++iter) {
    const auto lexicons = testing::random_lexicons(rng, 5, 50, 5);
    const auto got = build_ambiguous_vocabulary(lexicons);
    CHECK(testing::flatten(got) == testing::brute_force_ambiguity(lexicons));
    for (const auto &[d, v] : got) {
      CHECK(v.domain == d);
      for (const auto &[s, e] : v.entries) {
        CHECK_NOTHROW(check_entry(e));
        for (const auto &w : e.distractor_words()) CHECK_FALSE(e.in_domain.count(w));
      }
    }
  }
}

TEST_CASE("relabeling domains renames but never changes the structure") {
  std::mt19937 rng(99);
  for (int iter = 0; iter < 50; ++iter) {
    const auto lexicons = testing::random_lexicons(rng, 4, 20, 3);
    std::map<std::string, DomainLexicon> renamed;
    auto rename = [](const std::string &d) { return "zz-" + d; };
    for (const auto &[d, l] : lexicons) {
      auto copy = l;
      copy.domain = rename(d);
      renamed[rename(d)] = copy;
    }
    const auto a = build_ambiguous_vocabulary(lexicons);
    const auto b = build_ambiguous_vocabulary(renamed);
    for (const auto &[d, v] : a) {
      const auto &w = b.at(rename(d));
      REQUIRE(w.entries.size() == v.entries.size());
      for (const auto &[s, e] : v.entries) {
        const auto &f = w.entries.at(s);
        CHECK(f.in_domain == e.in_domain);
        std::set<Distractor> expect;
        for (const auto &x : e.distractors) expect.insert({x.word, rename(x.origin)});
        CHECK(f.distractors == expect);
      }
    }
  }
}

TEST_CASE("annotate_test_set") {
  const auto vocab = power_vocab();
  const auto news = sentence("news", 1, {"It", "'s", "clear", "he", "does", "n't", "have", "any", "power", "."});
  auto occ = annotate_test_set({&news}, vocab);
  REQUIRE(occ.size() == 1);
  CHECK(occ[0].token_index == 8);
  CHECK(occ[0].line_no == 1);
  CHECK(occ[0].expected == std::set<std::string>{"权力"});
  CHECK(occ[0].distractors == std::set<std::string>{"能量"});

  const auto none = sentence("news", 2, {"nothing", "here"});
  CHECK(annotate_test_set({&none}, vocab).empty());

  const auto twice = sentence("news", 3, {"Power", "to", "power"});
  occ = annotate_test_set({&twice}, vocab);
  REQUIRE(occ.size() == 2);
  CHECK(occ[0].token_index == 0);
  CHECK(occ[1].token_index == 2);

  const auto other = sentence("laws", 4, {"power"});
  CHECK_THROWS_AS(annotate_test_set({&other}, vocab), Error);
}

TEST_CASE("annotation completeness on random sentences") {
  std::mt19937 rng(5);
  AmbiguousVocabulary vocab;
  vocab.domain = "d";
  for (const char *w : {"a", "c", "e"}) vocab.entries[w] = {w, {"X"}, {{"Y", "o"}}};
  const std::vector<std::string> pool{"a", "b", "c", "d", "e", "A", "f"};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<SentencePair> sents;
    for (int i = 1; i <= 5; ++i) {
      std::vector<std::string> toks;
      for (int k = 0; k < 8; ++k) toks.push_back(pool[pick(rng)]);
      sents.push_back(sentence("d", i, toks));
    }
    std::vector<const SentencePair *> ptrs;
    for (const auto &s : sents) ptrs.push_back(&s);
    std::set<std::pair<int, int>> expected;
    for (const auto &s : sents)
      for (int k = 0; k < 8; ++k) {
        const auto &t = s.source_tokens[k];
        if (t == "a" || t == "A" || t == "c" || t == "e") expected.insert({s.line_no, k});
      }
    std::set<std::pair<int, int>> got;
    const auto occ = annotate_test_set(ptrs, vocab);
    for (const auto &o : occ) got.insert({o.line_no, o.token_index});
    CHECK(got.size() == occ.size());
    CHECK(got == expected);
  }
}

TEST_CASE("ambiguity_stats") {
  AnnotatedOccurrence a{"d", 1, 0, "power", {"x"}, {"y"}};
  AnnotatedOccurrence b{"d", 1, 5, "power", {"x"}, {"y"}};
  auto stats = ambiguity_stats({{"d", {a, b}}});
  CHECK(stats.at("d") == AmbiguityStats{2, 1, 1});
  stats = ambiguity_stats({{"d", {}}});
  CHECK(stats.at("d") == AmbiguityStats{0, 0, 0});
  CHECK(ambiguity_stats({}).empty());
}

TEST_CASE("ambiguity_stats matches a naive recount") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> line(1, 10), idx(0, 9), word(0, 5), n(0, 40);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<AnnotatedOccurrence> occ;
    for (int i = n(rng); i > 0; --i)
      occ.push_back({"d", line(rng), idx(rng), (word(rng) % 2 ? "W" : "w") + std::to_string(word(rng)), {"x"}, {"y"}});
    std::set<int> lines;
    std::set<std::string> words;
    for (const auto &o : occ) {
      lines.insert(o.line_no);
      std::string lower = o.source_word;
      for (auto &c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      words.insert(lower);
    }
    const auto s = ambiguity_stats({{"d", occ}}).at("d");
    CHECK(s.occurrences == occ.size());
    CHECK(s.sentences == lines.size());
    CHECK(s.distinct_words == words.size());
  }
}

TEST_CASE("vocabulary JSON and occurrence JSONL round-trip") {
  const auto v = power_vocab();
  CHECK(vocabulary_from_json(vocabulary_to_json(v)) == v);
  std::vector<AnnotatedOccurrence> occ{{"news", 3, 1, "power", {"权力"}, {"能量"}},
                                       {"news", 4, 0, "power", {"权力"}, {"能量", "力"}}};
  CHECK(occurrences_from_jsonl(occurrences_to_jsonl(occ)) == occ);
  CHECK_THROWS_AS(vocabulary_from_json("{\"domain\": 1}"), Error);
}
