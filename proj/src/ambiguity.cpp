#include "ambig/ambiguity.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "ambig/checksum.hpp"
#include "ambig/error.hpp"

namespace ambig {

namespace fs = std::filesystem;
using nlohmann::json;

std::set<std::string> AmbiguousEntry::distractor_words() const {
  std::set<std::string> out;
  for (const auto &d : distractors) out.insert(d.word);
  return out;
}

void check_entry(const AmbiguousEntry &entry) {
  if (entry.in_domain.empty())
    throw Error("ambiguous entry '" + entry.source_word +
                "' has no in-domain translation");
  if (entry.distractors.empty())
    throw Error("ambiguous entry '" + entry.source_word + "' has no distractor");
  for (const auto &d : entry.distractors)
    if (entry.in_domain.count(d.word))
      throw Error("ambiguous entry '" + entry.source_word + "': distractor '" +
                  d.word + "' is also an in-domain translation");
}

std::map<std::string, AmbiguousVocabulary> build_ambiguous_vocabulary(
    const std::map<std::string, DomainLexicon> &lexicons) {
  if (lexicons.size() < 2)
    throw Error("ambiguity undefined for a single domain");

  // Invert once: source word -> domain -> translation set.
  std::map<std::string, std::map<std::string, std::set<std::string>>> by_word;
  for (const auto &[domain, lex] : lexicons)
    for (const auto &[src, targets] : lex.entries)
      for (const auto &[tgt, count] : targets)
        if (count > 0) by_word[src][domain].insert(tgt);

  std::map<std::string, AmbiguousVocabulary> out;
  for (const auto &[domain, lex] : lexicons) out[domain].domain = domain;

  for (const auto &[src, per_domain] : by_word) {
    if (per_domain.size() < 2) continue;
    for (const auto &[domain, own] : per_domain) {
      AmbiguousEntry entry;
      for (const auto &[other, theirs] : per_domain) {
        if (other == domain) continue;
        for (const auto &t : theirs)
          if (!own.count(t)) entry.distractors.insert({t, other});
      }
      if (entry.distractors.empty()) continue;
      entry.source_word = src;
      entry.in_domain = own;
      out[domain].entries.emplace(src, std::move(entry));
    }
  }
  return out;
}

std::vector<AnnotatedOccurrence> annotate_test_set(
    const std::vector<const SentencePair *> &test_pairs,
    const AmbiguousVocabulary &vocab, const NormalizeOptions &opts) {
  std::vector<AnnotatedOccurrence> out;
  for (const auto *pair : test_pairs) {
    if (pair->domain != vocab.domain)
      throw Error("annotate: sentence from domain '" + pair->domain +
                  "' does not match vocabulary domain '" + vocab.domain + "'");
    for (std::size_t i = 0; i < pair->source_tokens.size(); ++i) {
      auto word = normalize_word(pair->source_tokens[i], opts);
      auto it = vocab.entries.find(word);
      if (it == vocab.entries.end()) continue;
      AnnotatedOccurrence occ;
      occ.domain = vocab.domain;
      occ.line_no = pair->line_no;
      occ.token_index = static_cast<int>(i);
      occ.source_word = word;
      occ.expected = it->second.in_domain;
      occ.distractors = it->second.distractor_words();
      out.push_back(std::move(occ));
    }
  }
  return out;
}

std::map<std::string, AmbiguityStats> ambiguity_stats(
    const std::map<std::string, std::vector<AnnotatedOccurrence>> &annotations,
    const NormalizeOptions &opts) {
  std::map<std::string, AmbiguityStats> out;
  for (const auto &[domain, occs] : annotations) {
    std::set<std::string> words;
    std::set<int> lines;
    for (const auto &o : occs) {
      words.insert(normalize_word(o.source_word, opts));
      lines.insert(o.line_no);
    }
    out[domain] = {occs.size(), words.size(), lines.size()};
  }
  return out;
}

std::string vocabulary_to_json(const AmbiguousVocabulary &vocab) {
  json j;
  j["domain"] = vocab.domain;
  j["entries"] = json::array();
  for (const auto &[src, e] : vocab.entries) {
    json d = json::array();
    for (const auto &x : e.distractors)
      d.push_back({{"word", x.word}, {"origin", x.origin}});
    j["entries"].push_back(
        {{"source", src}, {"in_domain", e.in_domain}, {"distractors", d}});
  }
  return j.dump(2) + "\n";
}

AmbiguousVocabulary vocabulary_from_json(std::string_view json_text) {
  AmbiguousVocabulary v;
  try {
    auto j = json::parse(json_text);
    v.domain = j.at("domain").get<std::string>();
    for (const auto &e : j.at("entries")) {
      AmbiguousEntry entry;
      entry.source_word = e.at("source").get<std::string>();
      for (const auto &w : e.at("in_domain")) entry.in_domain.insert(w.get<std::string>());
      for (const auto &d : e.at("distractors"))
        entry.distractors.insert(
            {d.at("word").get<std::string>(), d.at("origin").get<std::string>()});
      check_entry(entry);
      v.entries.emplace(entry.source_word, std::move(entry));
    }
  } catch (const json::exception &e) {
    throw Error(std::string("invalid vocabulary JSON: ") + e.what());
  }
  return v;
}

void write_vocabulary(const fs::path &path, const AmbiguousVocabulary &vocab) {
  write_file_atomic(path, vocabulary_to_json(vocab));
}

AmbiguousVocabulary read_vocabulary(const fs::path &path) {
  return vocabulary_from_json(read_file(path));
}

std::map<std::string, AmbiguousVocabulary> read_vocabulary_dir(const fs::path &dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::map<std::string, AmbiguousVocabulary> out;
  for (const auto &f : files) {
    auto v = read_vocabulary(f);
    auto domain = v.domain;
    out.emplace(domain, std::move(v));
  }
  return out;
}

std::string occurrences_to_jsonl(const std::vector<AnnotatedOccurrence> &occ) {
  std::string out;
  for (const auto &o : occ) {
    json j = {{"domain", o.domain},           {"line_no", o.line_no},
              {"token_index", o.token_index}, {"source_word", o.source_word},
              {"expected", o.expected},       {"distractors", o.distractors}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<AnnotatedOccurrence> occurrences_from_jsonl(std::string_view text) {
  std::vector<AnnotatedOccurrence> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      AnnotatedOccurrence o;
      o.domain = j.value("domain", "");
      o.line_no = j.at("line_no").get<int>();
      o.token_index = j.at("token_index").get<int>();
      o.source_word = j.at("source_word").get<std::string>();
      o.expected = j.at("expected").get<std::set<std::string>>();
      o.distractors = j.at("distractors").get<std::set<std::string>>();
      if (o.expected.empty())
        throw Error("annotation line " + std::to_string(n) +
                    ": expected set is empty");
      out.push_back(std::move(o));
    } catch (const json::exception &e) {
      throw Error("annotation line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_occurrences(const fs::path &path,
                       const std::vector<AnnotatedOccurrence> &occ) {
  write_file_atomic(path, occurrences_to_jsonl(occ));
}

std::vector<AnnotatedOccurrence> read_occurrences(const fs::path &path) {
  return occurrences_from_jsonl(read_file(path));
}

}  // namespace ambig
