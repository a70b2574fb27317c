#include "ambig/lexicon.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "ambig/checksum.hpp"
#include "ambig/error.hpp"
#include "ambig/text.hpp"

namespace ambig {

namespace fs = std::filesystem;

std::string normalize_word(std::string_view word, const NormalizeOptions &opts) {
  std::string w = text::nfc(word);
  return opts.casefold ? text::lowercase(w) : w;
}

std::int64_t DomainLexicon::total_count() const {
  std::int64_t sum = 0;
  for (const auto &[src, targets] : entries)
    for (const auto &[tgt, c] : targets) sum += c;
  return sum;
}

std::size_t DomainLexicon::pair_count() const {
  std::size_t n = 0;
  for (const auto &[src, targets] : entries) n += targets.size();
  return n;
}

std::vector<BilingualEntry> extract_pairs(const SentencePair &pair,
                                          const std::vector<AlignmentLink> &links,
                                          const NormalizeOptions &opts) {
  std::vector<BilingualEntry> out;
  out.reserve(links.size());
  for (const auto &l : links) {
    out.push_back({normalize_word(pair.source_tokens.at(l.src_index), opts),
                   normalize_word(pair.target_tokens.at(l.tgt_index), opts), 1});
  }
  return out;
}

DomainLexicon build_domain_lexicon(const std::vector<BilingualEntry> &entries,
                                   std::string domain) {
  DomainLexicon lex;
  lex.domain = std::move(domain);
  for (const auto &e : entries) lex.entries[e.source_word][e.target_word] += e.count;
  return lex;
}

DomainLexicon filter_lexicon(const DomainLexicon &lex, std::int64_t min_count,
                             const std::set<std::string> &stopwords) {
  if (min_count < 1) throw Error("min_count must be >= 1");
  DomainLexicon out;
  out.domain = lex.domain;
  for (const auto &[src, targets] : lex.entries) {
    if (stopwords.count(src) || text::is_punct_token(src)) continue;
    TranslationCounts kept;
    for (const auto &[tgt, c] : targets)
      if (c >= min_count && !text::is_punct_token(tgt)) kept.emplace(tgt, c);
    if (!kept.empty()) out.entries.emplace(src, std::move(kept));
  }
  return out;
}

std::map<std::string, DomainLexicon> build_corpus_lexicons(
    const Corpus &corpus, const NormalizeOptions &opts) {
  std::map<std::string, DomainLexicon> out;
  for (const auto &d : corpus.domains) {
    std::vector<BilingualEntry> entries;
    for (const auto &[pair, links] : corpus.aligned_train(d.id)) {
      auto e = extract_pairs(*pair, *links, opts);
      entries.insert(entries.end(), e.begin(), e.end());
    }
    out.emplace(d.id, build_domain_lexicon(entries, d.id));
  }
  return out;
}

ExampleIndex collect_examples(const Corpus &corpus, const NormalizeOptions &opts,
                              std::size_t max_per_pair) {
  ExampleIndex index;
  for (const auto &d : corpus.domains) {
    auto &dom = index[d.id];
    for (const auto &[pair, links] : corpus.aligned_train(d.id)) {
      for (const auto &e : extract_pairs(*pair, *links, opts)) {
        auto &lines = dom[{e.source_word, e.target_word}];
        if (lines.size() < max_per_pair &&
            (lines.empty() || lines.back() != pair->line_no))
          lines.push_back(pair->line_no);
      }
    }
  }
  return index;
}

std::string lexicon_to_tsv(const DomainLexicon &lex) {
  std::ostringstream out;
  for (const auto &[src, targets] : lex.entries) {
    std::vector<std::pair<std::string, std::int64_t>> rows(targets.begin(),
                                                           targets.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto &a, const auto &b) {
      return a.second > b.second;
    });
    for (const auto &[tgt, c] : rows)
      out << lex.domain << '\t' << src << '\t' << tgt << '\t' << c << '\n';
  }
  return out.str();
}

std::map<std::string, DomainLexicon> lexicons_from_tsv(std::string_view tsv) {
  std::map<std::string, DomainLexicon> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < tsv.size()) {
    auto nl = tsv.find('\n', pos);
    std::string_view line = tsv.substr(pos, nl == std::string_view::npos
                                                ? std::string_view::npos
                                                : nl - pos);
    pos = nl == std::string_view::npos ? tsv.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string_view::npos
                                            ? std::string_view::npos
                                            : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 4)
      throw ParseError("lexicon TSV line " + std::to_string(line_no) +
                           ": expected 4 columns, got " +
                           std::to_string(cols.size()),
                       static_cast<int>(cols.size()), 1);
    std::int64_t count = 0;
    auto [p, ec] = std::from_chars(cols[3].data(), cols[3].data() + cols[3].size(), count);
    if (ec != std::errc() || p != cols[3].data() + cols[3].size() || count < 1)
      throw ParseError("lexicon TSV line " + std::to_string(line_no) +
                           ": invalid count '" + std::string(cols[3]) + "'",
                       4, 1);
    auto &lex = out[std::string(cols[0])];
    lex.domain = std::string(cols[0]);
    lex.entries[std::string(cols[1])][std::string(cols[2])] += count;
  }
  return out;
}

void write_lexicon(const fs::path &path, const DomainLexicon &lex) {
  write_file_atomic(path, lexicon_to_tsv(lex));
}

std::map<std::string, DomainLexicon> read_lexicon_dir(const fs::path &dir) {
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.path().extension() == ".tsv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::map<std::string, DomainLexicon> out;
  for (const auto &f : files) {
    for (auto &[domain, lex] : lexicons_from_tsv(read_file(f))) {
      auto &dst = out[domain];
      dst.domain = domain;
      for (auto &[src, targets] : lex.entries)
        for (auto &[tgt, c] : targets) dst.entries[src][tgt] += c;
    }
  }
  return out;
}

std::set<std::string> read_stopwords(const fs::path &path) {
  std::set<std::string> out;
  for (const auto &line : read_lines(path)) {
    auto w = text::trim(line);
    if (!w.empty() && w[0] != '#') out.insert(w);
  }
  return out;
}

}  // namespace ambig
