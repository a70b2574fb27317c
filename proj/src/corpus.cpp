#include "ambig/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ambig/error.hpp"
#include "ambig/text.hpp"

namespace ambig {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_valid_domain_id(std::string_view id) {
  if (id.empty()) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

std::string_view to_string(Split s) {
  return s == Split::train ? "train" : "test";
}

const Domain *Corpus::find_domain(std::string_view id) const {
  for (const auto &d : domains)
    if (d.id == id) return &d;
  return nullptr;
}

std::vector<const SentencePair *> Corpus::split_pairs(std::string_view domain,
                                                      Split split) const {
  std::vector<const SentencePair *> out;
  for (const auto &p : pairs)
    if (p.domain == domain && p.split == split) out.push_back(&p);
  return out;
}

std::vector<Corpus::AlignedPair> Corpus::aligned_train(
    std::string_view domain) const {
  std::vector<AlignedPair> out;
  std::size_t k = 0;
  for (const auto &p : pairs) {
    if (p.split != Split::train) continue;
    if (p.domain == domain) out.push_back({&p, &alignments.at(k)});
    ++k;
  }
  return out;
}

namespace {

struct LanguageInfo {
  std::string_view code;
  Script script;
};

constexpr LanguageInfo kLanguages[] = {
    {"en", Script::spaced}, {"de", Script::spaced}, {"fr", Script::spaced},
    {"es", Script::spaced}, {"it", Script::spaced}, {"pt", Script::spaced},
    {"nl", Script::spaced}, {"ru", Script::spaced}, {"cs", Script::spaced},
    {"pl", Script::spaced}, {"ro", Script::spaced}, {"tr", Script::spaced},
    {"zh", Script::cjk},    {"ja", Script::cjk},    {"ko", Script::cjk},
};

bool is_ascii_alnum(char32_t cp) {
  return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') ||
         (cp >= '0' && cp <= '9');
}

bool is_joiner(char32_t cp) {
  return cp == '\'' || cp == U'’' || cp == '-' || cp == '.' || cp == ',';
}

void tokenize_spaced_chunk(const std::vector<char32_t> &cps,
                           std::vector<std::string> &out) {
  std::vector<char32_t> cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(text::encode(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    char32_t cp = cps[i];
    if (!text::is_punct(cp)) {
      cur.push_back(cp);
      continue;
    }
    bool inner = is_joiner(cp) && !cur.empty() && text::is_alnum(cur.back()) &&
                 i + 1 < cps.size() && text::is_alnum(cps[i + 1]);
    if (inner) {
      cur.push_back(cp);
      continue;
    }
    flush();
    out.push_back(text::encode(cp));
  }
  flush();
}

void tokenize_cjk(const std::vector<char32_t> &cps,
                  std::vector<std::string> &out) {
  std::string run;
  auto flush = [&] {
    if (!run.empty()) out.push_back(run);
    run.clear();
  };
  for (char32_t cp : cps) {
    if (is_ascii_alnum(cp)) {
      run += static_cast<char>(cp);
      continue;
    }
    flush();
    if (!text::is_space(cp)) out.push_back(text::encode(cp));
  }
  flush();
}

}  // namespace

bool is_known_language(std::string_view lang) {
  return std::any_of(std::begin(kLanguages), std::end(kLanguages),
                     [&](const auto &l) { return l.code == lang; });
}

Script language_script(std::string_view lang) {
  for (const auto &l : kLanguages)
    if (l.code == lang) return l.script;
  throw Error("unknown language code: " + std::string(lang));
}

std::vector<std::string> tokenize(std::string_view raw, std::string_view lang) {
  const Script script = language_script(lang);
  const std::string normalized = text::nfc(raw);
  const auto cps = text::decode(normalized);
  std::vector<std::string> out;
  if (script == Script::cjk) {
    tokenize_cjk(cps, out);
    return out;
  }
  std::vector<char32_t> chunk;
  for (char32_t cp : cps) {
    if (text::is_space(cp)) {
      tokenize_spaced_chunk(chunk, out);
      chunk.clear();
    } else {
      chunk.push_back(cp);
    }
  }
  tokenize_spaced_chunk(chunk, out);
  return out;
}

std::vector<AlignmentLink> parse_alignment_line(std::string_view line) {
  std::vector<AlignmentLink> links;
  std::size_t pos = 0;
  int token_no = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' ||
                                 line[pos] == '\r'))
      ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' &&
           line[end] != '\r')
      ++end;
    ++token_no;
    std::string_view tok = line.substr(pos, end - pos);
    const int column = static_cast<int>(pos) + 1;
    auto fail = [&] {
      throw ParseError("malformed alignment token '" + std::string(tok) +
                           "' at token " + std::to_string(token_no) +
                           ", column " + std::to_string(column),
                       token_no, column);
    };
    auto dash = tok.find('-');
    if (dash == std::string_view::npos || dash == 0 || dash + 1 == tok.size())
      fail();
    AlignmentLink link;
    auto parse_int = [&](std::string_view s, int &v) {
      if (s.empty() || s[0] == '+' || s[0] == '-') fail();
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) fail();
    };
    parse_int(tok.substr(0, dash), link.src_index);
    parse_int(tok.substr(dash + 1), link.tgt_index);
    links.push_back(link);
    pos = end;
  }
  return links;
}

std::string format_alignment_line(const std::vector<AlignmentLink> &links) {
  std::string out;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(links[i].src_index) + "-" +
           std::to_string(links[i].tgt_index);
  }
  return out;
}

std::vector<std::string> read_lines(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

namespace {

void check_same_length(const fs::path &a, std::size_t na, const fs::path &b,
                       std::size_t nb) {
  if (na == nb) return;
  throw Error("line count mismatch: " + a.string() + " has " +
              std::to_string(na) + " lines, " + b.string() + " has " +
              std::to_string(nb) + " lines (first mismatching line " +
              std::to_string(std::min(na, nb) + 1) + ")");
}

fs::path resolve(const fs::path &base, const json &entry, const char *key,
                 const std::string &domain) {
  if (!entry.contains(key) || !entry[key].is_string())
    throw Error("manifest: domain '" + domain + "' is missing '" + key + "'");
  fs::path p = entry[key].get<std::string>();
  return p.is_absolute() ? p : base / p;
}

void load_split(Corpus &corpus, const std::string &domain, Split split,
                const fs::path &src_path, const fs::path &tgt_path,
                const fs::path *align_path) {
  const auto src = read_lines(src_path);
  const auto tgt = read_lines(tgt_path);
  check_same_length(src_path, src.size(), tgt_path, tgt.size());
  std::vector<std::string> align;
  if (align_path) {
    align = read_lines(*align_path);
    check_same_length(src_path, src.size(), *align_path, align.size());
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    SentencePair p;
    p.domain = domain;
    p.split = split;
    p.line_no = static_cast<int>(i) + 1;
    p.source_text = text::nfc(text::trim(src[i]));
    p.target_text = text::nfc(text::trim(tgt[i]));
    p.source_tokens = tokenize(p.source_text, corpus.source_lang);
    p.target_tokens = tokenize(p.target_text, corpus.target_lang);
    if (p.source_tokens.empty())
      throw Error("empty sentence: " + src_path.string() + ":" +
                  std::to_string(p.line_no));
    if (p.target_tokens.empty())
      throw Error("empty sentence: " + tgt_path.string() + ":" +
                  std::to_string(p.line_no));
    if (align_path) {
      std::vector<AlignmentLink> links;
      try {
        links = parse_alignment_line(align[i]);
      } catch (const ParseError &e) {
        throw ParseError(align_path->string() + ":" +
                             std::to_string(p.line_no) + ": " + e.what(),
                         e.token(), e.column());
      }
      for (const auto &l : links) {
        if (l.src_index >= static_cast<int>(p.source_tokens.size()) ||
            l.tgt_index >= static_cast<int>(p.target_tokens.size()))
          throw Error("alignment link " + std::to_string(l.src_index) + "-" +
                      std::to_string(l.tgt_index) + " out of bounds at " +
                      align_path->string() + ":" + std::to_string(p.line_no) +
                      " (source has " + std::to_string(p.source_tokens.size()) +
                      " tokens, target has " +
                      std::to_string(p.target_tokens.size()) + ")");
      }
      corpus.alignments.push_back(std::move(links));
    }
    corpus.pairs.push_back(std::move(p));
  }
}

}  // namespace

Corpus load_corpus(const fs::path &manifest_path) {
  if (!fs::exists(manifest_path))
    throw Error("missing file: " + manifest_path.string());
  json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = json::parse(in);
  } catch (const json::exception &e) {
    throw Error("manifest " + manifest_path.string() +
                " is not valid JSON: " + e.what());
  }
  const fs::path base = manifest_path.parent_path();

  Corpus corpus;
  if (!manifest.contains("language_pair"))
    throw Error("manifest: missing language_pair");
  const auto &lp = manifest["language_pair"];
  if (!lp.is_array() || lp.size() != 2)
    throw Error("manifest: language_pair must be [source, target]");
  corpus.source_lang = lp[0].get<std::string>();
  corpus.target_lang = lp[1].get<std::string>();
  language_script(corpus.source_lang);
  language_script(corpus.target_lang);

  if (!manifest.contains("domains") || !manifest["domains"].is_array() ||
      manifest["domains"].empty())
    throw Error("manifest: no domains listed");

  std::set<std::string> seen;
  for (const auto &entry : manifest["domains"]) {
    Domain d;
    d.id = entry.at("id").get<std::string>();
    d.display_name = entry.value("name", d.id);
    if (!is_valid_domain_id(d.id))
      throw Error("manifest: invalid domain id '" + d.id +
                  "' (must match [a-z0-9_-]+)");
    if (!seen.insert(d.id).second)
      throw Error("manifest: duplicate domain id '" + d.id + "'");
    corpus.domains.push_back(d);

    const auto train_src = resolve(base, entry, "train_src", d.id);
    const auto train_tgt = resolve(base, entry, "train_tgt", d.id);
    const auto train_align = resolve(base, entry, "train_align", d.id);
    const auto test_src = resolve(base, entry, "test_src", d.id);
    const auto test_tgt = resolve(base, entry, "test_tgt", d.id);
    load_split(corpus, d.id, Split::train, train_src, train_tgt, &train_align);
    load_split(corpus, d.id, Split::test, test_src, test_tgt, nullptr);
  }
  validate_corpus(corpus);
  return corpus;
}

void validate_corpus(const Corpus &corpus) {
  std::set<std::string> ids;
  for (const auto &d : corpus.domains) {
    if (!is_valid_domain_id(d.id)) throw Error("invalid domain id: " + d.id);
    if (!ids.insert(d.id).second) throw Error("duplicate domain id: " + d.id);
  }
  std::size_t train = 0;
  for (const auto &p : corpus.pairs) {
    if (!ids.count(p.domain)) throw Error("pair references unknown domain " + p.domain);
    if (p.source_tokens.empty() || p.target_tokens.empty())
      throw Error("empty token sequence in domain " + p.domain);
    if (p.line_no < 1) throw Error("line_no must be >= 1");
    if (p.split != Split::train) continue;
    if (train >= corpus.alignments.size())
      throw Error("alignment list shorter than train pairs");
    for (const auto &l : corpus.alignments[train]) {
      if (l.src_index < 0 || l.tgt_index < 0 ||
          l.src_index >= static_cast<int>(p.source_tokens.size()) ||
          l.tgt_index >= static_cast<int>(p.target_tokens.size()))
        throw Error("alignment link out of bounds in domain " + p.domain +
                    " line " + std::to_string(p.line_no));
    }
    ++train;
  }
  if (train != corpus.alignments.size())
    throw Error("alignment list length does not match train pairs");
}

}  // namespace ambig
