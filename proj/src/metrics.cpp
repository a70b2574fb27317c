#include "ambig/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <regex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "ambig/checksum.hpp"
#include "ambig/corpus.hpp"
#include "ambig/random.hpp"
#include "http_util.hpp"

namespace ambig {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// BLEU ----------------------------------------------------------------------

BleuStats &BleuStats::operator+=(const BleuStats &o) {
  for (int n = 0; n < 4; ++n) {
    correct[n] += o.correct[n];
    total[n] += o.total[n];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

namespace {

using NgramCounts = std::unordered_map<std::string, std::int64_t>;

NgramCounts count_ngrams(const std::vector<std::string> &toks, std::size_t n) {
  NgramCounts counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key += '\x1f';
      key += toks[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuStats bleu_stats(const std::vector<std::string> &hyp,
                     const std::vector<std::string> &ref) {
  BleuStats s;
  s.hyp_len = static_cast<std::int64_t>(hyp.size());
  s.ref_len = static_cast<std::int64_t>(ref.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    auto h = count_ngrams(hyp, n);
    auto r = count_ngrams(ref, n);
    s.total[n - 1] = std::max<std::int64_t>(0, s.hyp_len - static_cast<std::int64_t>(n) + 1);
    for (const auto &[gram, c] : h) {
      auto it = r.find(gram);
      if (it != r.end()) s.correct[n - 1] += std::min(c, it->second);
    }
  }
  return s;
}

BleuScore bleu_from_stats(const BleuStats &s) {
  BleuScore out;
  out.hyp_len = s.hyp_len;
  out.ref_len = s.ref_len;
  if (s.hyp_len < s.ref_len)
    out.brevity_penalty =
        s.hyp_len > 0 ? std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.hyp_len))
                      : 0.0;
  double smooth = 1.0;
  for (int n = 0; n < 4; ++n) {
    if (s.total[n] == 0) break;
    if (s.correct[n] == 0) {
      smooth *= 2.0;
      out.ngram_precisions[n] = 100.0 / (smooth * static_cast<double>(s.total[n]));
    } else {
      out.ngram_precisions[n] =
          100.0 * static_cast<double>(s.correct[n]) / static_cast<double>(s.total[n]);
    }
  }
  if (s.correct[0] == 0) {
    out.score = 0.0;
    return out;
  }
  double log_sum = 0.0;
  for (double p : out.ngram_precisions) log_sum += p > 0.0 ? std::log(p) : -9999999999.0;
  out.score = out.brevity_penalty * std::exp(log_sum / 4.0);
  return out;
}

BleuScore corpus_bleu(std::span<const EvalRecord> records, const std::string &target_language) {
  BleuStats total;
  std::size_t used = 0;
  for (const auto &r : records) {
    if (!r.ok()) continue;
    total += bleu_stats(tokenize(r.hypothesis, target_language),
                        tokenize(r.reference, target_language));
    ++used;
  }
  if (used == 0) throw Error("BLEU undefined: every record has an error");
  return bleu_from_stats(total);
}

std::string bleu_signature(const std::string &target_language) {
  return "nrefs:1|case:mixed|eff:no|tok:ambig-" + target_language + "|smooth:exp|version:1.0";
}

// Disambiguation -------------------------------------------------------------

MatchMode parse_match_mode(std::string_view s) {
  if (s == "lenient") return MatchMode::lenient;
  if (s == "strict") return MatchMode::strict;
  throw Error("unknown match mode '" + std::string(s) + "' (expected lenient or strict)");
}

std::string_view to_string(MatchMode m) {
  return m == MatchMode::lenient ? "lenient" : "strict";
}

std::optional<double> DisambiguationResult::accuracy() const {
  if (n == 0) return std::nullopt;
  return static_cast<double>(m) / static_cast<double>(n);
}

namespace {

std::vector<std::string> normalized_tokens(const std::string &text, const std::string &lang,
                                           const NormalizeOptions &opts) {
  auto toks = tokenize(text, lang);
  for (auto &t : toks) t = normalize_word(t, opts);
  return toks;
}

bool contains_run(const std::vector<std::string> &hay, const std::vector<std::string> &needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

bool occurrence_correct(const std::vector<std::string> &hyp_tokens,
                        const AnnotatedOccurrence &occ, MatchMode mode,
                        const std::string &target_language, const NormalizeOptions &opts) {
  bool hit = false;
  for (const auto &e : occ.expected)
    if (contains_run(hyp_tokens, normalized_tokens(e, target_language, opts))) {
      hit = true;
      break;
    }
  if (!hit || mode == MatchMode::lenient) return hit;
  for (const auto &d : occ.distractors) {
    if (occ.expected.count(d)) continue;
    if (contains_run(hyp_tokens, normalized_tokens(d, target_language, opts))) return false;
  }
  return true;
}

DisambiguationResult disambiguation_accuracy(std::span<const EvalRecord> records,
                                             std::span<const AnnotatedOccurrence> annotations,
                                             MatchMode mode, const std::string &target_language,
                                             const NormalizeOptions &opts, Diagnostics *diag) {
  std::map<std::pair<std::string, int>, const EvalRecord *> by_key;
  std::map<int, const EvalRecord *> by_line;
  for (const auto &r : records) {
    by_key[{r.domain, r.line_no}] = &r;
    by_line[r.line_no] = &r;
  }
  std::map<const EvalRecord *, std::vector<std::string>> hyp_cache;
  DisambiguationResult out;
  std::size_t missing = 0;
  for (const auto &occ : annotations) {
    const EvalRecord *rec = nullptr;
    if (!occ.domain.empty()) {
      auto it = by_key.find({occ.domain, occ.line_no});
      if (it != by_key.end()) rec = it->second;
    } else {
      auto it = by_line.find(occ.line_no);
      if (it != by_line.end()) rec = it->second;
    }
    if (!rec) {
      ++missing;
      continue;
    }
    if (!rec->ok()) continue;
    auto [it, fresh] = hyp_cache.try_emplace(rec);
    if (fresh) it->second = normalized_tokens(rec->hypothesis, target_language, opts);
    ++out.n;
    if (occurrence_correct(it->second, occ, mode, target_language, opts)) ++out.m;
  }
  if (missing)
    warn(diag, std::to_string(missing) +
                   " annotation(s) reference line numbers missing from the run; skipped");
  return out;
}

// Bootstrap ------------------------------------------------------------------

SentenceMetric bleu_metric(const std::string &target_language) {
  SentenceMetric m;
  m.name = "bleu";
  m.stats = [target_language](const EvalRecord &r) {
    std::vector<double> v(10, 0.0);
    if (!r.ok()) return v;
    auto s = bleu_stats(tokenize(r.hypothesis, target_language),
                        tokenize(r.reference, target_language));
    for (int n = 0; n < 4; ++n) {
      v[n] = static_cast<double>(s.correct[n]);
      v[4 + n] = static_cast<double>(s.total[n]);
    }
    v[8] = static_cast<double>(s.hyp_len);
    v[9] = static_cast<double>(s.ref_len);
    return v;
  };
  m.score = [](const std::vector<double> &v) {
    BleuStats s;
    for (int n = 0; n < 4; ++n) {
      s.correct[n] = static_cast<std::int64_t>(std::llround(v[n]));
      s.total[n] = static_cast<std::int64_t>(std::llround(v[4 + n]));
    }
    s.hyp_len = static_cast<std::int64_t>(std::llround(v[8]));
    s.ref_len = static_cast<std::int64_t>(std::llround(v[9]));
    return bleu_from_stats(s).score;
  };
  return m;
}

SentenceMetric disambiguation_metric(std::vector<AnnotatedOccurrence> annotations,
                                     MatchMode mode, const std::string &target_language,
                                     NormalizeOptions opts) {
  auto by_line = std::make_shared<std::map<std::pair<std::string, int>,
                                           std::vector<AnnotatedOccurrence>>>();
  for (auto &o : annotations) (*by_line)[{o.domain, o.line_no}].push_back(std::move(o));
  SentenceMetric m;
  m.name = "disamb";
  m.stats = [by_line, mode, target_language, opts](const EvalRecord &r) {
    std::vector<double> v(2, 0.0);
    if (!r.ok()) return v;
    auto it = by_line->find({r.domain, r.line_no});
    if (it == by_line->end()) it = by_line->find({std::string(), r.line_no});
    if (it == by_line->end()) return v;
    auto hyp = normalized_tokens(r.hypothesis, target_language, opts);
    for (const auto &occ : it->second) {
      v[1] += 1.0;
      if (occurrence_correct(hyp, occ, mode, target_language, opts)) v[0] += 1.0;
    }
    return v;
  };
  m.score = [](const std::vector<double> &v) { return v[1] > 0 ? 100.0 * v[0] / v[1] : 0.0; };
  return m;
}

SignificanceResult paired_bootstrap(std::span<const EvalRecord> records_a,
                                    std::span<const EvalRecord> records_b,
                                    const SentenceMetric &metric, int n_resamples,
                                    std::uint64_t seed) {
  if (n_resamples < 100) throw Error("n_resamples must be >= 100");
  if (records_a.size() != records_b.size())
    throw Error("paired bootstrap: record sets differ in size (" +
                std::to_string(records_a.size()) + " vs " + std::to_string(records_b.size()) + ")");
  if (records_a.empty()) throw Error("paired bootstrap: no records");

  auto sorted = [](std::span<const EvalRecord> rs) {
    std::vector<const EvalRecord *> v;
    for (const auto &r : rs) v.push_back(&r);
    std::sort(v.begin(), v.end(), [](auto *x, auto *y) {
      return std::tie(x->domain, x->line_no) < std::tie(y->domain, y->line_no);
    });
    return v;
  };
  auto a = sorted(records_a);
  auto b = sorted(records_b);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i]->line_no != b[i]->line_no || a[i]->domain != b[i]->domain)
      throw Error("paired bootstrap: record sets are not aligned on line_no (" + a[i]->domain +
                  ":" + std::to_string(a[i]->line_no) + " vs " + b[i]->domain + ":" +
                  std::to_string(b[i]->line_no) + ")");

  const std::size_t n = a.size();
  std::vector<std::vector<double>> sa(n), sb(n);
  for (std::size_t i = 0; i < n; ++i) {
    sa[i] = metric.stats(*a[i]);
    sb[i] = metric.stats(*b[i]);
  }
  const std::size_t dims = sa[0].size();
  auto total = [&](const std::vector<std::vector<double>> &s, const std::vector<std::size_t> *idx) {
    std::vector<double> acc(dims, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto &row = s[idx ? (*idx)[k] : k];
      for (std::size_t d = 0; d < dims; ++d) acc[d] += row[d];
    }
    return acc;
  };

  SignificanceResult out;
  out.n_resamples = n_resamples;
  out.score_a = metric.score(total(sa, nullptr));
  out.score_b = metric.score(total(sb, nullptr));
  const bool a_higher = out.score_a >= out.score_b;
  out.better_system = out.score_a == out.score_b ? "tie" : (a_higher ? "A" : "B");
  const auto &hi = a_higher ? sa : sb;
  const auto &lo = a_higher ? sb : sa;

  SeededRng rng(seed);
  std::vector<std::size_t> idx(n);
  int flips = 0;
  for (int s = 0; s < n_resamples; ++s) {
    for (auto &i : idx) i = static_cast<std::size_t>(rng.below(n));
    if (metric.score(total(lo, &idx)) >= metric.score(total(hi, &idx))) ++flips;
  }
  out.p_value = static_cast<double>(flips) / static_cast<double>(n_resamples);
  return out;
}

// Judge ----------------------------------------------------------------------

std::string judge_prompt_text(const EvalRecord &r) {
  return "source sentence: <" + r.source + ">, target sentence: <" + r.reference +
         ">, generate sentence: <" + r.hypothesis +
         ">. Please find the ambiguous word pairs in the source language sentence and the "
         "target language sentence, and count the number of ambiguous word pairs. Refer to "
         "the above word pairs to further count the accuracy of disambiguation in the "
         "generated sentences.\n"
         "Answer on one line in exactly this format: pairs: <number>, correct: <number>";
}

RenderedPrompt judge_prompt(const EvalRecord &r) {
  return RenderedPrompt{{{Role::user, judge_prompt_text(r)}}};
}

std::optional<JudgeResult> parse_judge_reply(std::string_view reply) {
  static const std::regex pairs_re(R"(pairs?\s*[:=]\s*(\d+))", std::regex::icase);
  static const std::regex correct_re(R"(correct\w*\s*[:=]\s*(\d+))", std::regex::icase);
  const std::string s(reply);
  std::smatch pm, cm;
  if (!std::regex_search(s, pm, pairs_re) || !std::regex_search(s, cm, correct_re))
    return std::nullopt;
  JudgeResult r;
  try {
    r.found = std::stoi(pm[1].str());
    r.correct = std::stoi(cm[1].str());
  } catch (const std::exception &) {
    return std::nullopt;
  }
  if (r.correct > r.found)
    throw JudgeError("judge reply has correct=" + std::to_string(r.correct) +
                     " greater than pairs=" + std::to_string(r.found));
  return r;
}

JudgeResult gpt_judge(const EvalRecord &record, ChatBackend &judge,
                      const GenerationConfig &cfg, const RetryPolicy &retry) {
  if (!record.ok()) throw JudgeError("cannot judge a record with an error");
  auto prompt = judge_prompt(record);
  auto first = complete(prompt, cfg, judge, retry);
  if (auto r = parse_judge_reply(first.response_text)) return *r;
  prompt.messages.push_back({Role::assistant, first.response_text});
  prompt.messages.push_back(
      {Role::user,
       "Reply with only one line in exactly this format: pairs: <number>, correct: <number>"});
  auto second = complete(prompt, cfg, judge, retry);
  if (auto r = parse_judge_reply(second.response_text)) return *r;
  throw JudgeError("judge reply could not be parsed after a reformat retry: " +
                   second.response_text.substr(0, 200));
}

JudgeAggregate judge_records(std::span<const EvalRecord> records, ChatBackend &judge,
                             const GenerationConfig &cfg, std::size_t parallelism,
                             const RetryPolicy &retry) {
  if (parallelism < 1) throw Error("parallelism must be >= 1");
  std::vector<std::optional<JudgeResult>> results(records.size());
  std::vector<std::string> errors(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      auto i = next.fetch_add(1);
      if (i >= records.size()) return;
      if (!records[i].ok()) continue;
      try {
        results[i] = gpt_judge(records[i], judge, cfg, retry);
      } catch (const Error &e) {
        errors[i] = "line " + std::to_string(records[i].line_no) + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < std::min(parallelism, records.size()); ++t)
    threads.emplace_back(worker);
  worker();
  for (auto &t : threads) t.join();
  JudgeAggregate agg;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (results[i]) {
      agg.found += results[i]->found;
      agg.correct += results[i]->correct;
      ++agg.judged;
    } else if (!errors[i].empty()) {
      agg.errors.push_back(errors[i]);
    }
  }
  return agg;
}

// External scorer --------------------------------------------------------------

std::optional<ExternalScores> external_score(std::span<const EvalRecord> records,
                                             const std::string &scorer_url, Diagnostics *diag) {
  try {
    auto url = detail::split_url(scorer_url);
    if (!url.path.ends_with("/score")) url.path += "/score";
    json body = json::array();
    std::vector<std::size_t> sent;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!records[i].ok()) continue;
      body.push_back({{"source", records[i].source},
                      {"reference", records[i].reference},
                      {"hypothesis", records[i].hypothesis}});
      sent.push_back(i);
    }
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(600, 0);
    auto res = client.Post(url.path, body.dump(), "application/json");
    if (!res) throw Error("scorer unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error("scorer returned HTTP " + std::to_string(res->status));
    auto reply = json::parse(res->body);
    if (!reply.is_array() || reply.size() != sent.size())
      throw Error("scorer returned " + std::to_string(reply.is_array() ? reply.size() : 0) +
                  " scores for " + std::to_string(sent.size()) + " triples");
    ExternalScores out;
    out.scores.assign(records.size(), std::nullopt);
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (std::size_t k = 0; k < sent.size(); ++k) {
      double v = reply[k].get<double>();
      if (!(v >= 0.0 && v <= 1.0)) throw Error("scorer returned out-of-range score");
      const double scaled = v * 100.0;
      out.scores[sent[k]] = scaled;
      auto &acc = sums[records[sent[k]].domain];
      acc.first += scaled;
      ++acc.second;
    }
    for (const auto &[domain, acc] : sums)
      out.domain_average[domain] = acc.first / static_cast<double>(acc.second);
    return out;
  } catch (const std::exception &e) {
    warn(diag, std::string("external scorer unavailable, scores omitted: ") + e.what());
    return std::nullopt;
  }
}

// Score files ------------------------------------------------------------------

std::string score_to_json(const ScoreSummary &s) {
  ordered_json j;
  j["domain"] = s.domain;
  j["template"] = to_string(s.template_id);
  j["bleu"] = s.bleu ? json(*s.bleu) : json(nullptr);
  if (s.comet) j["comet"] = *s.comet;
  ordered_json d;
  d["m"] = s.disamb.m;
  d["n"] = s.disamb.n;
  auto acc = s.disamb.accuracy();
  d["accuracy"] = acc ? json(*acc) : json(nullptr);
  d["mode"] = to_string(s.mode);
  j["disamb"] = d;
  if (s.judge) {
    j["judge"] = {{"found", s.judge->found},
                  {"correct", s.judge->correct},
                  {"judged", s.judge->judged},
                  {"errors", s.judge->errors.size()}};
  }
  j["bleu_signature"] = s.bleu_signature;
  return j.dump(2) + "\n";
}

ScoreSummary score_from_json(std::string_view text) {
  try {
    auto j = json::parse(text);
    ScoreSummary s;
    s.domain = j.at("domain").get<std::string>();
    s.template_id = parse_template_id(j.at("template").get<std::string>());
    if (j.contains("bleu") && !j["bleu"].is_null()) s.bleu = j["bleu"].get<double>();
    if (j.contains("comet") && !j["comet"].is_null()) s.comet = j["comet"].get<double>();
    if (j.contains("disamb")) {
      s.disamb.m = j["disamb"].value("m", std::int64_t{0});
      s.disamb.n = j["disamb"].value("n", std::int64_t{0});
      if (j["disamb"].contains("mode")) s.mode = parse_match_mode(j["disamb"]["mode"].get<std::string>());
    }
    if (j.contains("judge")) {
      JudgeAggregate a;
      a.found = j["judge"].value("found", std::int64_t{0});
      a.correct = j["judge"].value("correct", std::int64_t{0});
      a.judged = j["judge"].value("judged", std::size_t{0});
      s.judge = a;
    }
    s.bleu_signature = j.value("bleu_signature", "");
    return s;
  } catch (const json::exception &e) {
    throw Error(std::string("invalid score file: ") + e.what());
  }
}

void write_score(const fs::path &path, const ScoreSummary &s) {
  write_file_atomic(path, score_to_json(s));
}

ScoreSummary read_score(const fs::path &path) { return score_from_json(read_file(path)); }

}  // namespace ambig
