#include "ambig/annotation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "ambig/random.hpp"

namespace ambig {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Label label) {
  switch (label) {
    case Label::correct:
      return "correct";
    case Label::partially_correct:
      return "partially_correct";
    case Label::incorrect:
      return "incorrect";
  }
  return "correct";
}

Label parse_label(std::string_view s) {
  if (s == "correct") return Label::correct;
  if (s == "partially_correct") return Label::partially_correct;
  if (s == "incorrect") return Label::incorrect;
  throw Error("unknown label '" + std::string(s) +
              "' (expected correct, partially_correct or incorrect)");
}

std::string_view to_string(ItemStatus s) {
  return s == ItemStatus::pending ? "pending" : "judged";
}

ItemStatus parse_status(std::string_view s) {
  if (s == "pending") return ItemStatus::pending;
  if (s == "judged") return ItemStatus::judged;
  throw Error("unknown status '" + std::string(s) + "'");
}

std::vector<ReviewItem> enqueue_samples(
    const std::map<std::string, DomainLexicon> &lexicons, std::size_t sample_size,
    std::uint64_t seed, const ExampleIndex *examples, Diagnostics *diag) {
  if (sample_size < 1) throw Error("sample_size must be >= 1");
  std::vector<ReviewItem> items;
  for (const auto &[domain, lex] : lexicons) {
    std::vector<std::pair<std::string, std::string>> population;
    for (const auto &[src, targets] : lex.entries)
      for (const auto &[tgt, c] : targets) population.emplace_back(src, tgt);
    if (population.empty()) {
      warn(diag, "domain '" + domain + "' has an empty lexicon; no items sampled");
      continue;
    }
    auto rng = SeededRng::for_stream(seed, domain);
    auto picks = rng.sample_indices(population.size(), sample_size);
    int seq = 0;
    for (auto idx : picks) {
      ReviewItem item;
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04d", ++seq);
      item.item_id = domain + "-" + buf;
      item.domain = domain;
      item.source_word = population[idx].first;
      item.target_word = population[idx].second;
      if (examples) {
        auto d = examples->find(domain);
        if (d != examples->end()) {
          auto e = d->second.find(population[idx]);
          if (e != d->second.end()) item.example_lines = e->second;
        }
      }
      items.push_back(std::move(item));
    }
  }
  return items;
}

std::string utc_timestamp_now() {
  using namespace std::chrono;
  auto now = system_clock::now();
  auto secs = time_point_cast<seconds>(now);
  auto ms = duration_cast<milliseconds>(now - secs).count();
  std::time_t t = system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

JudgmentStore::JudgmentStore(std::vector<ReviewItem> items,
                             std::optional<fs::path> journal, Clock clock)
    : items_(std::move(items)),
      journal_(std::move(journal)),
      clock_(clock ? std::move(clock) : Clock(utc_timestamp_now)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (!index_.emplace(items_[i].item_id, i).second)
      throw Error("duplicate review item id '" + items_[i].item_id + "'");
    items_[i].status = ItemStatus::pending;
  }
  if (journal_ && fs::exists(*journal_)) {
    std::ifstream in(*journal_);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      Judgment j;
      try {
        j = judgment_from_json(line);
      } catch (const Error &e) {
        throw Error("journal " + journal_->string() + " line " +
                    std::to_string(n) + ": " + e.what());
      }
      if (!index_.count(j.item_id))
        throw Error("journal " + journal_->string() + " line " +
                    std::to_string(n) + ": unknown item '" + j.item_id + "'");
      apply(std::move(j));
    }
  }
}

Judgment JudgmentStore::apply(Judgment j) {
  auto it = index_.find(j.item_id);
  items_[it->second].status = ItemStatus::judged;
  history_.push_back(j);
  active_[j.item_id][j.annotator] = history_.size() - 1;
  return j;
}

Judgment JudgmentStore::record(std::string_view item_id, std::string_view label,
                               std::string_view annotator) {
  Label parsed = parse_label(label);
  if (annotator.empty()) throw Error("annotator id must be nonempty");
  std::unique_lock lock(mu_);
  if (!index_.count(item_id))
    throw Error("unknown item_id '" + std::string(item_id) + "'");
  Judgment j{std::string(item_id), parsed, std::string(annotator), clock_()};
  if (journal_) {
    if (journal_->has_parent_path()) fs::create_directories(journal_->parent_path());
    std::ofstream out(*journal_, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot append to journal " + journal_->string());
    out << judgment_to_json(j) << '\n';
    out.flush();
    if (!out) throw Error("journal write failed: " + journal_->string());
  }
  return apply(std::move(j));
}

std::vector<ReviewItem> JudgmentStore::items(std::optional<std::string> domain,
                                             std::optional<ItemStatus> status) const {
  std::shared_lock lock(mu_);
  std::vector<ReviewItem> out;
  for (const auto &item : items_) {
    if (domain && item.domain != *domain) continue;
    if (status && item.status != *status) continue;
    out.push_back(item);
  }
  return out;
}

std::optional<ReviewItem> JudgmentStore::item(std::string_view item_id) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(item_id);
  if (it == index_.end()) return std::nullopt;
  return items_[it->second];
}

std::optional<Judgment> JudgmentStore::judgment(std::string_view item_id,
                                                std::string_view annotator) const {
  std::shared_lock lock(mu_);
  auto it = active_.find(std::string(item_id));
  if (it == active_.end()) return std::nullopt;
  auto a = it->second.find(std::string(annotator));
  if (a == it->second.end()) return std::nullopt;
  return history_[a->second];
}

std::vector<Judgment> JudgmentStore::history() const {
  std::shared_lock lock(mu_);
  return history_;
}

std::size_t JudgmentStore::history_size() const {
  std::shared_lock lock(mu_);
  return history_.size();
}

std::map<std::string, Label> JudgmentStore::item_labels(Adjudication mode) const {
  std::shared_lock lock(mu_);
  std::map<std::string, Label> out;
  for (const auto &[item_id, by_annotator] : active_) {
    if (mode == Adjudication::latest) {
      std::size_t latest = 0;
      for (const auto &[a, pos] : by_annotator) latest = std::max(latest, pos);
      out[item_id] = history_[latest].label;
      continue;
    }
    std::array<int, 3> votes{};
    for (const auto &[a, pos] : by_annotator)
      ++votes[static_cast<int>(history_[pos].label)];
    // Scan from most to least severe so ties resolve toward removal.
    int best = 2;
    for (int l = 1; l >= 0; --l)
      if (votes[l] > votes[best]) best = l;
    out[item_id] = static_cast<Label>(best);
  }
  return out;
}

std::map<std::string, std::vector<Label>> JudgmentStore::labels_by_domain(
    Adjudication mode) const {
  auto labels = item_labels(mode);
  std::shared_lock lock(mu_);
  std::map<std::string, std::vector<Label>> out;
  for (const auto &[item_id, label] : labels)
    out[items_[index_.find(item_id)->second].domain].push_back(label);
  return out;
}

std::vector<RefinementAction> JudgmentStore::refinement_actions(
    Adjudication mode) const {
  auto labels = item_labels(mode);
  std::shared_lock lock(mu_);
  std::vector<RefinementAction> out;
  for (const auto &item : items_) {
    auto it = labels.find(item.item_id);
    if (it != labels.end()) out.push_back(action_for(item, it->second));
  }
  return out;
}

double AccuracyRow::fraction(Label l) const {
  const auto n = total();
  if (n == 0) return 0.0;
  switch (l) {
    case Label::correct:
      return static_cast<double>(correct) / static_cast<double>(n);
    case Label::partially_correct:
      return static_cast<double>(partially_correct) / static_cast<double>(n);
    case Label::incorrect:
      return static_cast<double>(incorrect) / static_cast<double>(n);
  }
  return 0.0;
}

int AccuracyRow::percent(Label l) const {
  const auto n = total();
  if (n == 0) return 0;
  std::int64_t c = l == Label::correct             ? correct
                   : l == Label::partially_correct ? partially_correct
                                                   : incorrect;
  // half-up on the exact rational 100*c/n
  return static_cast<int>((200 * c + n) / (2 * n));
}

std::map<std::string, AccuracyRow> alignment_accuracy(
    const std::map<std::string, std::vector<Label>> &labels_by_domain,
    Diagnostics *diag) {
  std::map<std::string, AccuracyRow> out;
  for (const auto &[domain, labels] : labels_by_domain) {
    if (labels.empty()) {
      warn(diag, "domain '" + domain + "' has no judgments; excluded");
      continue;
    }
    AccuracyRow row;
    for (Label l : labels) {
      if (l == Label::correct) ++row.correct;
      else if (l == Label::partially_correct) ++row.partially_correct;
      else ++row.incorrect;
    }
    out[domain] = row;
  }
  return out;
}

RefinementAction action_for(const ReviewItem &item, Label label) {
  RefinementAction a{item.domain, item.source_word, item.target_word,
                     RefinementKind::keep, false};
  if (label == Label::incorrect) a.action = RefinementKind::remove;
  if (label == Label::partially_correct) a.needs_review = true;
  return a;
}

DomainLexicon apply_refinements(const DomainLexicon &lex,
                                const std::vector<RefinementAction> &actions,
                                Diagnostics *diag) {
  DomainLexicon out = lex;
  for (const auto &a : actions) {
    if (a.action != RefinementKind::remove) continue;
    if (a.domain != lex.domain) continue;
    auto src = out.entries.find(a.source_word);
    if (src == out.entries.end() || !src->second.erase(a.target_word)) {
      warn(diag, "refinement references unknown pair (" + a.domain + ", " +
                     a.source_word + ", " + a.target_word + ")");
      continue;
    }
    if (src->second.empty()) out.entries.erase(src);
  }
  return out;
}

AmbiguousVocabulary apply_refinements(const AmbiguousVocabulary &vocab,
                                      const std::vector<RefinementAction> &actions,
                                      Diagnostics *diag) {
  AmbiguousVocabulary out = vocab;
  for (const auto &a : actions) {
    if (a.action != RefinementKind::remove) continue;
    auto it = out.entries.find(a.source_word);
    bool removed = false;
    if (it != out.entries.end()) {
      auto &e = it->second;
      if (a.domain == vocab.domain)
        removed = e.in_domain.erase(a.target_word) > 0;
      else
        removed = e.distractors.erase({a.target_word, a.domain}) > 0;
      if (e.in_domain.empty() || e.distractors.empty()) out.entries.erase(it);
    }
    if (!removed)
      warn(diag, "refinement references unknown pair (" + a.domain + ", " +
                     a.source_word + ", " + a.target_word + ") in vocabulary '" +
                     vocab.domain + "'");
  }
  return out;
}

std::string items_to_jsonl(const std::vector<ReviewItem> &items) {
  std::string out;
  for (const auto &i : items) {
    json j = {{"item_id", i.item_id},         {"domain", i.domain},
              {"source_word", i.source_word}, {"target_word", i.target_word},
              {"examples", i.example_lines},  {"status", to_string(i.status)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ReviewItem> items_from_jsonl(std::string_view text) {
  std::vector<ReviewItem> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      ReviewItem i;
      i.item_id = j.at("item_id").get<std::string>();
      i.domain = j.at("domain").get<std::string>();
      i.source_word = j.at("source_word").get<std::string>();
      i.target_word = j.at("target_word").get<std::string>();
      i.example_lines = j.value("examples", std::vector<int>{});
      i.status = parse_status(j.value("status", "pending"));
      out.push_back(std::move(i));
    } catch (const json::exception &e) {
      throw Error("review item line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string judgment_to_json(const Judgment &j) {
  return json{{"ts", j.timestamp},
              {"item_id", j.item_id},
              {"label", to_string(j.label)},
              {"annotator", j.annotator}}
      .dump();
}

Judgment judgment_from_json(std::string_view line) {
  try {
    auto j = json::parse(line);
    Judgment out;
    out.timestamp = j.at("ts").get<std::string>();
    out.item_id = j.at("item_id").get<std::string>();
    out.label = parse_label(j.at("label").get<std::string>());
    out.annotator = j.at("annotator").get<std::string>();
    return out;
  } catch (const json::exception &e) {
    throw Error(std::string("invalid judgment record: ") + e.what());
  }
}

std::string actions_to_jsonl(const std::vector<RefinementAction> &actions) {
  std::string out;
  for (const auto &a : actions) {
    json j = {{"domain", a.domain},
              {"source_word", a.source_word},
              {"target_word", a.target_word},
              {"action", a.action == RefinementKind::remove ? "remove" : "keep"}};
    if (a.needs_review) j["needs_review"] = true;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<RefinementAction> actions_from_jsonl(std::string_view text) {
  std::vector<RefinementAction> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      RefinementAction a;
      a.domain = j.at("domain").get<std::string>();
      a.source_word = j.at("source_word").get<std::string>();
      a.target_word = j.at("target_word").get<std::string>();
      auto kind = j.at("action").get<std::string>();
      if (kind == "remove") a.action = RefinementKind::remove;
      else if (kind == "keep") a.action = RefinementKind::keep;
      else throw Error("unknown refinement action '" + kind + "'");
      a.needs_review = j.value("needs_review", false);
      out.push_back(std::move(a));
    } catch (const json::exception &e) {
      throw Error("refinement line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ambig
