#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "ambig/ambiguity.hpp"
#include "ambig/error.hpp"
#include "ambig/lexicon.hpp"

namespace ambig {

enum class Label { correct, partially_correct, incorrect };

std::string_view to_string(Label label);
/// Throws Error("unknown label ...") for anything outside the closed set.
Label parse_label(std::string_view s);

enum class ItemStatus { pending, judged };
std::string_view to_string(ItemStatus s);
ItemStatus parse_status(std::string_view s);

struct ReviewItem {
  std::string item_id;
  std::string domain;
  std::string source_word;
  std::string target_word;
  std::vector<int> example_lines;
  ItemStatus status = ItemStatus::pending;

  bool operator==(const ReviewItem &) const = default;
};

struct Judgment {
  std::string item_id;
  Label label = Label::correct;
  std::string annotator;
  std::string timestamp;  // ISO-8601 UTC, e.g. 2026-01-02T03:04:05.678Z

  bool operator==(const Judgment &) const = default;
};

enum class RefinementKind { keep, remove };

struct RefinementAction {
  std::string domain;
  std::string source_word;
  std::string target_word;
  RefinementKind action = RefinementKind::keep;
  /// Set for partially-correct pairs: kept, but listed for manual review.
  bool needs_review = false;

  bool operator==(const RefinementAction &) const = default;
};

/// Draws min(sample_size, pairs) review items per domain, uniformly without
/// replacement. Each domain uses its own seeded stream over the lexicon's
/// pairs in (source, target) order, so a domain's draw does not depend on
/// which other domains are present.
std::vector<ReviewItem> enqueue_samples(
    const std::map<std::string, DomainLexicon> &lexicons, std::size_t sample_size,
    std::uint64_t seed, const ExampleIndex *examples = nullptr,
    Diagnostics *diag = nullptr);

/// How the per-item label is chosen when several annotators judged it.
enum class Adjudication {
  latest,    ///< most recent active judgment wins
  majority,  ///< most frequent label; ties go to the more severe label
};

/// Judgment store backed by an append-only JSON-lines journal.
///
/// Writes are serialized under an exclusive lock, so the journal order is the
/// order in which judgments were accepted. Reads take a shared lock and see a
/// consistent snapshot.
class JudgmentStore {
 public:
  using Clock = std::function<std::string()>;

  explicit JudgmentStore(std::vector<ReviewItem> items,
                         std::optional<std::filesystem::path> journal = {},
                         Clock clock = {});

  Judgment record(std::string_view item_id, std::string_view label,
                  std::string_view annotator);

  std::vector<ReviewItem> items(std::optional<std::string> domain = {},
                                std::optional<ItemStatus> status = {}) const;
  std::optional<ReviewItem> item(std::string_view item_id) const;
  std::optional<Judgment> judgment(std::string_view item_id,
                                   std::string_view annotator) const;
  /// Every record() call in acceptance order, including replaced ones.
  std::vector<Judgment> history() const;
  std::size_t history_size() const;

  /// Effective label per judged item.
  std::map<std::string, Label> item_labels(Adjudication mode) const;
  /// Effective labels grouped by the item's domain.
  std::map<std::string, std::vector<Label>> labels_by_domain(
      Adjudication mode) const;
  /// Refinement actions for all judged items (label policy: incorrect ->
  /// remove, partially_correct -> keep + review flag, correct -> keep).
  std::vector<RefinementAction> refinement_actions(Adjudication mode) const;

 private:
  Judgment apply(Judgment j);

  mutable std::shared_mutex mu_;
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t, std::less<>> index_;
  // item_id -> annotator -> position in history_
  std::map<std::string, std::map<std::string, std::size_t>> active_;
  std::vector<Judgment> history_;
  std::optional<std::filesystem::path> journal_;
  Clock clock_;
};

std::string utc_timestamp_now();

struct AccuracyRow {
  std::int64_t correct = 0;
  std::int64_t partially_correct = 0;
  std::int64_t incorrect = 0;

  std::int64_t total() const { return correct + partially_correct + incorrect; }
  double fraction(Label l) const;
  /// Percentage rounded half-up to an integer, for display.
  int percent(Label l) const;
};

std::map<std::string, AccuracyRow> alignment_accuracy(
    const std::map<std::string, std::vector<Label>> &labels_by_domain,
    Diagnostics *diag = nullptr);

RefinementAction action_for(const ReviewItem &item, Label label);

DomainLexicon apply_refinements(const DomainLexicon &lex,
                                const std::vector<RefinementAction> &actions,
                                Diagnostics *diag = nullptr);

/// `remove` on the vocabulary's own domain deletes an in-domain translation;
/// on another domain it deletes the distractor from that origin. Entries left
/// with an empty side are dropped.
AmbiguousVocabulary apply_refinements(const AmbiguousVocabulary &vocab,
                                      const std::vector<RefinementAction> &actions,
                                      Diagnostics *diag = nullptr);

// Serialization

std::string items_to_jsonl(const std::vector<ReviewItem> &items);
std::vector<ReviewItem> items_from_jsonl(std::string_view text);
std::string judgment_to_json(const Judgment &j);
Judgment judgment_from_json(std::string_view line);
std::string actions_to_jsonl(const std::vector<RefinementAction> &actions);
std::vector<RefinementAction> actions_from_jsonl(std::string_view text);

}  // namespace ambig
