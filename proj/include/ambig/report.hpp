#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ambig/error.hpp"
#include "ambig/metrics.hpp"
#include "ambig/prompts.hpp"

namespace ambig {

enum class Metric { bleu, comet, disamb };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);
inline constexpr Metric kMetrics[] = {Metric::bleu, Metric::comet, Metric::disamb};

/// A value in hundredths. Display values are exact in this unit, so AVG and
/// delta arithmetic on displayed numbers carries no binary rounding error.
using Cents = std::int64_t;

/// Rounds half-up to two decimals.
Cents to_cents(double value);
/// "33.14"; with `explicit_sign`, "+0.32" / "-2.38" (zero prints "0.00").
std::string format_cents(Cents c, bool explicit_sign = false);

struct Cell {
  std::optional<double> bleu;
  std::optional<double> comet;
  /// Disambiguation accuracy as a percentage.
  std::optional<double> disamb;

  std::optional<double> get(Metric m) const;
  void set(Metric m, double v);
  bool operator==(const Cell &) const = default;
};

/// Per-template, per-domain scores. Averages are taken over the
/// display-rounded (2-decimal) cells of the domains present for a template,
/// then rounded half-up for display.
class ScoreTable {
 public:
  void set(TemplateId id, const std::string &domain, Metric m, double value);
  void set_domain_order(std::vector<std::string> domains);
  void set_domain_label(const std::string &domain, std::string label);

  const std::vector<std::string> &domains() const { return domains_; }
  std::string domain_label(const std::string &domain) const;
  std::vector<TemplateId> templates() const;
  bool has_template(TemplateId id) const { return rows_.count(id) > 0; }
  bool has_metric(Metric m) const;

  std::optional<double> value(TemplateId id, const std::string &domain, Metric m) const;
  std::optional<Cents> cell(TemplateId id, const std::string &domain, Metric m) const;
  /// Mean of the 2-decimal cells before display rounding.
  std::optional<double> avg_exact(TemplateId id, Metric m) const;
  std::optional<Cents> avg(TemplateId id, Metric m) const;
  /// True if some domain column has no value for this template and metric.
  bool has_missing(TemplateId id, Metric m) const;

  bool operator==(const ScoreTable &) const = default;

 private:
  std::vector<std::string> domains_;
  std::map<std::string, std::string> labels_;
  std::map<TemplateId, std::map<std::string, Cell>> rows_;
};

/// Builds a table from score files. `domain_order` fixes the column order;
/// domains not listed are appended in sorted order.
ScoreTable aggregate(const std::vector<ScoreSummary> &scores,
                     const std::vector<std::string> &domain_order = {});

using Pairing = std::vector<std::pair<TemplateId, TemplateId>>;
/// T5-T1, T6-T1, T7-T2, T8-T2, T9-T3, T10-T4.
Pairing default_pairing();
Pairing parse_pairing(std::string_view spec);

struct DeltaRow {
  TemplateId disamb_template;
  TemplateId base_template;
  std::map<std::string, std::map<Metric, Cents>> per_domain;
  /// Difference of the displayed AVG values.
  std::map<Metric, Cents> avg;

  std::string label() const;
};

std::vector<DeltaRow> delta(const ScoreTable &table, const Pairing &pairing,
                            Diagnostics *diag = nullptr);

enum class ReportFormat { markdown, csv, json };
ReportFormat parse_report_format(std::string_view s);

using ReportMeta = std::vector<std::pair<std::string, std::string>>;

std::string emit(const ScoreTable &table, const std::vector<DeltaRow> &deltas,
                 ReportFormat format, const ReportMeta &meta = {});

/// Inverse of emit() for the machine formats; restores cell values exactly.
ScoreTable table_from_csv(std::string_view csv);
ScoreTable table_from_json(std::string_view json_text);

}  // namespace ambig
