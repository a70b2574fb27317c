#include <doctest.h>

#include <cmath>
#include <random>

#include "ambig/report.hpp"
#include "support.hpp"

using namespace ambig;

namespace {

const std::vector<std::string> kDomains{"education", "laws", "news", "science", "spoken"};

ScoreSummary summary(TemplateId id, const std::string &domain, std::optional<double> bleu,
                     std::optional<double> comet, std::optional<std::int64_t> disamb_bp = {}) {
  ScoreSummary s;
  s.template_id = id;
  s.domain = domain;
  s.bleu = bleu;
  s.comet = comet;
  // basis points so m/n*100 lands on the 2-decimal reference value
  if (disamb_bp) s.disamb = {*disamb_bp, 10000};
  return s;
}

// English-to-Chinese rows, BLEU / COMET, reference main table.
std::vector<ScoreSummary> main_table() {
  const std::vector<std::pair<double, double>> t1{
      {33.14, 88.10}, {50.82, 88.94}, {30.04, 84.51}, {28.76, 84.82}, {19.20, 77.00}};
  const std::vector<std::pair<double, double>> t5{
      {33.46, 88.21}, {51.39, 89.20}, {30.36, 84.92}, {28.78, 86.13}, {20.89, 77.46}};
  std::vector<ScoreSummary> out;
  for (std::size_t i = 0; i < 5; ++i) {
    out.push_back(summary(TemplateId::T1, kDomains[i], t1[i].first, t1[i].second));
    out.push_back(summary(TemplateId::T5, kDomains[i], t5[i].first, t5[i].second));
  }
  return out;
}

// Fine-tuned disambiguation accuracy rows (percent * 100).
std::vector<ScoreSummary> disamb_table() {
  const std::int64_t t1[] = {3968, 4085, 4689, 3698, 4288};
  const std::int64_t t5[] = {4256, 4496, 4769, 4412, 4365};
  const std::int64_t t6[] = {3636, 3819, 4511, 3520, 4056};
  std::vector<ScoreSummary> out;
  for (std::size_t i = 0; i < 5; ++i) {
    out.push_back(summary(TemplateId::T1, kDomains[i], {}, {}, t1[i]));
    out.push_back(summary(TemplateId::T5, kDomains[i], {}, {}, t5[i]));
    out.push_back(summary(TemplateId::T6, kDomains[i], {}, {}, t6[i]));
  }
  return out;
}

const DeltaRow &row(const std::vector<DeltaRow> &rows, TemplateId dis) {
  for (const auto &r : rows)
    if (r.disamb_template == dis) return r;
  throw std::runtime_error("no delta row");
}

}  // namespace

TEST_CASE("cents arithmetic") {
  CHECK(to_cents(32.385) == 3239);
  CHECK(to_cents(0.1 + 0.2) == 30);
  CHECK(to_cents(-2.385) == -238);
  CHECK(format_cents(3239) == "32.39");
  CHECK(format_cents(32, true) == "+0.32");
  CHECK(format_cents(-238, true) == "-2.38");
  CHECK(format_cents(0, true) == "0.00");
  CHECK(format_cents(-5) == "-0.05");
}

TEST_CASE("reference table arithmetic") {
  const auto t = aggregate(main_table(), kDomains);
  CHECK(format_cents(*t.avg(TemplateId::T1, Metric::bleu)) == "32.39");
  CHECK(format_cents(*t.avg(TemplateId::T1, Metric::comet)) == "84.67");
  CHECK(format_cents(*t.avg(TemplateId::T5, Metric::bleu)) == "32.98");
  CHECK(format_cents(*t.avg(TemplateId::T5, Metric::comet)) == "85.18");
  const auto d = delta(t, default_pairing());
  const auto &t5 = row(d, TemplateId::T5);
  CHECK(format_cents(t5.per_domain.at("education").at(Metric::bleu), true) == "+0.32");
  CHECK(format_cents(t5.per_domain.at("science").at(Metric::bleu), true) == "+0.02");
  CHECK(format_cents(t5.per_domain.at("spoken").at(Metric::comet), true) == "+0.46");
  CHECK(format_cents(t5.avg.at(Metric::bleu), true) == "+0.59");
  CHECK(format_cents(t5.avg.at(Metric::comet), true) == "+0.51");

  const auto u = aggregate(disamb_table(), kDomains);
  CHECK(format_cents(*u.avg(TemplateId::T1, Metric::disamb)) == "41.46");
  CHECK(format_cents(*u.avg(TemplateId::T5, Metric::disamb)) == "44.60");
  CHECK(format_cents(*u.avg(TemplateId::T6, Metric::disamb)) == "39.08");
  const auto e = delta(u, default_pairing());
  CHECK(format_cents(row(e, TemplateId::T5).per_domain.at("education").at(Metric::disamb), true) == "+2.88");
  CHECK(format_cents(row(e, TemplateId::T5).avg.at(Metric::disamb), true) == "+3.14");
  CHECK(format_cents(row(e, TemplateId::T6).per_domain.at("education").at(Metric::disamb), true) == "-3.32");
  CHECK(format_cents(row(e, TemplateId::T6).avg.at(Metric::disamb), true) == "-2.38");
}

TEST_CASE("AVG agrees with a direct mean of rounded cells") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> val(0, 100);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<ScoreSummary> rows;
    const int n = 1 + static_cast<int>(rng() % 5);
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      const double v = std::round(val(rng) * 100) / 100;
      sum += v;
      rows.push_back(summary(TemplateId::T2, kDomains[i], v, {}));
    }
    const auto t = aggregate(rows);
    CHECK(std::abs(*t.avg_exact(TemplateId::T2, Metric::bleu) - sum / n) < 1e-9);
    CHECK(std::abs(static_cast<double>(*t.avg(TemplateId::T2, Metric::bleu)) / 100 - sum / n) <= 0.005 + 1e-9);
  }
}

TEST_CASE("single domain, identical tables, missing cells") {
  auto t = aggregate({summary(TemplateId::T1, "laws", 50.82, {})});
  CHECK(*t.avg(TemplateId::T1, Metric::bleu) == 5082);

  auto same = aggregate({summary(TemplateId::T1, "laws", 10.0, {}), summary(TemplateId::T5, "laws", 10.0, {})});
  CHECK(row(delta(same, default_pairing()), TemplateId::T5).avg.at(Metric::bleu) == 0);
  CHECK(format_cents(row(delta(same, default_pairing()), TemplateId::T5).avg.at(Metric::bleu), true) == "0.00");

  Diagnostics diag;
  CHECK(delta(aggregate({summary(TemplateId::T5, "laws", 1.0, {})}), default_pairing(), &diag).empty());
  CHECK(diag.warnings().size() == 1);

  auto holes = aggregate({summary(TemplateId::T1, "laws", 10.0, {}), summary(TemplateId::T1, "news", 20.0, {}),
                          summary(TemplateId::T5, "laws", 12.0, {})});
  CHECK(holes.has_missing(TemplateId::T5, Metric::bleu));
  const auto md = emit(holes, delta(holes, default_pairing()), ReportFormat::markdown);
  CHECK(md.find("| T5 | 12.00 | — | 12.00 |") != std::string::npos);
  CHECK(md.find("— missing cell") != std::string::npos);

  CHECK_THROWS_WITH_AS(aggregate({summary(TemplateId::T1, "laws", 1.0, {}), summary(TemplateId::T1, "laws", 2.0, {})}),
                       doctest::Contains("duplicate score"), Error);
}

TEST_CASE("markdown bolds the best AVG per strategy group") {
  auto t = aggregate(main_table(), kDomains);
  const auto md = emit(t, delta(t, default_pairing()), ReportFormat::markdown, {{"tool_version", "x"}});
  CHECK(md.find("| T5 | 33.46 / 88.21 |") != std::string::npos);
  CHECK(md.find("**32.98** / **85.18** |") != std::string::npos);
  CHECK(md.find("| T1 | 33.14 / 88.10 | 50.82 / 88.94 | 30.04 / 84.51 | 28.76 / 84.82 | 19.20 / 77.00 | 32.39 / 84.67 |") !=
        std::string::npos);
  CHECK(md.find("| T5-T1 | +0.32 / +0.11 |") != std::string::npos);
  CHECK(md.find("- tool_version: x") != std::string::npos);
  CHECK(md == emit(t, delta(t, default_pairing()), ReportFormat::markdown, {{"tool_version", "x"}}));

  // a lone template is never bolded
  auto lone = aggregate({summary(TemplateId::T1, "laws", 10.0, {})});
  CHECK(emit(lone, {}, ReportFormat::markdown).find("**") == std::string::npos);
}

TEST_CASE("machine formats round-trip") {
  auto t = aggregate(main_table(), kDomains);
  for (const auto &s : disamb_table()) t.set(s.template_id, s.domain, Metric::disamb, *s.disamb.accuracy() * 100);
  const auto d = delta(t, default_pairing());
  const auto csv = emit(t, d, ReportFormat::csv, {{"k", "v"}});
  CHECK(csv.starts_with("# k: v\nsection,row,domain,metric,value\n"));
  CHECK(table_from_csv(csv) == t);
  CHECK(table_from_json(emit(t, d, ReportFormat::json)) == t);
  CHECK(emit(t, d, ReportFormat::json) == emit(t, d, ReportFormat::json));
}

TEST_CASE("pairings") {
  CHECK(default_pairing().size() == 6);
  const auto p = parse_pairing("T5-T1,T9-T3");
  REQUIRE(p.size() == 2);
  CHECK(p[1] == std::pair{TemplateId::T9, TemplateId::T3});
  CHECK_THROWS_AS(parse_pairing("T5"), Error);
  CHECK(parse_pairing("default") == default_pairing());
}
