#include "ambig/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ambig {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::bleu:
      return "bleu";
    case Metric::comet:
      return "comet";
    case Metric::disamb:
      return "disamb";
  }
  return "bleu";
}

Metric parse_metric(std::string_view s) {
  if (s == "bleu") return Metric::bleu;
  if (s == "comet") return Metric::comet;
  if (s == "disamb") return Metric::disamb;
  throw Error("unknown metric '" + std::string(s) + "' (expected bleu, comet or disamb)");
}

Cents to_cents(double value) {
  // The epsilon absorbs binary representation error so that decimal halves
  // such as 32.395 round up.
  return static_cast<Cents>(std::floor(value * 100.0 + 0.5 + 1e-6));
}

std::string format_cents(Cents c, bool explicit_sign) {
  std::string sign;
  if (c < 0) sign = "-";
  else if (c > 0 && explicit_sign) sign = "+";
  const Cents a = c < 0 ? -c : c;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(a / 100),
                static_cast<long long>(a % 100));
  return sign + buf;
}

std::optional<double> Cell::get(Metric m) const {
  switch (m) {
    case Metric::bleu:
      return bleu;
    case Metric::comet:
      return comet;
    case Metric::disamb:
      return disamb;
  }
  return std::nullopt;
}

void Cell::set(Metric m, double v) {
  switch (m) {
    case Metric::bleu:
      bleu = v;
      break;
    case Metric::comet:
      comet = v;
      break;
    case Metric::disamb:
      disamb = v;
      break;
  }
}

void ScoreTable::set(TemplateId id, const std::string &domain, Metric m, double value) {
  if (std::find(domains_.begin(), domains_.end(), domain) == domains_.end())
    domains_.push_back(domain);
  rows_[id][domain].set(m, value);
}

void ScoreTable::set_domain_order(std::vector<std::string> domains) {
  std::vector<std::string> out;
  for (auto &d : domains)
    if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
  std::vector<std::string> rest;
  for (const auto &d : domains_)
    if (std::find(out.begin(), out.end(), d) == out.end()) rest.push_back(d);
  std::sort(rest.begin(), rest.end());
  out.insert(out.end(), rest.begin(), rest.end());
  domains_ = std::move(out);
}

void ScoreTable::set_domain_label(const std::string &domain, std::string label) {
  labels_[domain] = std::move(label);
}

std::string ScoreTable::domain_label(const std::string &domain) const {
  auto it = labels_.find(domain);
  return it == labels_.end() ? domain : it->second;
}

std::vector<TemplateId> ScoreTable::templates() const {
  std::vector<TemplateId> out;
  for (const auto &[id, row] : rows_) out.push_back(id);
  return out;
}

bool ScoreTable::has_metric(Metric m) const {
  for (const auto &[id, row] : rows_)
    for (const auto &[d, cell] : row)
      if (cell.get(m)) return true;
  return false;
}

std::optional<double> ScoreTable::value(TemplateId id, const std::string &domain,
                                        Metric m) const {
  auto r = rows_.find(id);
  if (r == rows_.end()) return std::nullopt;
  auto c = r->second.find(domain);
  if (c == r->second.end()) return std::nullopt;
  return c->second.get(m);
}

std::optional<Cents> ScoreTable::cell(TemplateId id, const std::string &domain,
                                      Metric m) const {
  auto v = value(id, domain, m);
  if (!v) return std::nullopt;
  return to_cents(*v);
}

namespace {

/// floor(a / b) for b > 0.
Cents floor_div(Cents a, Cents b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

}  // namespace

std::optional<double> ScoreTable::avg_exact(TemplateId id, Metric m) const {
  Cents sum = 0;
  Cents n = 0;
  for (const auto &d : domains_)
    if (auto c = cell(id, d, m)) {
      sum += *c;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return static_cast<double>(sum) / (100.0 * static_cast<double>(n));
}

std::optional<Cents> ScoreTable::avg(TemplateId id, Metric m) const {
  Cents sum = 0;
  Cents n = 0;
  for (const auto &d : domains_)
    if (auto c = cell(id, d, m)) {
      sum += *c;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return floor_div(2 * sum + n, 2 * n);
}

bool ScoreTable::has_missing(TemplateId id, Metric m) const {
  for (const auto &d : domains_)
    if (!value(id, d, m)) return true;
  return false;
}

ScoreTable aggregate(const std::vector<ScoreSummary> &scores,
                     const std::vector<std::string> &domain_order) {
  ScoreTable table;
  std::set<std::pair<TemplateId, std::string>> seen;
  for (const auto &s : scores) {
    if (!seen.insert({s.template_id, s.domain}).second)
      throw Error("duplicate score for (" + to_string(s.template_id) + ", " + s.domain + ")");
    if (s.bleu) table.set(s.template_id, s.domain, Metric::bleu, *s.bleu);
    if (s.comet) table.set(s.template_id, s.domain, Metric::comet, *s.comet);
    if (auto a = s.disamb.accuracy()) table.set(s.template_id, s.domain, Metric::disamb, 100.0 * *a);
  }
  table.set_domain_order(domain_order);
  return table;
}

Pairing default_pairing() {
  using T = TemplateId;
  return {{T::T5, T::T1}, {T::T6, T::T1}, {T::T7, T::T2},
          {T::T8, T::T2}, {T::T9, T::T3}, {T::T10, T::T4}};
}

Pairing parse_pairing(std::string_view spec) {
  if (spec == "default") return default_pairing();
  Pairing out;
  std::string s(spec);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto dash = item.find('-');
    if (dash == std::string::npos)
      throw Error("pairing entries look like T5-T1, got '" + item + "'");
    out.emplace_back(parse_template_id(item.substr(0, dash)),
                     parse_template_id(item.substr(dash + 1)));
  }
  return out;
}

std::string DeltaRow::label() const {
  return to_string(disamb_template) + "-" + to_string(base_template);
}

std::vector<DeltaRow> delta(const ScoreTable &table, const Pairing &pairing,
                            Diagnostics *diag) {
  std::vector<DeltaRow> out;
  for (const auto &[dis, base] : pairing) {
    if (!table.has_template(dis) && !table.has_template(base)) continue;
    if (!table.has_template(dis) || !table.has_template(base)) {
      warn(diag, "delta " + to_string(dis) + "-" + to_string(base) +
                     " skipped: template missing from the table");
      continue;
    }
    DeltaRow row{dis, base, {}, {}};
    for (Metric m : kMetrics) {
      for (const auto &d : table.domains()) {
        auto a = table.cell(dis, d, m);
        auto b = table.cell(base, d, m);
        if (a && b) row.per_domain[d][m] = *a - *b;
      }
      auto a = table.avg(dis, m);
      auto b = table.avg(base, m);
      if (a && b) row.avg[m] = *a - *b;
    }
    out.push_back(std::move(row));
  }
  return out;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw Error("unknown report format '" + std::string(s) + "'");
}

namespace {

const std::vector<std::vector<TemplateId>> &strategy_groups() {
  using T = TemplateId;
  static const std::vector<std::vector<TemplateId>> groups{
      {T::T1, T::T5, T::T6}, {T::T2, T::T7, T::T8}, {T::T3, T::T9}, {T::T4, T::T10}};
  return groups;
}

std::string shortest(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::vector<Metric> present_metrics(const ScoreTable &t) {
  std::vector<Metric> out;
  for (Metric m : kMetrics)
    if (t.has_metric(m)) out.push_back(m);
  return out;
}

std::string emit_markdown(const ScoreTable &t, const std::vector<DeltaRow> &deltas,
                          const ReportMeta &meta) {
  const auto metrics = present_metrics(t);
  std::ostringstream out;
  std::string metric_names;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    if (i) metric_names += " / ";
    metric_names += std::string(to_string(metrics[i]));
  }
  out << "Scores: " << (metric_names.empty() ? "none" : metric_names) << "\n\n";
  out << "| Strategy |";
  for (const auto &d : t.domains()) out << ' ' << t.domain_label(d) << " |";
  out << " AVG |\n|---|";
  for (std::size_t i = 0; i < t.domains().size(); ++i) out << "---|";
  out << "---|\n";

  bool missing = false;
  auto join = [&](auto &&fn) {
    std::string s;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      if (i) s += " / ";
      s += fn(metrics[i]);
    }
    return s;
  };

  for (const auto &group : strategy_groups()) {
    std::map<Metric, Cents> best;
    std::map<Metric, int> present;
    for (TemplateId id : group)
      for (Metric m : metrics)
        if (auto a = t.avg(id, m)) {
          ++present[m];
          if (!best.count(m) || *a > best[m]) best[m] = *a;
        }
    for (TemplateId id : group) {
      if (!t.has_template(id)) continue;
      out << "| " << to_string(id) << " |";
      for (const auto &d : t.domains()) {
        out << ' ' << join([&](Metric m) {
          auto c = t.cell(id, d, m);
          if (!c) {
            missing = true;
            return std::string("—");
          }
          return format_cents(*c);
        }) << " |";
      }
      out << ' ' << join([&](Metric m) {
        auto a = t.avg(id, m);
        if (!a) return std::string("—");
        if (t.has_missing(id, m)) missing = true;
        auto s = format_cents(*a);
        if (present[m] >= 2 && *a == best[m]) s = "**" + s + "**";
        return s;
      }) << " |\n";
      for (const auto &row : deltas) {
        if (row.disamb_template != id) continue;
        out << "| " << row.label() << " |";
        for (const auto &d : t.domains()) {
          out << ' ' << join([&](Metric m) {
            auto it = row.per_domain.find(d);
            if (it == row.per_domain.end() || !it->second.count(m)) return std::string("—");
            return format_cents(it->second.at(m), true);
          }) << " |";
        }
        out << ' ' << join([&](Metric m) {
          auto it = row.avg.find(m);
          return it == row.avg.end() ? std::string("—") : format_cents(it->second, true);
        }) << " |\n";
      }
    }
  }
  if (missing) out << "\n— missing cell; AVG is taken over the domains present.\n";
  if (!meta.empty()) {
    out << "\n";
    for (const auto &[k, v] : meta) out << "- " << k << ": " << v << "\n";
  }
  return out.str();
}

std::string emit_csv(const ScoreTable &t, const std::vector<DeltaRow> &deltas,
                     const ReportMeta &meta) {
  std::ostringstream out;
  for (const auto &[k, v] : meta) out << "# " << k << ": " << v << "\n";
  out << "section,row,domain,metric,value\n";
  for (TemplateId id : t.templates())
    for (const auto &d : t.domains())
      for (Metric m : kMetrics)
        if (auto v = t.value(id, d, m))
          out << "cell," << to_string(id) << ',' << d << ',' << to_string(m) << ','
              << shortest(*v) << '\n';
  for (TemplateId id : t.templates())
    for (Metric m : kMetrics)
      if (auto a = t.avg(id, m))
        out << "avg," << to_string(id) << ",," << to_string(m) << ',' << format_cents(*a) << '\n';
  for (const auto &row : deltas) {
    for (const auto &d : t.domains()) {
      auto it = row.per_domain.find(d);
      if (it == row.per_domain.end()) continue;
      for (const auto &[m, c] : it->second)
        out << "delta," << row.label() << ',' << d << ',' << to_string(m) << ','
            << format_cents(c, true) << '\n';
    }
    for (const auto &[m, c] : row.avg)
      out << "delta_avg," << row.label() << ",," << to_string(m) << ','
          << format_cents(c, true) << '\n';
  }
  return out.str();
}

std::string emit_json(const ScoreTable &t, const std::vector<DeltaRow> &deltas,
                      const ReportMeta &meta) {
  ordered_json j;
  ordered_json m_meta = ordered_json::object();
  for (const auto &[k, v] : meta) m_meta[k] = v;
  j["meta"] = m_meta;
  ordered_json domains = ordered_json::array();
  for (const auto &d : t.domains()) domains.push_back({{"id", d}, {"label", t.domain_label(d)}});
  j["domains"] = domains;
  ordered_json rows = ordered_json::array();
  for (TemplateId id : t.templates()) {
    ordered_json row;
    row["template"] = to_string(id);
    ordered_json cells = ordered_json::object();
    for (const auto &d : t.domains()) {
      ordered_json c = ordered_json::object();
      for (Metric m : kMetrics)
        if (auto v = t.value(id, d, m)) c[std::string(to_string(m))] = *v;
      if (!c.empty()) cells[d] = c;
    }
    row["cells"] = cells;
    ordered_json avg = ordered_json::object();
    for (Metric m : kMetrics)
      if (auto a = t.avg(id, m)) avg[std::string(to_string(m))] = format_cents(*a);
    row["avg"] = avg;
    rows.push_back(row);
  }
  j["rows"] = rows;
  ordered_json drows = ordered_json::array();
  for (const auto &row : deltas) {
    ordered_json r;
    r["pair"] = row.label();
    ordered_json per = ordered_json::object();
    for (const auto &d : t.domains()) {
      auto it = row.per_domain.find(d);
      if (it == row.per_domain.end()) continue;
      ordered_json c = ordered_json::object();
      for (const auto &[m, v] : it->second) c[std::string(to_string(m))] = format_cents(v, true);
      per[d] = c;
    }
    r["domains"] = per;
    ordered_json avg = ordered_json::object();
    for (const auto &[m, v] : row.avg) avg[std::string(to_string(m))] = format_cents(v, true);
    r["avg"] = avg;
    drows.push_back(r);
  }
  j["deltas"] = drows;
  return j.dump(2) + "\n";
}

}  // namespace

std::string emit(const ScoreTable &table, const std::vector<DeltaRow> &deltas,
                 ReportFormat format, const ReportMeta &meta) {
  switch (format) {
    case ReportFormat::markdown:
      return emit_markdown(table, deltas, meta);
    case ReportFormat::csv:
      return emit_csv(table, deltas, meta);
    case ReportFormat::json:
      return emit_json(table, deltas, meta);
  }
  return {};
}

ScoreTable table_from_csv(std::string_view csv) {
  ScoreTable t;
  std::istringstream in{std::string(csv)};
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (line.back() == ',') cols.emplace_back();
    if (cols.size() != 5) throw Error("report CSV: expected 5 columns in '" + line + "'");
    if (cols[0] != "cell") continue;
    double v = 0.0;
    auto [p, ec] = std::from_chars(cols[4].data(), cols[4].data() + cols[4].size(), v);
    if (ec != std::errc()) throw Error("report CSV: bad number '" + cols[4] + "'");
    t.set(parse_template_id(cols[1]), cols[2], parse_metric(cols[3]), v);
  }
  return t;
}

ScoreTable table_from_json(std::string_view json_text) {
  ScoreTable t;
  try {
    auto j = json::parse(json_text);
    std::vector<std::string> order;
    for (const auto &d : j.at("domains")) {
      order.push_back(d.at("id").get<std::string>());
      auto label = d.value("label", order.back());
      if (label != order.back()) t.set_domain_label(order.back(), label);
    }
    for (const auto &row : j.at("rows")) {
      auto id = parse_template_id(row.at("template").get<std::string>());
      for (const auto &d : order) {
        if (!row.at("cells").contains(d)) continue;
        for (const auto &[m, v] : row["cells"][d].items()) t.set(id, d, parse_metric(m), v.get<double>());
      }
    }
    t.set_domain_order(order);
  } catch (const json::exception &e) {
    throw Error(std::string("invalid report JSON: ") + e.what());
  }
  return t;
}

}  // namespace ambig
