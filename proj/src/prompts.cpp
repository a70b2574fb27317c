#include "ambig/prompts.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "ambig/checksum.hpp"
#include "ambig/default_catalog.hpp"
#include "ambig/random.hpp"
#include "ambig/text.hpp"

namespace ambig {

using nlohmann::json;

namespace {

constexpr TemplateSpec kSpecs[] = {
    {TemplateId::T1, BaseStrategy::zero_shot, DomainInfo::none},
    {TemplateId::T2, BaseStrategy::cot, DomainInfo::none},
    {TemplateId::T3, BaseStrategy::few_shot, DomainInfo::none},
    {TemplateId::T4, BaseStrategy::reflection, DomainInfo::none},
    {TemplateId::T5, BaseStrategy::zero_shot, DomainInfo::sentence_tag},
    {TemplateId::T6, BaseStrategy::zero_shot, DomainInfo::word_tags},
    {TemplateId::T7, BaseStrategy::cot, DomainInfo::tag_in_step2},
    {TemplateId::T8, BaseStrategy::cot, DomainInfo::auto_discriminate},
    {TemplateId::T9, BaseStrategy::few_shot, DomainInfo::tagged_examples},
    {TemplateId::T10, BaseStrategy::reflection, DomainInfo::tag_in_reflection},
};

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string to_string(TemplateId id) {
  return "T" + std::to_string(static_cast<int>(id));
}

TemplateId parse_template_id(std::string_view s) {
  if (s.size() >= 2 && (s[0] == 'T' || s[0] == 't')) {
    int n = 0;
    bool ok = s.size() <= 3;
    for (std::size_t i = 1; i < s.size() && ok; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) ok = false;
      else n = n * 10 + (s[i] - '0');
    }
    if (ok && n >= 1 && n <= 10 && !(s.size() == 3 && s[1] == '0'))
      return static_cast<TemplateId>(n);
  }
  throw Error("unknown template id '" + std::string(s) + "' (expected T1..T10)");
}

const TemplateSpec &spec_of(TemplateId id) {
  return kSpecs[static_cast<int>(id) - 1];
}

std::vector<TemplateId> all_templates() {
  std::vector<TemplateId> out;
  for (const auto &s : kSpecs) out.push_back(s.id);
  return out;
}

bool is_reflection(TemplateId id) {
  return spec_of(id).base == BaseStrategy::reflection;
}

bool is_few_shot(TemplateId id) {
  return spec_of(id).base == BaseStrategy::few_shot;
}

TemplateId base_template(TemplateId id) {
  switch (spec_of(id).base) {
    case BaseStrategy::zero_shot:
      return TemplateId::T1;
    case BaseStrategy::cot:
      return TemplateId::T2;
    case BaseStrategy::few_shot:
      return TemplateId::T3;
    case BaseStrategy::reflection:
      return TemplateId::T4;
  }
  return TemplateId::T1;
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system:
      return "system";
    case Role::user:
      return "user";
    case Role::assistant:
      return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw Error("unknown message role '" + std::string(s) + "'");
}

std::string RenderedPrompt::transcript() const {
  std::string out;
  for (const auto &m : messages) {
    out += "### ";
    out += to_string(m.role);
    out += "\n";
    out += m.content;
    out += "\n";
  }
  return out;
}

TemplateCatalog TemplateCatalog::parse(std::string_view json_text) {
  TemplateCatalog cat;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception &e) {
    throw Error(std::string("template catalog is not valid JSON: ") + e.what());
  }
  cat.version_ = j.value("version", "");
  cat.system_ = j.value("system", "");
  cat.checksum_ = sha256_hex(json_text);
  if (!j.contains("templates") || !j["templates"].is_object())
    throw Error("template catalog has no 'templates' object");
  for (TemplateId id : all_templates()) {
    const auto key = to_string(id);
    if (!j["templates"].contains(key))
      throw Error("template catalog is missing " + key);
    const auto &t = j["templates"][key];
    Entry e;
    e.user = t.value("user", "");
    e.example = t.value("example", "");
    e.reflection = t.value("reflection", "");
    e.candidate_domains = t.value("candidate_domains", "");
    if (e.user.empty()) throw Error("template " + key + " has no user skeleton");
    if (!e.user.ends_with("\n{source}"))
      throw Error("template " + key + " must end with a line holding {source}");
    if (is_few_shot(id) && e.example.empty())
      throw Error("template " + key + " needs an example skeleton");
    if (is_reflection(id) && e.reflection.empty())
      throw Error("template " + key + " needs a reflection skeleton");
    cat.entries_.emplace(id, std::move(e));
  }
  return cat;
}

TemplateCatalog TemplateCatalog::load(const std::filesystem::path &path) {
  return parse(read_file(path));
}

const TemplateCatalog &TemplateCatalog::builtin() {
  static const TemplateCatalog cat = parse(detail::kDefaultCatalog);
  return cat;
}

const TemplateCatalog::Entry &TemplateCatalog::entry(TemplateId id) const {
  return entries_.at(id);
}

std::string fill_slots(std::string_view skeleton,
                       const std::map<std::string, std::string> &values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < skeleton.size()) {
    auto open = skeleton.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(skeleton.substr(pos));
      break;
    }
    out.append(skeleton.substr(pos, open - pos));
    auto close = skeleton.find('}', open);
    if (close == std::string_view::npos)
      throw Error("unterminated slot in template skeleton");
    std::string name(skeleton.substr(open + 1, close - open - 1));
    auto it = values.find(name);
    if (it == values.end()) throw Error("template slot {" + name + "} has no value");
    out += it->second;
    pos = close + 1;
  }
  return out;
}

namespace {

[[noreturn]] void missing(TemplateId id, const char *field) {
  throw Error(to_string(id) + " requires " + field);
}

void check_context(TemplateId id, const PromptContext &ctx) {
  if (ctx.source_sentence.empty()) missing(id, "source_sentence");
  if (ctx.target_language.empty()) missing(id, "target_language");
  const auto &spec = spec_of(id);
  const bool needs_domain = spec.domain_info == DomainInfo::sentence_tag ||
                            spec.domain_info == DomainInfo::word_tags ||
                            spec.domain_info == DomainInfo::tag_in_step2 ||
                            spec.domain_info == DomainInfo::tagged_examples ||
                            spec.domain_info == DomainInfo::tag_in_reflection;
  if (needs_domain && (!ctx.domain || ctx.domain->empty())) missing(id, "domain");
  if (spec.domain_info == DomainInfo::word_tags && !ctx.word_domain_tags)
    missing(id, "word_domain_tags");
  if (spec.base == BaseStrategy::few_shot &&
      (!ctx.few_shot_examples || ctx.few_shot_examples->empty()))
    missing(id, "few_shot_examples");
  if (spec.domain_info == DomainInfo::tagged_examples)
    for (const auto &ex : *ctx.few_shot_examples)
      if (!ex.domain || ex.domain->empty())
        throw Error(to_string(id) + " requires a domain on every few-shot example");
}

std::string tagged_source(TemplateId id, const PromptContext &ctx) {
  std::vector<std::string> tokens =
      ctx.source_tokens ? *ctx.source_tokens : text::split_whitespace(ctx.source_sentence);
  for (const auto &[idx, dom] : *ctx.word_domain_tags) {
    if (idx < 0 || idx >= static_cast<int>(tokens.size()))
      throw Error(to_string(id) + ": word_domain_tags index " + std::to_string(idx) +
                  " is outside the sentence");
    tokens[idx] += "(" + dom + ")";
  }
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

RenderedPrompt render(TemplateId id, const PromptContext &ctx,
                      const TemplateCatalog &catalog) {
  check_context(id, ctx);
  const auto &spec = spec_of(id);
  const auto &entry = catalog.entry(id);

  std::map<std::string, std::string> slots{
      {"target_language", ctx.target_language},
      {"source", ctx.source_sentence},
  };
  if (spec.domain_info != DomainInfo::auto_discriminate && ctx.domain)
    slots["domain"] = *ctx.domain;
  if (spec.domain_info == DomainInfo::word_tags)
    slots["tagged_source"] = tagged_source(id, ctx);
  if (spec.domain_info == DomainInfo::auto_discriminate) {
    std::string list;
    for (std::size_t i = 0; i < ctx.candidate_domains.size(); ++i) {
      if (i) list += ", ";
      list += ctx.candidate_domains[i];
    }
    slots["candidate_domains"] =
        ctx.candidate_domains.empty()
            ? std::string()
            : fill_slots(entry.candidate_domains, {{"domain_list", list}});
  }
  if (spec.base == BaseStrategy::few_shot) {
    std::string examples;
    for (const auto &ex : *ctx.few_shot_examples) {
      std::map<std::string, std::string> ex_slots{{"example_source", ex.source},
                                                  {"example_target", ex.target}};
      if (ex.domain) ex_slots["example_domain"] = *ex.domain;
      examples += fill_slots(entry.example, ex_slots);
    }
    slots["examples"] = examples;
  }

  RenderedPrompt out;
  if (!catalog.system().empty())
    out.messages.push_back({Role::system, catalog.system()});
  out.messages.push_back({Role::user, fill_slots(entry.user, slots)});
  return out;
}

RenderedPrompt build_reflection_turns(TemplateId id, const PromptContext &ctx,
                                      const TemplateCatalog &catalog) {
  if (!is_reflection(id))
    throw Error(to_string(id) + " is not a reflection template");
  if (!ctx.prior_hypothesis) missing(id, "prior_hypothesis");
  RenderedPrompt out = render(id, ctx, catalog);
  out.messages.push_back({Role::assistant, *ctx.prior_hypothesis});
  std::map<std::string, std::string> slots{{"target_language", ctx.target_language}};
  if (ctx.domain) slots["domain"] = *ctx.domain;
  out.messages.push_back({Role::user, fill_slots(catalog.entry(id).reflection, slots)});
  return out;
}

std::vector<FewShotExample> sample_few_shot(const std::vector<FewShotExample> &datastore,
                                            std::size_t k, std::uint64_t seed,
                                            const std::optional<std::string> &domain,
                                            Diagnostics *diag) {
  if (datastore.empty()) throw Error("few-shot datastore is empty");
  if (k < 1) throw Error("few-shot k must be >= 1");
  std::vector<const FewShotExample *> pool;
  for (const auto &ex : datastore)
    if (!domain || ex.domain == domain) pool.push_back(&ex);
  if (pool.size() < k)
    warn(diag, "few-shot pool has " + std::to_string(pool.size()) +
                   " examples, fewer than k=" + std::to_string(k));
  SeededRng rng(seed);
  std::vector<FewShotExample> out;
  for (auto idx : rng.sample_indices(pool.size(), k)) out.push_back(*pool[idx]);
  return out;
}

namespace {

std::string strip_quotes(std::string s) {
  s = text::trim(s);
  static const std::pair<std::string_view, std::string_view> kQuotes[] = {
      {"\"", "\""}, {"“", "”"}, {"「", "」"}, {"'", "'"}};
  for (const auto &[open, close] : kQuotes) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) &&
        s.ends_with(close)) {
      s = text::trim(s.substr(open.size(), s.size() - open.size() - close.size()));
      break;
    }
  }
  return s;
}

/// Length of a leading "Step N:" label, or 0.
std::size_t step_prefix(std::string_view line) {
  auto l = lower_ascii(line.substr(0, std::min<std::size_t>(line.size(), 12)));
  if (!l.starts_with("step ")) return 0;
  std::size_t i = 5;
  while (i < l.size() && std::isdigit(static_cast<unsigned char>(l[i]))) ++i;
  if (i == 5 || i >= l.size() || (l[i] != ':' && l[i] != '.')) return 0;
  return i + 1;
}

}  // namespace

std::string extract_translation(std::string_view reply) {
  const std::string body(reply);
  auto open = body.rfind("<translation>");
  if (open != std::string::npos) {
    auto start = open + std::string_view("<translation>").size();
    auto close = body.find("</translation>", start);
    return strip_quotes(body.substr(start, close == std::string::npos
                                               ? std::string::npos
                                               : close - start));
  }

  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (pos <= body.size()) {
      auto nl = body.find('\n', pos);
      lines.push_back(text::trim(body.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos)));
      if (nl == std::string::npos) break;
      pos = nl + 1;
    }
  }

  static const std::string_view kMarkers[] = {"final translation:", "final answer:",
                                              "translation:"};
  for (std::size_t i = lines.size(); i-- > 0;) {
    auto lower = lower_ascii(lines[i]);
    for (auto marker : kMarkers) {
      auto at = lower.find(marker);
      if (at == std::string::npos) continue;
      // Only treat it as a label when it starts the line (after optional
      // markdown emphasis).
      auto head = lower.substr(0, at);
      if (head.find_first_not_of("*#- ") != std::string::npos) continue;
      std::string rest = text::trim(lines[i].substr(at + marker.size()));
      while (!rest.empty() && rest.front() == '*') rest.erase(rest.begin());
      rest = text::trim(rest);
      if (!rest.empty()) return strip_quotes(rest);
      for (std::size_t k = i + 1; k < lines.size(); ++k)
        if (!lines[k].empty()) return strip_quotes(lines[k]);
    }
  }

  for (std::size_t i = lines.size(); i-- > 0;) {
    if (lines[i].empty()) continue;
    std::string line = lines[i];
    if (auto n = step_prefix(line)) line = text::trim(line.substr(n));
    if (!line.empty()) return strip_quotes(line);
  }
  return {};
}

}  // namespace ambig
