#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ambig/error.hpp"

namespace ambig {

enum class TemplateId { T1 = 1, T2, T3, T4, T5, T6, T7, T8, T9, T10 };

enum class BaseStrategy { zero_shot, cot, few_shot, reflection };

enum class DomainInfo {
  none,
  sentence_tag,
  word_tags,
  tag_in_step2,
  auto_discriminate,
  tagged_examples,
  tag_in_reflection,
};

struct TemplateSpec {
  TemplateId id;
  BaseStrategy base;
  DomainInfo domain_info;
};

std::string to_string(TemplateId id);
/// Accepts "T1".."T10" (case-insensitive).
TemplateId parse_template_id(std::string_view s);
const TemplateSpec &spec_of(TemplateId id);
std::vector<TemplateId> all_templates();
bool is_reflection(TemplateId id);
bool is_few_shot(TemplateId id);

/// The base strategy a disambiguation template extends (T5 -> T1, ...).
TemplateId base_template(TemplateId id);

enum class Role { system, user, assistant };
std::string_view to_string(Role r);
Role parse_role(std::string_view s);

struct Message {
  Role role;
  std::string content;

  bool operator==(const Message &) const = default;
};

struct RenderedPrompt {
  std::vector<Message> messages;

  /// Human-readable dump used for golden files.
  std::string transcript() const;
  bool operator==(const RenderedPrompt &) const = default;
};

struct FewShotExample {
  std::string source;
  std::string target;
  std::optional<std::string> domain;

  bool operator==(const FewShotExample &) const = default;
};

struct PromptContext {
  std::string source_sentence;
  std::string target_language;
  /// Domain label as it should appear in prompts (e.g. "Laws").
  std::optional<std::string> domain;
  /// Token index -> domain label, for word-level tags.
  std::optional<std::map<int, std::string>> word_domain_tags;
  /// Tokens that word_domain_tags index into; defaults to a whitespace split.
  std::optional<std::vector<std::string>> source_tokens;
  std::optional<std::vector<FewShotExample>> few_shot_examples;
  /// Closed domain list offered to the model when it must pick a domain.
  std::vector<std::string> candidate_domains;
  std::optional<std::string> prior_hypothesis;
};

/// Message skeletons with `{slot}` placeholders, loaded from a JSON catalog.
class TemplateCatalog {
 public:
  struct Entry {
    std::string user;
    std::string example;            // few-shot templates
    std::string reflection;         // reflection templates
    std::string candidate_domains;  // domain-discrimination template
  };

  static TemplateCatalog parse(std::string_view json_text);
  static TemplateCatalog load(const std::filesystem::path &path);
  /// The catalog compiled into the binary from data/templates.json.
  static const TemplateCatalog &builtin();

  const Entry &entry(TemplateId id) const;
  const std::string &system() const { return system_; }
  const std::string &version() const { return version_; }
  /// SHA-256 of the catalog source text.
  const std::string &checksum() const { return checksum_; }

  void set_system(std::string system) { system_ = std::move(system); }

 private:
  std::string version_;
  std::string system_;
  std::string checksum_;
  std::map<TemplateId, Entry> entries_;
};

/// Replaces `{name}` slots. Throws Error on an unknown or unterminated slot.
std::string fill_slots(std::string_view skeleton,
                       const std::map<std::string, std::string> &values);

/// Renders the first (or only) turn of a template.
RenderedPrompt render(TemplateId id, const PromptContext &ctx,
                      const TemplateCatalog &catalog = TemplateCatalog::builtin());

/// Reflection protocol: turn-1 prompt, the prior hypothesis as an assistant
/// message, then the reflection request.
RenderedPrompt build_reflection_turns(
    TemplateId id, const PromptContext &ctx,
    const TemplateCatalog &catalog = TemplateCatalog::builtin());

/// Uniform sample of k examples without replacement, restricted to `domain`
/// when given. A pool smaller than k is returned whole with a warning.
std::vector<FewShotExample> sample_few_shot(
    const std::vector<FewShotExample> &datastore, std::size_t k,
    std::uint64_t seed, const std::optional<std::string> &domain = {},
    Diagnostics *diag = nullptr);

inline constexpr std::size_t kDefaultShots = 5;

/// Pulls the final translation out of a model reply. A marked answer
/// ("Final translation:", "Translation:", "Step 2:" lines, or a
/// <translation> block) wins; otherwise the last nonempty line that is not
/// reasoning scaffolding. Surrounding quotes are removed.
std::string extract_translation(std::string_view reply);

}  // namespace ambig
