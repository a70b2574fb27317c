#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ambig/prompts.hpp"

namespace ambig {

struct ChatExchange {
  RenderedPrompt request;
  std::string response_text;
  std::int64_t latency_ms = 0;
  std::string backend;
  int attempt = 1;

  bool operator==(const ChatExchange &) const = default;
};

/// One hypothesis for one test sentence under one template.
/// Invariant: hypothesis is empty iff error is set.
struct EvalRecord {
  int line_no = 0;
  std::string domain;
  TemplateId template_id = TemplateId::T1;
  std::string source;
  std::string reference;
  std::string hypothesis;
  std::optional<std::string> error;
  std::vector<ChatExchange> exchanges;

  bool ok() const { return !error.has_value(); }
  bool operator==(const EvalRecord &) const = default;
};

/// Run-file line: {line_no, domain, template, source, reference, hypothesis,
/// exchanges, error?}.
std::string record_to_json_line(const EvalRecord &record);
EvalRecord record_from_json_line(std::string_view line);

std::string records_to_jsonl(const std::vector<EvalRecord> &records);
std::vector<EvalRecord> records_from_jsonl(std::string_view text);
std::vector<EvalRecord> read_run_file(const std::filesystem::path &path);

}  // namespace ambig
