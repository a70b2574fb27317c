#include "ambig/records.hpp"

#include <sstream>

#include <json.hpp>

#include "ambig/checksum.hpp"

namespace ambig {

using nlohmann::ordered_json;

namespace {

ordered_json prompt_json(const RenderedPrompt &p) {
  ordered_json arr = ordered_json::array();
  for (const auto &m : p.messages)
    arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return arr;
}

RenderedPrompt prompt_from(const ordered_json &arr) {
  RenderedPrompt p;
  for (const auto &m : arr)
    p.messages.push_back({parse_role(m.at("role").get<std::string>()),
                          m.at("content").get<std::string>()});
  return p;
}

}  // namespace

std::string record_to_json_line(const EvalRecord &r) {
  ordered_json j;
  j["line_no"] = r.line_no;
  j["domain"] = r.domain;
  j["template"] = to_string(r.template_id);
  j["source"] = r.source;
  j["reference"] = r.reference;
  j["hypothesis"] = r.hypothesis;
  ordered_json ex = ordered_json::array();
  for (const auto &e : r.exchanges)
    ex.push_back({{"request", prompt_json(e.request)},
                  {"response", e.response_text},
                  {"latency_ms", e.latency_ms},
                  {"backend", e.backend},
                  {"attempt", e.attempt}});
  j["exchanges"] = ex;
  if (r.error) j["error"] = *r.error;
  return j.dump();
}

EvalRecord record_from_json_line(std::string_view line) {
  try {
    auto j = ordered_json::parse(line);
    EvalRecord r;
    r.line_no = j.at("line_no").get<int>();
    r.domain = j.at("domain").get<std::string>();
    r.template_id = parse_template_id(j.at("template").get<std::string>());
    r.source = j.value("source", "");
    r.reference = j.value("reference", "");
    r.hypothesis = j.value("hypothesis", "");
    if (j.contains("error") && !j["error"].is_null())
      r.error = j["error"].get<std::string>();
    if (j.contains("exchanges"))
      for (const auto &e : j["exchanges"])
        r.exchanges.push_back({prompt_from(e.at("request")),
                               e.at("response").get<std::string>(),
                               e.value("latency_ms", std::int64_t{0}),
                               e.value("backend", ""), e.value("attempt", 1)});
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw Error(std::string("invalid run record: ") + e.what());
  }
}

std::string records_to_jsonl(const std::vector<EvalRecord> &records) {
  std::string out;
  for (const auto &r : records) out += record_to_json_line(r) + "\n";
  return out;
}

std::vector<EvalRecord> records_from_jsonl(std::string_view text) {
  std::vector<EvalRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const Error &e) {
      throw Error("run file line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::vector<EvalRecord> read_run_file(const std::filesystem::path &path) {
  return records_from_jsonl(read_file(path));
}

}  // namespace ambig
