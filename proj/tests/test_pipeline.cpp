#include <doctest.h>

#include <json.hpp>

#include "ambig/pipeline.hpp"
#include "support.hpp"

using namespace ambig;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Working copy of the tiny fixture.
struct FixtureCopy {
  testing::TempDir dir;
  FixtureCopy() { fs::copy(testing::fixture("tiny"), dir.path(), fs::copy_options::recursive); }
  fs::path operator/(const std::string &rel) const { return dir / rel; }
};

class ThrowingBackend : public ChatBackend {
 public:
  std::string name() const override { return "throwing"; }
  std::string send(const RenderedPrompt &, const GenerationConfig &) override { throw Error("backend down"); }
};

double accuracy(const fs::path &score_file) {
  return json::parse(testing::slurp(score_file))["disamb"]["accuracy"].get<double>();
}

}  // namespace

TEST_CASE("pipeline: in-domain and distractor dictionaries") {
  FixtureCopy fx;
  auto cfg = load_pipeline_config(fx / "pipeline_in_domain.json");
  const auto r = pipeline_all(cfg);
  CHECK(r.skipped.empty());
  const auto out = fx / "out_in_domain";
  for (const char *d : {"laws", "science"}) {
    CHECK(accuracy(out / "scores" / "T1" / (std::string(d) + ".json")) == 1.0);
    CHECK(accuracy(out / "scores" / "T5" / (std::string(d) + ".json")) == 1.0);
  }
  const auto report = json::parse(testing::slurp(out / "report.json"));
  CHECK(report["rows"].size() == 2);
  REQUIRE(report["deltas"].size() == 1);
  CHECK(report["deltas"][0]["pair"] == "T5-T1");
  CHECK(fs::exists(out / "report.md"));

  auto dist = load_pipeline_config(fx / "pipeline_distractor.json");
  pipeline_all(dist);
  for (const char *d : {"laws", "science"})
    CHECK(accuracy(fx / "out_distractor" / "scores" / "T1" / (std::string(d) + ".json")) == 0.0);
}

TEST_CASE("pipeline: byte-identical reruns and skipping") {
  FixtureCopy a, b;
  pipeline_all(load_pipeline_config(a / "pipeline_in_domain.json"));
  pipeline_all(load_pipeline_config(b / "pipeline_in_domain.json"));
  const auto snap = testing::snapshot_tree(a / "out_in_domain");
  CHECK(snap == testing::snapshot_tree(b / "out_in_domain"));
  CHECK(snap.count("pipeline.lock.json"));
  for (const auto &[rel, bytes] : snap) CHECK(rel.find(".partial") == std::string::npos);

  const auto again = pipeline_all(load_pipeline_config(a / "pipeline_in_domain.json"));
  CHECK(again.executed.empty());
  CHECK(again.skipped.size() == 9);
  CHECK(testing::snapshot_tree(a / "out_in_domain") == snap);

  PipelineOptions force;
  force.force = true;
  CHECK(pipeline_all(load_pipeline_config(a / "pipeline_in_domain.json"), force).executed.size() == 9);
  CHECK(testing::snapshot_tree(a / "out_in_domain") == snap);
}

TEST_CASE("pipeline: changing a dictionary reruns only downstream stages") {
  FixtureCopy fx;
  pipeline_all(load_pipeline_config(fx / "pipeline_in_domain.json"));
  // unused entry: runs are redone but produce the same bytes, so scoring is reused
  testing::write_text(fx / "mock/laws.tsv", testing::slurp(fx / "mock/laws.tsv") + "court\t院\n");
  auto r = pipeline_all(load_pipeline_config(fx / "pipeline_in_domain.json"));
  INFO(testing::join(r.executed));
  CHECK(r.executed == std::vector<std::string>{"run:T1", "run:T5"});

  auto dict = testing::slurp(fx / "mock/laws.tsv");
  dict.replace(dict.find("power\t权"), std::string("power\t权").size(), "power\t能");
  testing::write_text(fx / "mock/laws.tsv", dict);
  r = pipeline_all(load_pipeline_config(fx / "pipeline_in_domain.json"));
  CHECK(r.executed == std::vector<std::string>{"run:T1", "score:T1", "run:T5", "score:T5", "report"});
  CHECK(accuracy(fx / "out_in_domain/scores/T1/laws.json") < 1.0);

  // a tampered artifact is detected and rebuilt
  testing::write_text(fx / "out_in_domain/vocab/laws.json", "{}");
  const auto r2 = pipeline_all(load_pipeline_config(fx / "pipeline_in_domain.json"));
  CHECK(std::find(r2.executed.begin(), r2.executed.end(), "ambiguity") != r2.executed.end());
  CHECK(read_vocabulary(fx / "out_in_domain/vocab/laws.json").domain == "laws");
}

TEST_CASE("pipeline: artifacts parse back") {
  FixtureCopy fx;
  pipeline_all(load_pipeline_config(fx / "pipeline_in_domain.json"));
  const auto out = fx / "out_in_domain";
  const auto lex = read_lexicon_dir(out / "lexicons");
  CHECK(lex.size() == 2);
  CHECK(lexicon_to_tsv(lex.at("laws")) == testing::slurp(out / "lexicons/laws.tsv"));
  const auto vocab = read_vocabulary_dir(out / "vocab");
  CHECK(vocabulary_to_json(vocab.at("science")) == testing::slurp(out / "vocab/science.json"));
  const auto occ = read_occurrences(out / "annotations/laws.jsonl");
  CHECK(occ.size() == 4);
  CHECK(occurrences_to_jsonl(occ) == testing::slurp(out / "annotations/laws.jsonl"));
  const auto run = read_run_file(out / "runs/T5/laws.jsonl");
  CHECK(records_to_jsonl(run) == testing::slurp(out / "runs/T5/laws.jsonl"));
  CHECK(score_to_json(read_score(out / "scores/T5/laws.json")) == testing::slurp(out / "scores/T5/laws.json"));
  const auto lock = json::parse(testing::slurp(out / "pipeline.lock.json"));
  CHECK(lock["tool_version"] == kToolVersion);
  CHECK(lock["artifacts"].contains("report.md"));
  CHECK(lock["artifacts"]["runs/T1/laws.jsonl"]["stage"] == "run:T1");
}

TEST_CASE("pipeline: validation errors write nothing") {
  FixtureCopy fx;
  auto text = testing::slurp(fx / "pipeline_in_domain.json");
  text.replace(text.find("manifest.json"), 13, "missing.json");
  testing::write_text(fx / "bad.json", text);
  CHECK_THROWS_AS(pipeline_all(load_pipeline_config(fx / "bad.json")), ValidationError);
  CHECK_FALSE(fs::exists(fx / "out_in_domain"));

  CHECK_THROWS_AS(parse_pipeline_config(R"({"manifest":"m","out_dir":"o","templates":["T11"]})", fx.dir.path()), Error);
  CHECK_THROWS_AS(parse_pipeline_config(R"({"manifest":"m","out_dir":"o","templates":["T1","T1"],
      "seeds":{"sampling":1,"bootstrap":1,"few_shot":1}})", fx.dir.path()), Error);
  CHECK_THROWS_AS(parse_pipeline_config("not json", fx.dir.path()), Error);
}

TEST_CASE("pipeline: backend failure surfaces as a stage error with partial output") {
  FixtureCopy fx;
  ThrowingBackend down;
  PipelineOptions opts;
  opts.backend = &down;
  opts.retry.sleep = [](std::chrono::milliseconds) {};
  try {
    pipeline_all(load_pipeline_config(fx / "pipeline_in_domain.json"), opts);
    FAIL("expected a stage error");
  } catch (const StageError &e) {
    CHECK(e.stage() == "run:T1");
    CHECK(e.artifact().filename() == "laws.jsonl.partial");
    CHECK(fs::exists(e.artifact()));
  }
  // the earlier stages completed and are reused
  const auto r = pipeline_all(load_pipeline_config(fx / "pipeline_in_domain.json"));
  CHECK(r.skipped == std::vector<std::string>{"lexicon", "review-queue", "ambiguity", "annotate"});
  CHECK(accuracy(fx / "out_in_domain/scores/T1/laws.json") == 1.0);
}
