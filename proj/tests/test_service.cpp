#include <doctest.h>

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "ambig/annotation_service.hpp"
#include "support.hpp"

using namespace ambig;
using nlohmann::json;

namespace {

std::vector<ReviewItem> items() {
  return {{"laws-0001", "laws", "power", "权", {1, 2}, ItemStatus::pending},
          {"laws-0002", "laws", "cell", "牢", {3}, ItemStatus::pending},
          {"laws-0003", "laws", "law", "法", {}, ItemStatus::pending},
          {"science-0001", "science", "power", "能", {}, ItemStatus::pending}};
}

std::map<std::string, AmbiguousVocabulary> vocabs() {
  AmbiguousVocabulary laws{"laws", {}};
  laws.entries["power"] = {"power", {"权"}, {{"能", "science"}}};
  laws.entries["cell"] = {"cell", {"牢"}, {{"胞", "science"}}};
  AmbiguousVocabulary sci{"science", {}};
  sci.entries["power"] = {"power", {"能"}, {{"权", "laws"}}};
  return {{"laws", laws}, {"science", sci}};
}

// Runs the service on a free port for the lifetime of the fixture.
struct Running {
  JudgmentStore store;
  AnnotationService svc;
  std::thread thread;
  int port = 0;

  explicit Running(AnnotationService::Options opts = {})
      : store(items()), svc(store, vocabs(), std::move(opts)) {
    port = svc.bind("127.0.0.1", 0);
    thread = std::thread([this] { svc.serve(); });
    svc.wait_until_ready();
  }
  ~Running() {
    svc.stop();
    thread.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

httplib::Result post_judgment(httplib::Client &c, const std::string &id, const std::string &label,
                              const std::string &who = "a1") {
  return c.Post("/judgments", json{{"item_id", id}, {"label", label}, {"annotator", who}}.dump(),
                "application/json");
}

}  // namespace

TEST_CASE("service: queue lists pending items first and filters") {
  Running r;
  auto c = r.client();
  REQUIRE(post_judgment(c, "laws-0001", "correct")->status == 200);
  auto res = c.Get("/queue");
  REQUIRE(res);
  CHECK(res->status == 200);
  auto body = json::parse(res->body);
  REQUIRE(body["items"].size() == 4);
  CHECK(body["items"][0]["item_id"] == "laws-0002");
  CHECK(body["items"][3]["item_id"] == "laws-0001");
  CHECK(body["items"][3]["status"] == "judged");

  body = json::parse(c.Get("/queue?domain=science")->body);
  CHECK(body["items"].size() == 1);
  body = json::parse(c.Get("/queue?status=judged")->body);
  CHECK(body["items"].size() == 1);
  CHECK(c.Get("/queue?status=bogus")->status == 400);
}

TEST_CASE("service: judgments validate label, item and body") {
  Running r;
  auto c = r.client();
  auto ok = post_judgment(c, "laws-0002", "partially_correct");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(json::parse(ok->body)["label"] == "partially_correct");
  auto bad = post_judgment(c, "laws-0002", "mostly");
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body)["error"].get<std::string>().find("unknown label") != std::string::npos);
  CHECK(post_judgment(c, "laws-9999", "correct")->status == 404);
  CHECK(c.Post("/judgments", "{", "application/json")->status == 400);
  CHECK(c.Post("/judgments", R"({"item_id":"laws-0002"})", "application/json")->status == 400);
  CHECK(r.store.history_size() == 1);
}

TEST_CASE("service: accuracy reflects posted labels") {
  Running r;
  auto c = r.client();
  post_judgment(c, "laws-0001", "correct");
  post_judgment(c, "laws-0002", "partially_correct");
  post_judgment(c, "laws-0003", "incorrect");
  auto body = json::parse(c.Get("/accuracy")->body);
  const auto &laws = body["domains"]["laws"];
  CHECK(laws["counts"]["total"] == 3);
  CHECK(laws["proportions"]["correct"].get<double>() == doctest::Approx(1.0 / 3));
  CHECK(laws["proportions"]["partially_correct"].get<double>() == doctest::Approx(1.0 / 3));
  CHECK(laws["proportions"]["incorrect"].get<double>() == doctest::Approx(1.0 / 3));
  CHECK_FALSE(body["domains"].contains("science"));
  CHECK(body["warnings"].empty());
}

TEST_CASE("service: concurrent posts all land in the journal") {
  Running r;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      auto c = r.client();
      for (int i = 0; i < 10; ++i)
        CHECK(post_judgment(c, items()[i % 4].item_id, i % 2 ? "correct" : "incorrect",
                            "a" + std::to_string(t))
                  ->status == 200);
    });
  for (auto &th : threads) th.join();
  CHECK(r.store.history_size() == 80);
}

TEST_CASE("service: refinements apply to the served vocabulary") {
  testing::TempDir dir;
  AnnotationService::Options opts;
  opts.refined_dir = dir.path();
  Running r(opts);
  auto c = r.client();
  auto before = vocabulary_from_json(c.Get("/vocab/laws")->body);
  CHECK(before == vocabs().at("laws"));
  post_judgment(c, "science-0001", "incorrect");
  post_judgment(c, "laws-0002", "partially_correct");
  auto res = c.Post("/refinements/apply", "", "application/json");
  REQUIRE(res->status == 200);
  auto body = json::parse(res->body);
  CHECK(body["removed"] == 1);
  CHECK(body["flagged"].size() == 1);
  // science's 能 removed: it is the laws distractor and science's only sense
  auto laws = vocabulary_from_json(c.Get("/vocab/laws")->body);
  CHECK_FALSE(laws.entries.count("power"));
  CHECK(laws.entries.count("cell"));
  auto sci = vocabulary_from_json(c.Get("/vocab/science")->body);
  CHECK(sci.entries.empty());
  CHECK(read_vocabulary(dir / "laws.json") == laws);
  // idempotent
  c.Post("/refinements/apply", "", "application/json");
  CHECK(vocabulary_from_json(c.Get("/vocab/laws")->body) == laws);
  CHECK(c.Get("/vocab/news")->status == 404);
  CHECK(c.Post("/refinements/apply", R"({"mode":"loudest"})", "application/json")->status == 400);
}
