#include "ambig/annotation_service.hpp"

#include <algorithm>
#include <mutex>

#include <httplib.h>
#include <json.hpp>

namespace ambig {

using nlohmann::json;

namespace {

json item_json(const ReviewItem &i) {
  return {{"item_id", i.item_id},         {"domain", i.domain},
          {"source_word", i.source_word}, {"target_word", i.target_word},
          {"examples", i.example_lines},  {"status", to_string(i.status)}};
}

void send_json(httplib::Response &res, int status, const json &body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response &res, int status, const std::string &msg) {
  send_json(res, status, {{"error", msg}});
}

}  // namespace

struct AnnotationService::Impl {
  JudgmentStore &store;
  Options options;
  std::mutex vocab_mu;
  std::map<std::string, AmbiguousVocabulary> original;
  std::map<std::string, AmbiguousVocabulary> current;
  httplib::Server server;

  Impl(JudgmentStore &s, std::map<std::string, AmbiguousVocabulary> v, Options o)
      : store(s), options(std::move(o)), original(v), current(std::move(v)) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(.*)", [](const httplib::Request &, httplib::Response &res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.Get("/queue", [this](const auto &req, auto &res) { queue(req, res); });
    server.Post("/judgments", [this](const auto &req, auto &res) { judge(req, res); });
    server.Get("/accuracy", [this](const auto &req, auto &res) { accuracy(req, res); });
    server.Post("/refinements/apply",
                [this](const auto &req, auto &res) { refine(req, res); });
    server.Get(R"(/vocab/([a-z0-9_-]+))",
               [this](const auto &req, auto &res) { vocab(req, res); });
  }

  void queue(const httplib::Request &req, httplib::Response &res) {
    std::optional<std::string> domain;
    std::optional<ItemStatus> status;
    if (req.has_param("domain") && !req.get_param_value("domain").empty())
      domain = req.get_param_value("domain");
    if (req.has_param("status") && !req.get_param_value("status").empty()) {
      try {
        status = parse_status(req.get_param_value("status"));
      } catch (const Error &e) {
        return send_error(res, 400, e.what());
      }
    }
    auto items = store.items(domain, status);
    std::stable_partition(items.begin(), items.end(), [](const ReviewItem &i) {
      return i.status == ItemStatus::pending;
    });
    json arr = json::array();
    for (const auto &i : items) arr.push_back(item_json(i));
    send_json(res, 200, {{"items", arr}});
  }

  void judge(const httplib::Request &req, httplib::Response &res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception &) {
      return send_error(res, 400, "request body is not valid JSON");
    }
    for (const char *key : {"item_id", "label", "annotator"})
      if (!body.contains(key) || !body[key].is_string())
        return send_error(res, 400, std::string("missing field '") + key + "'");
    const auto item_id = body["item_id"].get<std::string>();
    if (!store.item(item_id))
      return send_error(res, 404, "unknown item_id '" + item_id + "'");
    try {
      auto j = store.record(item_id, body["label"].get<std::string>(),
                            body["annotator"].get<std::string>());
      send_json(res, 200, json::parse(judgment_to_json(j)));
    } catch (const Error &e) {
      send_error(res, 400, e.what());
    }
  }

  void accuracy(const httplib::Request &, httplib::Response &res) {
    Diagnostics diag;
    auto rows = alignment_accuracy(store.labels_by_domain(options.adjudication), &diag);
    json domains = json::object();
    for (const auto &[domain, row] : rows) {
      json r;
      r["counts"] = {{"correct", row.correct},
                     {"partially_correct", row.partially_correct},
                     {"incorrect", row.incorrect},
                     {"total", row.total()}};
      r["proportions"] = {{"correct", row.fraction(Label::correct)},
                          {"partially_correct", row.fraction(Label::partially_correct)},
                          {"incorrect", row.fraction(Label::incorrect)}};
      r["percent"] = {{"correct", row.percent(Label::correct)},
                      {"partially_correct", row.percent(Label::partially_correct)},
                      {"incorrect", row.percent(Label::incorrect)}};
      domains[domain] = r;
    }
    send_json(res, 200, {{"domains", domains}, {"warnings", diag.warnings()}});
  }

  void refine(const httplib::Request &req, httplib::Response &res) {
    Adjudication mode = options.adjudication;
    if (!req.body.empty()) {
      try {
        auto body = json::parse(req.body);
        auto m = body.value("mode", "");
        if (m == "majority") mode = Adjudication::majority;
        else if (m == "latest") mode = Adjudication::latest;
        else if (!m.empty()) return send_error(res, 400, "unknown mode '" + m + "'");
      } catch (const json::exception &) {
        return send_error(res, 400, "request body is not valid JSON");
      }
    }
    auto actions = store.refinement_actions(mode);
    Diagnostics diag;
    std::lock_guard lock(vocab_mu);
    // Always refine from the original vocabularies so repeated calls agree.
    std::map<std::string, AmbiguousVocabulary> refined;
    for (const auto &[domain, v] : original)
      refined[domain] = apply_refinements(v, actions, &diag);
    current = std::move(refined);
    if (options.refined_dir)
      for (const auto &[domain, v] : current)
        write_vocabulary(*options.refined_dir / (domain + ".json"), v);
    std::size_t removed = 0;
    json flagged = json::array();
    for (const auto &a : actions) {
      if (a.action == RefinementKind::remove) ++removed;
      if (a.needs_review)
        flagged.push_back({{"domain", a.domain},
                           {"source_word", a.source_word},
                           {"target_word", a.target_word}});
    }
    send_json(res, 200, {{"actions", actions.size()},
                         {"removed", removed},
                         {"flagged", flagged},
                         {"warnings", diag.warnings()}});
  }

  void vocab(const httplib::Request &req, httplib::Response &res) {
    const auto domain = req.matches[1].str();
    std::lock_guard lock(vocab_mu);
    auto it = current.find(domain);
    if (it == current.end())
      return send_error(res, 404, "unknown domain '" + domain + "'");
    res.status = 200;
    res.set_content(vocabulary_to_json(it->second), "application/json");
  }
};

AnnotationService::AnnotationService(
    JudgmentStore &store, std::map<std::string, AmbiguousVocabulary> vocabularies,
    Options options)
    : impl_(std::make_unique<Impl>(store, std::move(vocabularies), std::move(options))) {}

AnnotationService::~AnnotationService() { stop(); }

int AnnotationService::bind(const std::string &host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port))
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationService::serve() { impl_->server.listen_after_bind(); }

void AnnotationService::stop() {
  if (impl_) impl_->server.stop();
}

void AnnotationService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace ambig
