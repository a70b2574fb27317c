#include "ambig/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <set>

#include <json.hpp>

#include "ambig/ambiguity.hpp"
#include "ambig/annotation.hpp"
#include "ambig/checksum.hpp"
#include "ambig/corpus.hpp"
#include "ambig/lexicon.hpp"
#include "ambig/records.hpp"

namespace ambig {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

StageError::StageError(std::string stage, fs::path artifact, const std::string &why)
    : Error("stage '" + stage + "' failed while producing " + artifact.string() + ": " + why),
      stage_(std::move(stage)),
      artifact_(std::move(artifact)) {}

// ---------------------------------------------------------------------------
// Config

namespace {

fs::path resolve(const fs::path &base, const std::string &p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::uint64_t seed_field(const json &seeds, const char *name) {
  if (!seeds.contains(name))
    throw ValidationError(std::string("seeds.") + name + " is required (no implicit seeds)");
  const auto &v = seeds.at(name);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ValidationError(std::string("seeds.") + name + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view json_text, const fs::path &base_dir) {
  PipelineConfig cfg;
  cfg.checksum = sha256_hex(json_text);
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception &e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    if (!j.contains("manifest")) throw ValidationError("config needs 'manifest'");
    if (!j.contains("out_dir")) throw ValidationError("config needs 'out_dir'");
    cfg.manifest = resolve(base_dir, j["manifest"].get<std::string>());
    cfg.out_dir = resolve(base_dir, j["out_dir"].get<std::string>());

    if (!j.contains("templates") || j["templates"].empty())
      throw ValidationError("config needs a nonempty 'templates' list");
    for (const auto &t : j["templates"]) {
      auto id = parse_template_id(t.get<std::string>());
      if (std::find(cfg.templates.begin(), cfg.templates.end(), id) != cfg.templates.end())
        throw ValidationError("template " + to_string(id) + " listed twice");
      cfg.templates.push_back(id);
    }

    const json backend = j.value("backend", json::object());
    const auto kind = backend.value("kind", std::string("mock"));
    if (kind == "mock") {
      cfg.backend.kind = BackendSpec::Kind::mock;
      if (backend.contains("dictionary"))
        cfg.backend.dictionaries["*"] = resolve(base_dir, backend["dictionary"].get<std::string>());
      const json dicts = backend.value("dictionaries", json::object());
      for (const auto &[dom, p] : dicts.items())
        cfg.backend.dictionaries[dom] = resolve(base_dir, p.get<std::string>());
      if (cfg.backend.dictionaries.empty())
        throw ValidationError("mock backend needs 'dictionary' or 'dictionaries'");
      const auto fb = backend.value("fallback", std::string("echo"));
      if (fb == "echo") cfg.backend.fallback = MockRule::Fallback::echo;
      else if (fb == "drop") cfg.backend.fallback = MockRule::Fallback::drop;
      else throw ValidationError("backend.fallback must be echo or drop");
    } else if (kind == "openai") {
      cfg.backend.kind = BackendSpec::Kind::openai;
    } else {
      throw ValidationError("unknown backend kind '" + kind + "'");
    }

    const json gen = j.value("generation", json::object());
    cfg.generation.temperature = gen.value("temperature", cfg.generation.temperature);
    cfg.generation.top_p = gen.value("top_p", cfg.generation.top_p);
    cfg.generation.max_output_tokens = gen.value("max_output_tokens", cfg.generation.max_output_tokens);
    cfg.generation.model_name = gen.value("model", cfg.generation.model_name);
    if (gen.contains("max_input_tokens")) cfg.max_input_tokens = gen["max_input_tokens"].get<int>();
    cfg.generation.validate();

    if (!j.contains("seeds")) throw ValidationError("config needs 'seeds' {sampling, bootstrap, few_shot}");
    cfg.seeds.sampling = seed_field(j["seeds"], "sampling");
    cfg.seeds.bootstrap = seed_field(j["seeds"], "bootstrap");
    cfg.seeds.few_shot = seed_field(j["seeds"], "few_shot");

    cfg.mode = parse_match_mode(j.value("mode", std::string("lenient")));
    cfg.min_count = j.value("min_count", cfg.min_count);
    if (cfg.min_count < 1) throw ValidationError("min_count must be >= 1");
    if (j.contains("stopwords")) cfg.stopwords = resolve(base_dir, j["stopwords"].get<std::string>());
    cfg.sample_size = j.value("sample_size", cfg.sample_size);
    cfg.target_language = j.value("target_language", cfg.target_language);
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    if (cfg.parallelism == 0) throw ValidationError("parallelism must be >= 1");
    cfg.shots = j.value("shots", cfg.shots);
    if (j.contains("scorer_url")) cfg.scorer_url = j["scorer_url"].get<std::string>();
    if (j.contains("catalog")) cfg.catalog = resolve(base_dir, j["catalog"].get<std::string>());
    if (j.contains("report_formats")) {
      cfg.report_formats.clear();
      for (const auto &f : j["report_formats"])
        cfg.report_formats.push_back(parse_report_format(f.get<std::string>()));
    }
  } catch (const ValidationError &) {
    throw;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("config: ") + e.what());
  } catch (const Error &e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path &path) {
  if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
  return parse_pipeline_config(read_file(path), fs::absolute(path).parent_path());
}

void validate_pipeline_config(const PipelineConfig &cfg) {
  auto need = [](const fs::path &p, const char *what) {
    if (!fs::exists(p)) throw ValidationError(std::string(what) + " not found: " + p.string());
  };
  need(cfg.manifest, "manifest");
  for (const auto &[dom, p] : cfg.backend.dictionaries) need(p, "mock dictionary");
  if (cfg.stopwords) need(*cfg.stopwords, "stopword list");
  if (cfg.catalog) need(*cfg.catalog, "template catalog");
}

// ---------------------------------------------------------------------------
// Stage bookkeeping

namespace {

class LockFile {
 public:
  explicit LockFile(fs::path out_dir) : out_dir_(std::move(out_dir)) {
    const auto p = path();
    if (!fs::exists(p)) return;
    try {
      auto j = json::parse(read_file(p));
      for (const auto &[name, st] : j.at("stages").items()) {
        Entry e;
        e.key = st.at("key").get<std::string>();
        for (const auto &[f, sha] : st.at("outputs").items()) e.outputs[f] = sha.get<std::string>();
        stages_[name] = std::move(e);
      }
    } catch (const json::exception &) {
      stages_.clear();  // unreadable lock: rerun everything
    }
  }

  fs::path path() const { return out_dir_ / "pipeline.lock.json"; }

  bool fresh(const std::string &stage, const std::string &key) const {
    auto it = stages_.find(stage);
    if (it == stages_.end() || it->second.key != key) return false;
    for (const auto &[rel, sha] : it->second.outputs) {
      const auto p = out_dir_ / rel;
      if (!fs::exists(p) || sha256_file(p) != sha) return false;
    }
    return true;
  }

  std::vector<std::string> outputs(const std::string &stage) const {
    std::vector<std::string> out;
    auto it = stages_.find(stage);
    if (it != stages_.end())
      for (const auto &[rel, sha] : it->second.outputs) out.push_back(rel);
    return out;
  }

  void record(const std::string &stage, const std::string &key,
              const std::vector<std::string> &outputs) {
    Entry e;
    e.key = key;
    for (const auto &rel : outputs) e.outputs[rel] = sha256_file(out_dir_ / rel);
    stages_[stage] = std::move(e);
  }

  void save(const std::string &config_checksum, const std::vector<std::string> &order) const {
    ordered_json j;
    j["tool_version"] = kToolVersion;
    j["config_checksum"] = config_checksum;
    ordered_json stages = ordered_json::object();
    ordered_json artifacts = ordered_json::object();
    for (const auto &name : order) {
      auto it = stages_.find(name);
      if (it == stages_.end()) continue;
      ordered_json outs = ordered_json::object();
      for (const auto &[rel, sha] : it->second.outputs) {
        outs[rel] = sha;
        artifacts[rel] = {{"sha256", sha},
                          {"stage", name},
                          {"config_checksum", config_checksum},
                          {"tool_version", kToolVersion}};
      }
      stages[name] = {{"key", it->second.key}, {"outputs", outs}};
    }
    j["stages"] = stages;
    j["artifacts"] = artifacts;
    write_file_atomic(path(), j.dump(2) + "\n");
  }

 private:
  struct Entry {
    std::string key;
    std::map<std::string, std::string> outputs;
  };
  fs::path out_dir_;
  std::map<std::string, Entry> stages_;
};

/// Collects a stage's outputs as `<file>.partial` and renames them into place
/// only when the whole stage succeeded.
class StageWriter {
 public:
  StageWriter(fs::path out_dir, std::string stage)
      : out_dir_(std::move(out_dir)), stage_(std::move(stage)) {}

  void write(const std::string &rel, std::string_view data) {
    const auto final_path = out_dir_ / rel;
    auto partial = final_path;
    partial += ".partial";
    try {
      fs::create_directories(partial.parent_path());
      std::ofstream out(partial, std::ios::binary | std::ios::trunc);
      out.write(data.data(), static_cast<std::streamsize>(data.size()));
      if (!out) throw Error("write failed");
    } catch (const std::exception &e) {
      throw StageError(stage_, partial, e.what());
    }
    pending_.push_back(rel);
  }

  /// For artifacts produced elsewhere (run files) that are already final.
  void adopt(const std::string &rel) { adopted_.push_back(rel); }

  std::vector<std::string> commit() {
    std::vector<std::string> all;
    for (const auto &rel : pending_) {
      auto partial = out_dir_ / rel;
      partial += ".partial";
      fs::rename(partial, out_dir_ / rel);
      all.push_back(rel);
    }
    all.insert(all.end(), adopted_.begin(), adopted_.end());
    std::sort(all.begin(), all.end());
    return all;
  }

  const std::string &stage() const { return stage_; }

 private:
  fs::path out_dir_;
  std::string stage_;
  std::vector<std::string> pending_;
  std::vector<std::string> adopted_;
};

std::string key_of(std::initializer_list<std::string> parts) {
  std::string s;
  for (const auto &p : parts) {
    s += p;
    s += '\x1f';
  }
  return sha256_hex(s);
}

std::string files_digest(const fs::path &root, const std::vector<std::string> &rels) {
  std::string s;
  for (const auto &rel : rels) s += rel + ":" + sha256_file(root / rel) + "\n";
  return sha256_hex(s);
}

std::string corpus_digest(const fs::path &manifest) {
  std::string s = sha256_file(manifest) + "\n";
  const auto base = fs::absolute(manifest).parent_path();
  auto j = json::parse(read_file(manifest));
  for (const auto &d : j.at("domains"))
    for (const char *k : {"train_src", "train_tgt", "train_align", "test_src", "test_tgt"})
      if (d.contains(k)) s += sha256_file(resolve(base, d[k].get<std::string>())) + "\n";
  return sha256_hex(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Orchestration

PipelineResult pipeline_all(const PipelineConfig &cfg, const PipelineOptions &opts) {
  validate_pipeline_config(cfg);

  Corpus corpus;
  try {
    corpus = load_corpus(cfg.manifest);
  } catch (const Error &e) {
    throw ValidationError(e.what());
  }
  if (corpus.domains.size() < 2)
    throw ValidationError("pipeline needs at least two domains, manifest has " +
                          std::to_string(corpus.domains.size()));
  if (cfg.backend.kind == BackendSpec::Kind::mock && !opts.backend)
    for (const auto &d : corpus.domains)
      if (!cfg.backend.dictionaries.count(d.id) && !cfg.backend.dictionaries.count("*"))
        throw ValidationError("no mock dictionary for domain '" + d.id + "'");

  std::optional<TemplateCatalog> own_catalog;
  if (cfg.catalog) {
    try {
      own_catalog = TemplateCatalog::load(*cfg.catalog);
    } catch (const Error &e) {
      throw ValidationError(e.what());
    }
  }
  const TemplateCatalog &catalog = own_catalog ? *own_catalog : TemplateCatalog::builtin();

  fs::create_directories(cfg.out_dir);
  const fs::path out = cfg.out_dir;
  LockFile lock(out);
  PipelineResult result;
  Diagnostics diag;
  std::vector<std::string> order;

  auto notify = [&](const std::string &stage, const std::string &event, const std::string &detail) {
    if (opts.on_event) opts.on_event({stage, event, detail});
  };
  // Runs `body` unless the stage is fresh. Returns the stage's outputs.
  auto stage = [&](const std::string &name, const std::string &key,
                   const std::function<void(StageWriter &)> &body) {
    order.push_back(name);
    if (!opts.force && lock.fresh(name, key)) {
      result.skipped.push_back(name);
      notify(name, "skip", "up to date");
      return lock.outputs(name);
    }
    notify(name, "start", "");
    StageWriter w(out, name);
    try {
      body(w);
    } catch (const StageError &) {
      throw;
    } catch (const std::exception &e) {
      throw StageError(name, out, e.what());
    }
    auto outputs = w.commit();
    lock.record(name, key, outputs);
    lock.save(cfg.checksum, order);
    result.executed.push_back(name);
    notify(name, "done", std::to_string(outputs.size()) + " artifacts");
    for (const auto &wmsg : diag.take()) {
      result.warnings.push_back(name + ": " + wmsg);
      notify(name, "warn", wmsg);
    }
    return outputs;
  };

  std::vector<std::string> domain_ids;
  for (const auto &d : corpus.domains) domain_ids.push_back(d.id);
  const NormalizeOptions norm;
  const std::string corpus_fp = corpus_digest(cfg.manifest);

  // lexicon
  const std::string stop_fp = cfg.stopwords ? sha256_file(*cfg.stopwords) : "";
  const auto lex_outputs = stage(
      "lexicon", key_of({kToolVersion, "lexicon", corpus_fp, std::to_string(cfg.min_count), stop_fp}),
      [&](StageWriter &w) {
        const auto stop = cfg.stopwords ? read_stopwords(*cfg.stopwords) : std::set<std::string>{};
        for (const auto &[dom, lex] : build_corpus_lexicons(corpus, norm))
          w.write("lexicons/" + dom + ".tsv", lexicon_to_tsv(filter_lexicon(lex, cfg.min_count, stop)));
      });

  // review queue for human alignment checks
  const auto review_outputs = stage(
      "review-queue",
      key_of({kToolVersion, "review-queue", files_digest(out, lex_outputs), corpus_fp,
              std::to_string(cfg.sample_size), std::to_string(cfg.seeds.sampling)}),
      [&](StageWriter &w) {
        const auto lexicons = read_lexicon_dir(out / "lexicons");
        const auto examples = collect_examples(corpus, norm);
        w.write("review/queue.jsonl",
                items_to_jsonl(enqueue_samples(lexicons, cfg.sample_size, cfg.seeds.sampling,
                                               &examples, &diag)));
      });
  (void)review_outputs;

  // ambiguity
  const auto vocab_outputs = stage(
      "ambiguity", key_of({kToolVersion, "ambiguity", files_digest(out, lex_outputs)}),
      [&](StageWriter &w) {
        const auto lexicons = read_lexicon_dir(out / "lexicons");
        for (const auto &[dom, vocab] : build_ambiguous_vocabulary(lexicons))
          w.write("vocab/" + dom + ".json", vocabulary_to_json(vocab));
      });

  // annotate
  const auto ann_outputs = stage(
      "annotate", key_of({kToolVersion, "annotate", files_digest(out, vocab_outputs), corpus_fp}),
      [&](StageWriter &w) {
        const auto vocabs = read_vocabulary_dir(out / "vocab");
        std::map<std::string, std::vector<AnnotatedOccurrence>> all;
        for (const auto &d : corpus.domains) {
          auto it = vocabs.find(d.id);
          if (it == vocabs.end()) throw Error("no vocabulary for domain '" + d.id + "'");
          all[d.id] = annotate_test_set(corpus.split_pairs(d.id, Split::test), it->second, norm);
          w.write("annotations/" + d.id + ".jsonl", occurrences_to_jsonl(all[d.id]));
        }
        ordered_json stats = ordered_json::object();
        for (const auto &[dom, st] : ambiguity_stats(all, norm))
          stats[dom] = {{"occurrences", st.occurrences},
                        {"distinct_words", st.distinct_words},
                        {"sentences", st.sentences}};
        w.write("annotations/stats.json", stats.dump(2) + "\n");
      });

  // backend
  std::unique_ptr<ChatBackend> owned_backend;
  std::map<std::string, std::unique_ptr<ChatBackend>> mocks;
  std::string backend_fp;
  if (opts.backend) {
    backend_fp = "injected:" + opts.backend->name();
  } else if (cfg.backend.kind == BackendSpec::Kind::openai) {
    owned_backend = std::make_unique<OpenAIBackend>(OpenAIBackend::options_from_env());
    backend_fp = "openai";
  } else {
    backend_fp = std::string("mock:") +
                 (cfg.backend.fallback == MockRule::Fallback::echo ? "echo" : "drop");
    for (const auto &[dom, p] : cfg.backend.dictionaries) backend_fp += "|" + dom + "=" + sha256_file(p);
  }
  auto backend_for = [&](const std::string &dom) -> ChatBackend & {
    if (opts.backend) return *opts.backend;
    if (owned_backend) return *owned_backend;
    auto it = mocks.find(dom);
    if (it != mocks.end()) return *it->second;
    auto p = cfg.backend.dictionaries.count(dom) ? cfg.backend.dictionaries.at(dom)
                                                 : cfg.backend.dictionaries.at("*");
    auto m = std::make_unique<MockBackend>(read_mock_dictionary(p, cfg.backend.fallback),
                                           corpus.source_lang, corpus.target_lang);
    return *(mocks[dom] = std::move(m));
  };

  std::vector<std::string> labels;
  for (const auto &d : corpus.domains) labels.push_back(d.display_name);
  std::vector<FewShotExample> pool;
  for (const auto &d : corpus.domains)
    for (const auto *p : corpus.split_pairs(d.id, Split::train))
      pool.push_back({p->source_text, p->target_text, d.display_name});

  std::vector<std::string> score_outputs_all;
  for (TemplateId id : cfg.templates) {
    const std::string t = to_string(id);
    GenerationConfig gen = cfg.generation;
    gen.max_input_tokens = cfg.max_input_tokens
                               ? *cfg.max_input_tokens
                               : GenerationConfig::for_template(id).max_input_tokens;
    const std::string gen_fp = chat_request_body({}, gen);

    const auto run_outputs = stage(
        "run:" + t,
        key_of({kToolVersion, "run", t, corpus_fp, catalog.checksum(), backend_fp, gen_fp,
                std::to_string(cfg.seeds.few_shot), std::to_string(cfg.shots),
                cfg.target_language, files_digest(out, ann_outputs)}),
        [&](StageWriter &w) {
          for (const auto &d : corpus.domains) {
            const std::string rel = "runs/" + t + "/" + d.id + ".jsonl";
            const auto occ = read_occurrences(out / "annotations" / (d.id + ".jsonl"));
            std::map<int, std::map<int, std::string>> tags;
            for (const auto &o : occ) tags[o.line_no][o.token_index] = d.display_name;
            std::vector<RunItem> items;
            for (const auto *p : corpus.split_pairs(d.id, Split::test)) {
              RunItem it;
              it.line_no = p->line_no;
              it.source = p->source_text;
              it.reference = p->target_text;
              it.source_tokens = p->source_tokens;
              if (auto tg = tags.find(p->line_no); tg != tags.end()) it.word_tags = tg->second;
              items.push_back(std::move(it));
            }
            RunOptions ro;
            ro.domain = d.id;
            ro.domain_label = d.display_name;
            ro.target_language = cfg.target_language;
            ro.candidate_domains = labels;
            ro.few_shot_pool = pool;
            ro.shots = cfg.shots;
            ro.few_shot_seed = cfg.seeds.few_shot;
            ro.parallelism = cfg.parallelism;
            ro.retry = opts.retry;
            ro.catalog = &catalog;
            ro.checkpoint = out / rel;
            // Resume only from the .partial checkpoint, never from a stale final file.
            fs::remove(out / rel);
            try {
              auto records = run_strategy(items, id, gen, backend_for(d.id), ro);
              for (const auto &r : records)
                if (!r.ok()) warn(&diag, t + "/" + d.id + " line " + std::to_string(r.line_no) + ": " + *r.error);
            } catch (const std::exception &e) {
              throw StageError("run:" + t, out / (rel + ".partial"), e.what());
            }
            w.adopt(rel);
          }
        });

    const auto score_outputs = stage(
        "score:" + t,
        key_of({kToolVersion, "score", t, files_digest(out, run_outputs),
                files_digest(out, ann_outputs), std::string(to_string(cfg.mode)),
                cfg.scorer_url.value_or("")}),
        [&](StageWriter &w) {
          for (const auto &d : corpus.domains) {
            const auto records = read_run_file(out / "runs" / t / (d.id + ".jsonl"));
            const auto occ = read_occurrences(out / "annotations" / (d.id + ".jsonl"));
            ScoreSummary s;
            s.domain = d.id;
            s.template_id = id;
            s.mode = cfg.mode;
            s.bleu_signature = bleu_signature(corpus.target_lang);
            try {
              s.bleu = corpus_bleu(records, corpus.target_lang).score;
            } catch (const Error &e) {
              warn(&diag, t + "/" + d.id + ": " + e.what());
            }
            s.disamb = disambiguation_accuracy(records, occ, cfg.mode, corpus.target_lang, norm, &diag);
            if (cfg.scorer_url)
              if (auto ext = external_score(records, *cfg.scorer_url, &diag))
                if (auto it = ext->domain_average.find(d.id); it != ext->domain_average.end())
                  s.comet = it->second;
            w.write("scores/" + t + "/" + d.id + ".json", score_to_json(s));
          }
        });
    score_outputs_all.insert(score_outputs_all.end(), score_outputs.begin(), score_outputs.end());
  }

  // report
  std::string formats_fp;
  for (auto f : cfg.report_formats) formats_fp += std::to_string(static_cast<int>(f));
  const auto report_outputs = stage(
      "report",
      key_of({kToolVersion, "report", files_digest(out, score_outputs_all), formats_fp, cfg.checksum}),
      [&](StageWriter &w) {
        std::vector<ScoreSummary> scores;
        for (const auto &rel : score_outputs_all) scores.push_back(read_score(out / rel));
        auto table = aggregate(scores, domain_ids);
        for (const auto &d : corpus.domains) table.set_domain_label(d.id, d.display_name);
        const auto deltas = delta(table, default_pairing(), &diag);
        const ReportMeta meta{{"tool_version", kToolVersion},
                              {"config_checksum", cfg.checksum},
                              {"template_catalog", catalog.version() + " " + catalog.checksum()},
                              {"bleu", bleu_signature(corpus.target_lang)},
                              {"disambiguation", std::string(to_string(cfg.mode))}};
        for (auto f : cfg.report_formats) {
          const char *ext = f == ReportFormat::markdown ? "md" : f == ReportFormat::csv ? "csv" : "json";
          w.write(std::string("report.") + ext, emit(table, deltas, f, meta));
        }
      });
  for (const auto &rel : report_outputs) result.reports.push_back(out / rel);
  lock.save(cfg.checksum, order);
  return result;
}

}  // namespace ambig
