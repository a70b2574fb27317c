// ambig: command-line front end.

#include <csignal>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "ambig/ambiguity.hpp"
#include "ambig/annotation.hpp"
#include "ambig/annotation_service.hpp"
#include "ambig/checksum.hpp"
#include "ambig/corpus.hpp"
#include "ambig/lexicon.hpp"
#include "ambig/llmclient.hpp"
#include "ambig/metrics.hpp"
#include "ambig/pipeline.hpp"
#include "ambig/prompts.hpp"
#include "ambig/records.hpp"
#include "ambig/report.hpp"
#include "ambig/text.hpp"

namespace fs = std::filesystem;
using namespace ambig;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitStage = 2;

void print_warnings(const Diagnostics &diag) {
  for (const auto &w : diag.warnings()) std::cerr << "warning: " << w << "\n";
}

void write_or_print(const std::string &out, const std::string &text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    write_file_atomic(out, text);
  }
}

std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(text::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(text::trim(cur));
  return out;
}

const TemplateCatalog &catalog_from(const std::string &path, std::optional<TemplateCatalog> &slot) {
  if (path.empty()) return TemplateCatalog::builtin();
  slot = TemplateCatalog::load(path);
  return *slot;
}

std::unique_ptr<ChatBackend> make_backend(const std::string &kind, const std::string &dictionary,
                                          const std::string &src, const std::string &tgt) {
  if (kind == "openai") return std::make_unique<OpenAIBackend>(OpenAIBackend::options_from_env());
  if (kind == "mock") {
    if (dictionary.empty()) throw Error("--backend mock needs --dictionary");
    return std::make_unique<MockBackend>(read_mock_dictionary(dictionary), src, tgt);
  }
  throw Error("unknown backend '" + kind + "' (expected mock or openai)");
}

AnnotationService *g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multi-domain lexical ambiguity toolkit for LLM translation evaluation"};
  app.set_config("--config", "", "INI/TOML file with default option values");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::function<int()> action;

  // corpus -------------------------------------------------------------------
  auto *corpus_cmd = app.add_subcommand("corpus", "Parallel corpus utilities");
  corpus_cmd->require_subcommand(1);
  std::string manifest;
  {
    auto *c = corpus_cmd->add_subcommand("validate", "Load a manifest and check all invariants");
    c->add_option("manifest,--manifest", manifest, "Corpus manifest (JSON)")->required();
    c->callback([&] {
      action = [&] {
        auto corpus = load_corpus(manifest);
        validate_corpus(corpus);
        std::cout << corpus.source_lang << "-" << corpus.target_lang << "\n";
        for (const auto &d : corpus.domains)
          std::cout << d.id << "\t" << d.display_name << "\ttrain=" << corpus.split_pairs(d.id, Split::train).size()
                    << "\ttest=" << corpus.split_pairs(d.id, Split::test).size() << "\n";
        return kExitOk;
      };
    });
  }

  // lexicon ------------------------------------------------------------------
  auto *lex_cmd = app.add_subcommand("lexicon", "Bilingual lexicons from alignments");
  lex_cmd->require_subcommand(1);
  std::string out;
  std::int64_t min_count = 2;
  std::string stopwords;
  bool no_casefold = false;
  {
    auto *c = lex_cmd->add_subcommand("build", "Write one filtered <domain>.tsv per domain");
    c->add_option("manifest,--manifest", manifest)->required();
    c->add_option("--out", out, "Output directory")->required();
    c->add_option("--min-count", min_count)->check(CLI::PositiveNumber);
    c->add_option("--stopwords", stopwords, "One word per line");
    c->add_flag("--no-casefold", no_casefold, "Keep letter case");
    c->callback([&] {
      action = [&] {
        auto corpus = load_corpus(manifest);
        const auto stop = stopwords.empty() ? std::set<std::string>{} : read_stopwords(stopwords);
        NormalizeOptions norm;
        norm.casefold = !no_casefold;
        for (const auto &[dom, lex] : build_corpus_lexicons(corpus, norm)) {
          auto f = filter_lexicon(lex, min_count, stop);
          write_lexicon(fs::path(out) / (dom + ".tsv"), f);
          std::cout << dom << "\t" << f.pair_count() << " pairs\n";
        }
        return kExitOk;
      };
    });
  }

  // ambiguity ----------------------------------------------------------------
  auto *amb_cmd = app.add_subcommand("ambiguity", "Ambiguous vocabularies and test-set annotation");
  amb_cmd->require_subcommand(1);
  std::string lexicons_dir, vocab_dir, annotations_dir, test_spec;
  {
    auto *c = amb_cmd->add_subcommand("build", "Cross-domain ambiguous vocabulary per domain");
    c->add_option("--lexicons", lexicons_dir)->required()->check(CLI::ExistingDirectory);
    c->add_option("--out", out)->required();
    c->callback([&] {
      action = [&] {
        for (const auto &[dom, v] : build_ambiguous_vocabulary(read_lexicon_dir(lexicons_dir))) {
          write_vocabulary(fs::path(out) / (dom + ".json"), v);
          std::cout << dom << "\t" << v.entries.size() << " ambiguous words\n";
        }
        return kExitOk;
      };
    });
  }
  {
    auto *c = amb_cmd->add_subcommand("annotate", "Mark ambiguous-word occurrences in one test set");
    c->add_option("--vocab", vocab_dir, "Vocabulary JSON of the domain")->required()->check(CLI::ExistingFile);
    c->add_option("--test", test_spec, "<manifest>:<domain>")->required();
    c->add_option("--out", out)->required();
    c->callback([&] {
      action = [&] {
        auto colon = test_spec.rfind(':');
        if (colon == std::string::npos) throw Error("--test expects <manifest>:<domain>");
        auto corpus = load_corpus(test_spec.substr(0, colon));
        const auto dom = test_spec.substr(colon + 1);
        if (!corpus.find_domain(dom)) throw Error("unknown domain '" + dom + "'");
        auto occ = annotate_test_set(corpus.split_pairs(dom, Split::test), read_vocabulary(vocab_dir));
        write_occurrences(out, occ);
        std::cout << dom << "\t" << occ.size() << " occurrences\n";
        return kExitOk;
      };
    });
  }
  {
    auto *c = amb_cmd->add_subcommand("stats", "Occurrence counts per domain");
    c->add_option("dir,--annotations", annotations_dir, "Directory of <domain>.jsonl")->required()->check(CLI::ExistingDirectory);
    c->callback([&] {
      action = [&] {
        std::map<std::string, std::vector<AnnotatedOccurrence>> all;
        for (const auto &e : fs::directory_iterator(annotations_dir))
          if (e.path().extension() == ".jsonl") all[e.path().stem().string()] = read_occurrences(e.path());
        std::cout << "domain\toccurrences\tdistinct_words\tsentences\n";
        for (const auto &[dom, s] : ambiguity_stats(all))
          std::cout << dom << "\t" << s.occurrences << "\t" << s.distinct_words << "\t" << s.sentences << "\n";
        return kExitOk;
      };
    });
  }

  // annotate -----------------------------------------------------------------
  auto *ann_cmd = app.add_subcommand("annotate", "Human review of lexicon alignments");
  ann_cmd->require_subcommand(1);
  std::size_t sample_size = 100;
  std::uint64_t seed = 0;
  std::string queue_path, journal_path, host = "127.0.0.1", adjudication = "latest", refined_dir;
  int port = 8080;
  {
    auto *c = ann_cmd->add_subcommand("sample", "Draw a seeded review queue from lexicons");
    c->add_option("--lexicons", lexicons_dir)->required()->check(CLI::ExistingDirectory);
    c->add_option("--manifest", manifest, "Attach example training lines");
    c->add_option("--size", sample_size, "Items per domain");
    c->add_option("--seed", seed)->required();
    c->add_option("--out", out)->required();
    c->callback([&] {
      action = [&] {
        Diagnostics diag;
        std::optional<ExampleIndex> ex;
        if (!manifest.empty()) ex = collect_examples(load_corpus(manifest), NormalizeOptions{});
        auto items = enqueue_samples(read_lexicon_dir(lexicons_dir), sample_size, seed,
                                     ex ? &*ex : nullptr, &diag);
        write_or_print(out, items_to_jsonl(items));
        print_warnings(diag);
        return kExitOk;
      };
    });
  }
  auto parse_adj = [](const std::string &s) {
    if (s == "latest") return Adjudication::latest;
    if (s == "majority") return Adjudication::majority;
    throw Error("adjudication must be latest or majority");
  };
  {
    auto *c = ann_cmd->add_subcommand("serve", "Run the review HTTP service");
    c->add_option("--queue", queue_path)->required()->check(CLI::ExistingFile);
    c->add_option("--vocab", vocab_dir)->check(CLI::ExistingDirectory);
    c->add_option("--journal", journal_path, "Append-only judgment log (JSONL)")->required();
    c->add_option("--host", host);
    c->add_option("--port", port);
    c->add_option("--adjudication", adjudication);
    c->add_option("--refined-dir", refined_dir);
    c->callback([&] {
      action = [&] {
        JudgmentStore store(items_from_jsonl(read_file(queue_path)), fs::path(journal_path));
        std::map<std::string, AmbiguousVocabulary> vocabs;
        if (!vocab_dir.empty()) vocabs = read_vocabulary_dir(vocab_dir);
        AnnotationService::Options o;
        o.adjudication = parse_adj(adjudication);
        if (!refined_dir.empty()) o.refined_dir = fs::path(refined_dir);
        AnnotationService svc(store, std::move(vocabs), o);
        const int bound = svc.bind(host, port);
        std::cerr << "listening on http://" << host << ":" << bound << "\n";
        g_service = &svc;
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        svc.serve();
        g_service = nullptr;
        return kExitOk;
      };
    });
  }
  {
    auto *c = ann_cmd->add_subcommand("accuracy", "Per-domain label proportions from a journal");
    c->add_option("--queue", queue_path)->required()->check(CLI::ExistingFile);
    c->add_option("--journal", journal_path)->required()->check(CLI::ExistingFile);
    c->add_option("--adjudication", adjudication);
    c->callback([&] {
      action = [&] {
        Diagnostics diag;
        JudgmentStore store(items_from_jsonl(read_file(queue_path)), fs::path(journal_path));
        auto rows = alignment_accuracy(store.labels_by_domain(parse_adj(adjudication)), &diag);
        std::cout << "domain\tcorrect\tpartially_correct\tincorrect\tn\n";
        for (const auto &[dom, r] : rows)
          std::cout << dom << "\t" << r.percent(Label::correct) << "%\t"
                    << r.percent(Label::partially_correct) << "%\t" << r.percent(Label::incorrect)
                    << "%\t" << r.total() << "\n";
        print_warnings(diag);
        return kExitOk;
      };
    });
  }

  // prompts ------------------------------------------------------------------
  auto *prompt_cmd = app.add_subcommand("prompts", "Prompt template catalog");
  prompt_cmd->require_subcommand(1);
  std::string template_name, catalog_path, source, domain, target_language = "Chinese", tags,
      candidates, prior, examples_path;
  std::size_t shots = kDefaultShots;
  {
    auto *c = prompt_cmd->add_subcommand("render", "Render one template as a transcript");
    c->add_option("--template", template_name)->required();
    c->add_option("--sentence,--source", source)->required();
    c->add_option("--domain", domain);
    c->add_option("--target,--target-language", target_language);
    c->add_option("--tags", tags, "Word tags as index:Domain,...");
    c->add_option("--candidates", candidates, "Candidate domains, comma separated");
    c->add_option("--prior", prior, "First-pass hypothesis (reflection templates)");
    c->add_option("--examples", examples_path, "Few-shot pool JSONL {source, target, domain}");
    c->add_option("--shots", shots);
    c->add_option("--seed", seed);
    c->add_option("--catalog", catalog_path);
    c->callback([&] {
      action = [&] {
        std::optional<TemplateCatalog> slot;
        const auto &cat = catalog_from(catalog_path, slot);
        const auto id = parse_template_id(template_name);
        PromptContext ctx;
        ctx.source_sentence = source;
        ctx.target_language = target_language;
        if (!domain.empty()) ctx.domain = domain;
        ctx.candidate_domains = split_list(candidates);
        if (!tags.empty()) {
          std::map<int, std::string> m;
          for (const auto &t : split_list(tags)) {
            auto colon = t.find(':');
            if (colon == std::string::npos) throw Error("--tags entries look like 3:Laws");
            m[std::stoi(t.substr(0, colon))] = t.substr(colon + 1);
          }
          ctx.word_domain_tags = m;
        }
        Diagnostics diag;
        if (!examples_path.empty()) {
          std::vector<FewShotExample> pool;
          for (const auto &line : read_lines(examples_path)) {
            if (text::trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            FewShotExample e{j.at("source"), j.at("target"), std::nullopt};
            if (j.contains("domain")) e.domain = j["domain"].get<std::string>();
            pool.push_back(std::move(e));
          }
          std::optional<std::string> restrict;
          if (id == TemplateId::T9) restrict = domain;
          ctx.few_shot_examples = sample_few_shot(pool, shots, seed, restrict, &diag);
        }
        RenderedPrompt p;
        if (is_reflection(id)) {
          ctx.prior_hypothesis = prior;
          p = build_reflection_turns(id, ctx, cat);
        } else {
          p = render(id, ctx, cat);
        }
        std::cout << p.transcript();
        print_warnings(diag);
        return kExitOk;
      };
    });
  }
  {
    auto *c = prompt_cmd->add_subcommand("show", "Catalog version, checksum and skeletons");
    c->add_option("id", template_name, "Only this template");
    c->add_option("--catalog", catalog_path);
    c->callback([&] {
      action = [&] {
        std::optional<TemplateCatalog> slot;
        const auto &cat = catalog_from(catalog_path, slot);
        std::cout << "version: " << cat.version() << "\nchecksum: " << cat.checksum()
                  << "\nsystem: " << cat.system() << "\n";
        for (TemplateId id : all_templates()) {
          if (!template_name.empty() && id != parse_template_id(template_name)) continue;
          const auto &e = cat.entry(id);
          std::cout << "\n[" << to_string(id) << "]\n" << e.user << "\n";
          if (!e.reflection.empty()) std::cout << "(reflection) " << e.reflection << "\n";
        }
        return kExitOk;
      };
    });
  }

  // run ----------------------------------------------------------------------
  std::string backend_kind = "mock", dictionary;
  std::size_t parallelism = 4;
  {
    auto *c = app.add_subcommand("run", "Translate one domain's test set with one template");
    c->add_option("--manifest", manifest)->required();
    c->add_option("--domain", domain)->required();
    c->add_option("--template", template_name)->required();
    c->add_option("--backend", backend_kind, "mock or openai (AMBIG_API_BASE, AMBIG_API_KEY)");
    c->add_option("--dictionary", dictionary, "Mock dictionary TSV");
    c->add_option("--annotations", annotations_dir, "Annotation JSONL for word tags");
    c->add_option("--target-language", target_language);
    c->add_option("--shots", shots);
    c->add_option("--seed", seed, "Few-shot seed");
    c->add_option("--parallelism", parallelism)->check(CLI::PositiveNumber);
    c->add_option("--catalog", catalog_path);
    c->add_option("--out", out)->required();
    c->callback([&] {
      action = [&] {
        auto corpus = load_corpus(manifest);
        const auto *d = corpus.find_domain(domain);
        for (const auto &x : corpus.domains)
          if (!d && x.display_name == domain) d = &x;
        if (!d) throw Error("unknown domain '" + domain + "'");
        const auto id = parse_template_id(template_name);
        std::optional<TemplateCatalog> slot;
        const auto &cat = catalog_from(catalog_path, slot);
        std::map<int, std::map<int, std::string>> word_tags;
        if (!annotations_dir.empty())
          for (const auto &o : read_occurrences(annotations_dir)) word_tags[o.line_no][o.token_index] = d->display_name;
        std::vector<RunItem> items;
        for (const auto *p : corpus.split_pairs(d->id, Split::test))
          items.push_back({p->line_no, p->source_text, p->target_text, p->source_tokens, word_tags[p->line_no]});
        RunOptions ro;
        ro.domain = d->id;
        ro.domain_label = d->display_name;
        ro.target_language = target_language;
        for (const auto &x : corpus.domains) ro.candidate_domains.push_back(x.display_name);
        for (const auto &x : corpus.domains)
          for (const auto *p : corpus.split_pairs(x.id, Split::train))
            ro.few_shot_pool.push_back({p->source_text, p->target_text, x.display_name});
        ro.shots = shots;
        ro.few_shot_seed = seed;
        ro.parallelism = parallelism;
        ro.catalog = &cat;
        ro.checkpoint = fs::path(out);
        auto backend = make_backend(backend_kind, dictionary, corpus.source_lang, corpus.target_lang);
        auto records = run_strategy(items, id, GenerationConfig::for_template(id), *backend, ro);
        std::size_t failed = 0;
        for (const auto &r : records)
          if (!r.ok()) ++failed;
        std::cerr << records.size() << " records, " << failed << " failed\n";
        return kExitOk;
      };
    });
  }

  // score --------------------------------------------------------------------
  std::string run_path, mode = "lenient", scorer_url, target_lang = "zh";
  bool judge = false;
  {
    auto *c = app.add_subcommand("score", "BLEU, disambiguation accuracy and optional external scores");
    c->add_option("--run", run_path)->required()->check(CLI::ExistingFile);
    c->add_option("--annotations", annotations_dir, "Annotation JSONL for this domain")->required();
    c->add_option("--target-lang", target_lang, "Target language code");
    c->add_option("--mode", mode, "lenient or strict");
    c->add_option("--scorer-url", scorer_url, "External scorer base URL");
    c->add_flag("--judge", judge, "Ask an LLM judge (AMBIG_API_BASE, AMBIG_API_KEY)");
    c->add_option("--out", out);
    c->callback([&] {
      action = [&] {
        Diagnostics diag;
        const auto records = read_run_file(run_path);
        if (records.empty()) throw Error("run file has no records");
        const auto occ = read_occurrences(annotations_dir);
        ScoreSummary s;
        s.domain = records.front().domain;
        s.template_id = records.front().template_id;
        s.mode = parse_match_mode(mode);
        s.bleu_signature = bleu_signature(target_lang);
        s.bleu = corpus_bleu(records, target_lang).score;
        s.disamb = disambiguation_accuracy(records, occ, s.mode, target_lang, {}, &diag);
        if (!scorer_url.empty())
          if (auto ext = external_score(records, scorer_url, &diag))
            if (auto it = ext->domain_average.find(s.domain); it != ext->domain_average.end())
              s.comet = it->second;
        if (judge) {
          OpenAIBackend jb(OpenAIBackend::options_from_env());
          s.judge = judge_records(records, jb, GenerationConfig{}, parallelism);
        }
        write_or_print(out, score_to_json(s));
        print_warnings(diag);
        return kExitOk;
      };
    });
  }

  // significance -------------------------------------------------------------
  std::string run_a, run_b, metric_name = "bleu";
  int resamples = kDefaultResamples;
  {
    auto *c = app.add_subcommand("significance", "Paired bootstrap between two run files");
    c->add_option("--run-a", run_a)->required()->check(CLI::ExistingFile);
    c->add_option("--run-b", run_b)->required()->check(CLI::ExistingFile);
    c->add_option("--metric", metric_name, "bleu or disamb");
    c->add_option("--annotations", annotations_dir, "Needed for --metric disamb");
    c->add_option("--mode", mode);
    c->add_option("--target-lang", target_lang);
    c->add_option("--resamples", resamples);
    c->add_option("--seed", seed)->required();
    c->callback([&] {
      action = [&] {
        const auto a = read_run_file(run_a);
        const auto b = read_run_file(run_b);
        SentenceMetric m;
        if (metric_name == "bleu") {
          m = bleu_metric(target_lang);
        } else if (metric_name == "disamb") {
          if (annotations_dir.empty()) throw Error("--metric disamb needs --annotations");
          m = disambiguation_metric(read_occurrences(annotations_dir), parse_match_mode(mode), target_lang);
        } else {
          throw Error("unknown metric '" + metric_name + "'");
        }
        auto r = paired_bootstrap(a, b, m, resamples, seed);
        ordered_json j{{"metric", metric_name},   {"score_a", r.score_a},
                       {"score_b", r.score_b},    {"better", r.better_system},
                       {"p_value", r.p_value},    {"resamples", r.n_resamples},
                       {"significant", r.p_value < kSignificanceLevel}};
        std::cout << j.dump(2) << "\n";
        return kExitOk;
      };
    });
  }

  // report -------------------------------------------------------------------
  std::vector<std::string> score_paths;
  std::string format = "markdown", pairing = "default", domain_order;
  {
    auto *c = app.add_subcommand("report", "Aggregate score files into a table with deltas");
    c->add_option("--scores,scores", score_paths, "Score files or directories")->required();
    c->add_option("--format", format, "markdown, csv or json");
    c->add_option("--pairing", pairing, "default or e.g. T5-T1,T6-T1");
    c->add_option("--domains", domain_order, "Column order, comma separated");
    c->add_option("--out", out);
    c->callback([&] {
      action = [&] {
        std::vector<fs::path> files;
        for (const auto &p : score_paths) {
          if (fs::is_directory(p)) {
            for (const auto &e : fs::recursive_directory_iterator(p))
              if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
          } else {
            files.emplace_back(p);
          }
        }
        std::sort(files.begin(), files.end());
        std::vector<ScoreSummary> scores;
        for (const auto &f : files) scores.push_back(read_score(f));
        Diagnostics diag;
        auto table = aggregate(scores, split_list(domain_order));
        auto deltas = delta(table, parse_pairing(pairing), &diag);
        write_or_print(out, emit(table, deltas, parse_report_format(format), {{"tool_version", kToolVersion}}));
        print_warnings(diag);
        return kExitOk;
      };
    });
  }

  // pipeline -----------------------------------------------------------------
  auto *pipe_cmd = app.add_subcommand("pipeline", "End-to-end orchestration");
  pipe_cmd->require_subcommand(1);
  std::string pipeline_config;
  bool force = false, json_logs = false;
  {
    auto *c = pipe_cmd->add_subcommand("all", "Manifest to report, skipping up-to-date stages");
    c->add_option("config", pipeline_config, "Pipeline config (JSON)")->required();
    c->add_flag("--force", force, "Rerun every stage");
    c->add_flag("--json-logs", json_logs, "Progress as JSON lines on stderr");
    c->callback([&] {
      action = [&] {
        PipelineConfig cfg;
        try {
          cfg = load_pipeline_config(pipeline_config);
        } catch (const ValidationError &e) {
          std::cerr << "error: " << e.what() << "\n";
          return kExitValidation;
        }
        PipelineOptions o;
        o.force = force;
        o.on_event = [&](const PipelineEvent &ev) {
          if (json_logs)
            std::cerr << ordered_json{{"stage", ev.stage}, {"event", ev.event}, {"detail", ev.detail}}.dump() << "\n";
          else
            std::cerr << "[" << ev.stage << "] " << ev.event << (ev.detail.empty() ? "" : ": " + ev.detail) << "\n";
        };
        try {
          auto r = pipeline_all(cfg, o);
          if (json_logs)
            std::cerr << ordered_json{{"event", "finished"}, {"executed", r.executed}, {"skipped", r.skipped}}.dump() << "\n";
          else
            std::cerr << r.executed.size() << " stages executed, " << r.skipped.size() << " skipped\n";
          for (const auto &p : r.reports) std::cout << p.string() << "\n";
        } catch (const ValidationError &e) {
          std::cerr << "error: " << e.what() << "\n";
          return kExitValidation;
        } catch (const StageError &e) {
          if (json_logs)
            std::cerr << ordered_json{{"event", "failed"}, {"stage", e.stage()}, {"artifact", e.artifact().string()}, {"error", e.what()}}.dump() << "\n";
          else
            std::cerr << "error: " << e.what() << "\n";
          return kExitStage;
        }
        return kExitOk;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }
  try {
    return action ? action() : kExitOk;
  } catch (const ParseError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
