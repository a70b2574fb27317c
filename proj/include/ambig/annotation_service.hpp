#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "ambig/ambiguity.hpp"
#include "ambig/annotation.hpp"

namespace ambig {

/// HTTP front end for the review workflow.
///
///   GET  /queue?domain=&status=   review items, pending first
///   POST /judgments               {item_id, label, annotator}
///   GET  /accuracy                per-domain label proportions
///   POST /refinements/apply       derive actions from judgments and apply
///   GET  /vocab/:domain           current (possibly refined) vocabulary
class AnnotationService {
 public:
  struct Options {
    Adjudication adjudication = Adjudication::latest;
    /// When set, refined vocabularies are also written here as <domain>.json.
    std::optional<std::filesystem::path> refined_dir;
  };

  AnnotationService(JudgmentStore &store,
                    std::map<std::string, AmbiguousVocabulary> vocabularies,
                    Options options);
  ~AnnotationService();
  AnnotationService(const AnnotationService &) = delete;
  AnnotationService &operator=(const AnnotationService &) = delete;

  /// Binds to `port` (0 picks a free port) and returns the bound port.
  int bind(const std::string &host, int port);
  /// Serves until stop(); call after bind().
  void serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ambig
