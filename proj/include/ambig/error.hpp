#pragma once

#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ambig {

/// Base class for all recoverable toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `token` and `column` are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string &what, int token, int column)
      : Error(what), token_(token), column_(column) {}
  int token() const { return token_; }
  int column() const { return column_; }

 private:
  int token_;
  int column_;
};

/// Collects non-fatal warnings produced by an operation. Thread-safe.
class Diagnostics {
 public:
  void warn(std::string message) {
    std::lock_guard lock(mu_);
    warnings_.push_back(std::move(message));
  }
  std::vector<std::string> warnings() const {
    std::lock_guard lock(mu_);
    return warnings_;
  }
  /// Returns and clears the collected warnings.
  std::vector<std::string> take() {
    std::lock_guard lock(mu_);
    return std::exchange(warnings_, {});
  }
  bool empty() const {
    std::lock_guard lock(mu_);
    return warnings_.empty();
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> warnings_;
};

inline void warn(Diagnostics *diag, std::string message) {
  if (diag) diag->warn(std::move(message));
}

}  // namespace ambig
