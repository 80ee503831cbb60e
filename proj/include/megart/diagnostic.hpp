#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace megart {

/// Location of an element in a source text. Lines and columns are 1-based.
struct SourceSpan {
  std::string file;
  int line_begin = 1;
  int col_begin = 1;
  int line_end = 1;
  int col_end = 1;

  bool operator==(const SourceSpan&) const = default;
};

enum class Severity { error, warning };

/// A rule violation. `code` is a stable rule id such as "E-OP-EXITS";
/// `path` names the offending element ("op:Repair", "flow:3").
struct Diagnostic {
  Severity severity = Severity::error;
  std::string code;
  std::string message;
  SourceSpan span;
  std::string path;
};

using Diagnostics = std::vector<Diagnostic>;

bool has_errors(const Diagnostics& diags);
bool has_code(const Diagnostics& diags, std::string_view code);

/// "file:line:col: error E-CODE: message"
std::string format_diagnostic(const Diagnostic& d);

/// Runtime failure carrying a rule id (E-EXIT-UNKNOWN, E-REENTRY, ...).
class EngineError : public std::runtime_error {
 public:
  EngineError(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Parse outcome: either a value or the diagnostics explaining why not.
/// Warnings may accompany a value.
template <typename T>
struct Parsed {
  std::optional<T> value;
  Diagnostics diagnostics;

  explicit operator bool() const { return value.has_value(); }
  T& operator*() { return *value; }
  const T& operator*() const { return *value; }
  T* operator->() { return &*value; }
  const T* operator->() const { return &*value; }
};

}  // namespace megart
