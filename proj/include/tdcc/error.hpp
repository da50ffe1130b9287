#pragma once

#include <stdexcept>
#include <string>

namespace tdcc {

/// Machine-readable failure categories. The CLI prints the code verbatim.
enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  Overflow,
  NotPsd,
  NotPd,
  Degenerate,
  FilterBreakdown,
  Unimplemented,
  NoConvergence,
  Parse,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception carrying a code plus the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& message)
      : std::runtime_error(message), code_(code), module_(std::move(module)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

}  // namespace tdcc
