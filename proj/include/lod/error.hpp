#pragma once

#include <stdexcept>
#include <string>

namespace lod {

/// Failure classes. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  InvalidArgument,
  InvalidGeometry,
  MissingInput,
  Format,
  Validation,
  StageMismatch,
  Numerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Exit code used by the CLI for a given failure class.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace lod
