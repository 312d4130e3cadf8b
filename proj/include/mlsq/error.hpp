#pragma once

#include <stdexcept>
#include <string>

namespace mlsq {

/// Failure categories; the CLI maps them onto process exit codes.
enum class ErrorKind {
  InvalidInput,  // malformed file, bad argument, violated precondition
  Degenerate,    // single-class labels, too few cells, collapsed neighborhoods
  Io,            // unreadable or unwritable path
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void invalid_input(const std::string& message) {
  throw Error(ErrorKind::InvalidInput, message);
}

[[noreturn]] inline void degenerate(const std::string& message) {
  throw Error(ErrorKind::Degenerate, message);
}

[[noreturn]] inline void io_error(const std::string& message) {
  throw Error(ErrorKind::Io, message);
}

}  // namespace mlsq
