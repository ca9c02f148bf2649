#pragma once

#include <stdexcept>
#include <string>

namespace ordprobe {

enum class ErrorKind {
  config,              // invalid configuration or command-line input
  data,                // malformed dataset, template or artifact
  backend,             // language-model backend failure
  context_overflow,    // prompt does not fit the backend context window
  fixture_incomplete,  // replay cache is missing an entry
  empty_probing_set,   // no probe could be extracted from any generation
  io,                  // filesystem failure
};

const char* to_string(ErrorKind kind);

/// Process exit code used by the command-line tool for each error kind.
/// 0 ok, 2 config/data error, 3 backend error, 4 fixture incomplete,
/// 5 empty probing set, 1 anything else.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retryable, int attempts)
      : Error(ErrorKind::backend, message),
        retryable_(retryable),
        attempts_(attempts) {}

  bool retryable() const noexcept { return retryable_; }
  int attempts() const noexcept { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

}  // namespace ordprobe
