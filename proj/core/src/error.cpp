#include "ordprobe/error.hpp"

namespace ordprobe {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config error";
    case ErrorKind::data: return "data error";
    case ErrorKind::backend: return "backend error";
    case ErrorKind::context_overflow: return "context overflow";
    case ErrorKind::fixture_incomplete: return "fixture incomplete";
    case ErrorKind::empty_probing_set: return "empty probing set";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::data:
      return 2;
    case ErrorKind::backend:
    case ErrorKind::context_overflow:
      return 3;
    case ErrorKind::fixture_incomplete:
      return 4;
    case ErrorKind::empty_probing_set:
      return 5;
    case ErrorKind::io:
      return 1;
  }
  return 1;
}

}  // namespace ordprobe
