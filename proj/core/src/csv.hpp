#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ordprobe::csv {

struct Record {
  std::size_t line = 0;  // 1-based line on which the record starts
  std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
/// Throws Error(data) on an unterminated quote.
std::vector<Record> parse(std::string_view text);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

}  // namespace ordprobe::csv
