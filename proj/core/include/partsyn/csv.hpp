#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace partsyn::csv {

/// Streaming RFC 4180 reader: quoted fields, doubled quotes and line breaks
/// inside quotes are supported. Both LF and CRLF line endings are accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next record, or nullopt at end of input.
  std::optional<std::vector<std::string>> next();

  /// 1-based physical line on which the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

/// Quotes a field only when it contains a delimiter, quote or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace partsyn::csv
