#include "partsyn/csv.hpp"

namespace partsyn::csv {

std::optional<std::vector<std::string>> Reader::next() {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  record_line_ = line_;

  for (int ch = in_.get(); ch != std::char_traits<char>::eof(); ch = in_.get()) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in_.peek() == '"') {
          field.push_back('"');
          in_.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        break;
      case '\n':
        ++line_;
        fields.push_back(std::move(field));
        return fields;
      default:
        field.push_back(c);
    }
  }
  if (!any) return std::nullopt;
  fields.push_back(std::move(field));
  return fields;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

}  // namespace partsyn::csv
