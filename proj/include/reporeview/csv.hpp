#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reporeview {

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t record, const std::string& what);
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

/// Quotes when the field holds a comma, quote, CR or LF, or when `force` is set.
std::string csv_field(std::string_view value, bool force = false);

/// RFC 4180 records. Accepts LF or CRLF line ends; a trailing newline ends the last
/// record. Throws CsvError (1-based record number) on an unterminated quote or on stray
/// characters after a closing quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace reporeview
