#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace pgp::csv {

/// Splits one record. Fields may be double-quoted; "" inside quotes is a
/// literal quote. Returns false on an unterminated quote.
bool split(std::string_view line, std::vector<std::string>& fields);

/// Streaming reader for headered files. Strips a UTF-8 BOM and trailing '\r'.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const noexcept { return header_; }
  /// Column position of `name`; throws IoError when absent.
  std::size_t column(std::string_view name) const;

  /// Reads the next non-empty record. `ok` is false when the record could
  /// not be split (the caller decides whether that is fatal).
  bool next(std::vector<std::string>& fields, bool& ok);
  std::size_t line_number() const noexcept { return line_no_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t line_no_ = 0;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};

/// Whole file; any malformed or short record throws IoError.
Table read_table(const std::filesystem::path& path);

/// Shortest decimal text that round-trips to the same double.
std::string format(double value);

double parse_double(const std::string& text);
long long parse_int(const std::string& text);

}  // namespace pgp::csv
