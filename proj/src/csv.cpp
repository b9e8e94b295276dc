#include "pgp/csv.hpp"

#include <charconv>
#include <cmath>

#include "pgp/error.hpp"

namespace pgp::csv {

bool split(std::string_view line, std::vector<std::string>& fields) {
  fields.clear();
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return !quoted;
}

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in_, line)) throw IoError(path.string() + ": missing header");
  ++line_no_;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (!split(line, header_) || line.empty()) {
    throw IoError(path.string() + ": malformed header");
  }
}

std::size_t Reader::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw IoError(path_.string() + ": missing column '" + std::string(name) + "'");
}

bool Reader::next(std::vector<std::string>& fields, bool& ok) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ok = split(line, fields);
    return true;
  }
  return false;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IoError("missing column '" + std::string(name) + "'");
}

Table read_table(const std::filesystem::path& path) {
  Reader reader(path);
  Table t;
  t.header = reader.header();
  std::vector<std::string> fields;
  bool ok = true;
  while (reader.next(fields, ok)) {
    if (!ok || fields.size() != t.header.size()) {
      throw IoError(path.string() + ": malformed record at line " +
                    std::to_string(reader.line_number()));
    }
    t.rows.push_back(fields);
  }
  return t;
}

std::string format(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw IoError("not a number: '" + text + "'");
  }
  return v;
}

long long parse_int(const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw IoError("not an integer: '" + text + "'");
  }
  return v;
}

}  // namespace pgp::csv
