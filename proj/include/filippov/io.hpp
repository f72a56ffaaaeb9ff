#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "filippov/errors.hpp"

#include "json.hpp"

namespace filippov {

inline constexpr const char* kToolVersion = "0.1.0";

/// All structured output goes through ordered_json so key order is fixed by
/// insertion order, making byte-identical reruns possible.
using json = nlohmann::ordered_json;

/// Shortest round-trip decimal form. Deterministic on one platform and stable
/// across runs, unlike stream formatting with locale-dependent state.
inline std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// RFC 4180 table: header row mandatory, CRLF line endings. A `# key = value`
/// preamble carries the resolved run configuration; readers that insist on
/// bare RFC 4180 can drop lines starting with '#'.
struct CsvTable {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) {
    if (row.size() != header.size())
      throw ConfigError("csv: row width " + std::to_string(row.size()) +
                        " does not match header width " + std::to_string(header.size()));
    rows.push_back(std::move(row));
  }

  std::string str() const {
    std::string out;
    for (const auto& c : comments) out += "# " + c + "\r\n";
    append_line(out, header);
    for (const auto& r : rows) append_line(out, r);
    return out;
  }

 private:
  static void append_line(std::string& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_quote(fields[i]);
    }
    out += "\r\n";
  }
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw ConfigError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open: " + path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return s;
}

}  // namespace filippov
