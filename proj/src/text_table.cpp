#include "gpo/text_table.hpp"
#include "gpo/common.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gpo {

std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

TextTable parse_table(const std::string &text, const std::string &origin) {
  TextTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!have_header) {
      for (auto &h : split(t, ',')) table.header.push_back(trim(h));
      have_header = true;
      continue;
    }
    std::vector<double> row;
    for (auto &cell : split(t, ',')) {
      const std::string c = trim(cell);
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || res.ec != std::errc() || res.ptr != c.data() + c.size() || !std::isfinite(v))
        fail(ErrorKind::Format, origin + ":" + std::to_string(lineno) + ": not a finite number: '" + c + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) fail(ErrorKind::Format, origin + ": missing header line");
  return table;
}

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TextTable read_table(const std::filesystem::path &path) {
  return parse_table(read_text_file(path), path.string());
}

void write_text_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

} // namespace gpo
