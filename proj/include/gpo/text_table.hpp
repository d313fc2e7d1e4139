#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gpo {

// Comma-separated numeric table with a mandatory header line. Blank lines
// and lines starting with '#' are skipped.
struct TextTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

TextTable read_table(const std::filesystem::path &path);
TextTable parse_table(const std::string &text, const std::string &origin);

// Shortest decimal form that round-trips the double exactly.
std::string format_double(double v);

std::vector<std::string> split(const std::string &s, char sep);
std::string trim(const std::string &s);

void write_text_file(const std::filesystem::path &path, const std::string &content);
std::string read_text_file(const std::filesystem::path &path);

} // namespace gpo
