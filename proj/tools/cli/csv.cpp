#include "cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace fabconf::cli {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return c;
  throw CsvError(1, "missing column '" + name + "'");
}

double CsvTable::number(std::size_t r, std::size_t c) const {
  const std::string& field = rows.at(r).at(c);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(v))
    throw CsvError(row_lines.at(r), "not a finite number: '" + field + "'");
  return v;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw CsvError(line_no, "expected " + std::to_string(table.header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    table.row_lines.push_back(line_no);
  }
  if (!have_header) throw CsvError(0, "empty CSV input");
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError(0, "cannot open '" + path + "'");
  return read_csv(in);
}

}  // namespace fabconf::cli
