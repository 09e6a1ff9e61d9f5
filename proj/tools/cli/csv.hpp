#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fabconf::cli {

/// Malformed input; `line` is 1-based (0 when not tied to a line).
class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // source line of each row

  /// Column index by name; throws CsvError when missing.
  std::size_t column(const std::string& name) const;
  /// Parses rows[r][c] as a finite double; throws CsvError with the line.
  double number(std::size_t r, std::size_t c) const;
};

/// Comma-separated, first line is the header, blank lines skipped, fields
/// trimmed. No quoting. Every row must have as many fields as the header.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

}  // namespace fabconf::cli
