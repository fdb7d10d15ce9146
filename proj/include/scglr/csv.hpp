#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scglr {

// Comma-separated table with a mandatory header row.  Quoting follows
// the usual rules: fields containing commas, quotes or line breaks are
// wrapped in double quotes, embedded quotes are doubled, and CRLF line
// ends are accepted on input.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int n_rows() const { return static_cast<int>(rows.size()); }
  int n_cols() const { return static_cast<int>(header.size()); }
  // Column index by name; -1 when absent.
  int find(const std::string& name) const;
  // Same but throwing; `what` names the file in the error.
  int require(const std::string& name, const std::string& what) const;
};

CsvTable parse_csv(const std::string& text, const std::string& what);
CsvTable read_csv(const std::string& path);
std::string format_csv(const CsvTable& table);
void write_csv(const std::string& path, const CsvTable& table);

// Numeric cell with row/column context in errors (1-based data rows).
double parse_double_cell(const std::string& cell, const std::string& what,
                         int row, const std::string& col);

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Numeric column extraction (all rows).
Eigen::VectorXd numeric_column(const CsvTable& table, int col,
                               const std::string& what);

}  // namespace scglr
