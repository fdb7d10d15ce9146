#include "scglr/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "scglr/errors.hpp"

namespace scglr {

int CsvTable::find(const std::string& name) const {
  for (size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

int CsvTable::require(const std::string& name, const std::string& what) const {
  const int j = find(name);
  if (j < 0)
    throw UserError(what + ": missing required column '" + name + "'");
  return j;
}

namespace {

std::vector<std::string> parse_record(const std::string& text, size_t& pos,
                                      const std::string& what, int line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  while (pos < text.size()) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          pos += 2;
        } else {
          quoted = false;
          ++pos;
        }
      } else {
        field += c;
        ++pos;
      }
      continue;
    }
    if (c == '"' && field.empty() && !any) {
      quoted = true;
      any = true;
      ++pos;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      any = false;
      ++pos;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      fields.push_back(std::move(field));
      return fields;
    } else {
      field += c;
      any = true;
      ++pos;
    }
  }
  if (quoted)
    throw UserError(what + ": unterminated quoted field at line " +
                    std::to_string(line));
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& what) {
  CsvTable table;
  size_t pos = 0;
  int line = 1;
  if (text.empty()) throw UserError(what + ": file is empty");
  table.header = parse_record(text, pos, what, line);
  while (pos < text.size()) {
    ++line;
    // tolerate a trailing newline at end of file
    if (pos == text.size() - 1 && (text[pos] == '\n')) break;
    auto fields = parse_record(text, pos, what, line);
    if (fields.size() == 1 && fields[0].empty() && pos >= text.size()) break;
    if (fields.size() != table.header.size())
      throw UserError(what + ": line " + std::to_string(line) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    table.rows.push_back(std::move(fields));
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path);
}

namespace {

std::string quote_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string format_csv(const CsvTable& table) {
  std::string out;
  for (size_t j = 0; j < table.header.size(); ++j) {
    if (j) out += ',';
    out += quote_field(table.header[j]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += quote_field(row[j]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write '" + path + "'");
  out << format_csv(table);
  if (!out) throw UserError("write to '" + path + "' failed");
}

double parse_double_cell(const std::string& cell, const std::string& what,
                         int row, const std::string& col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || end != begin + cell.size() || !std::isfinite(value))
    throw UserError(what + ": row " + std::to_string(row) + ", column '" +
                    col + "': '" + cell + "' is not a finite number");
  return value;
}

std::string format_double(double value) {
  char buf[40];
  // 17 significant digits round-trip any double.
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

Eigen::VectorXd numeric_column(const CsvTable& table, int col,
                               const std::string& what) {
  Eigen::VectorXd out(table.n_rows());
  for (int i = 0; i < table.n_rows(); ++i)
    out[i] = parse_double_cell(table.rows[i][col], what, i + 1,
                               table.header[col]);
  return out;
}

}  // namespace scglr
