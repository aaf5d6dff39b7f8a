#include "rlstat/io/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "rlstat/error.hpp"

namespace rlstat::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Reads one record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  int c = in.peek();
  if (c == EOF) return false;
  std::string field;
  bool quoted = false, was_quoted = false;
  while (true) {
    c = in.get();
    if (c == EOF) {
      if (quoted) throw DataError("cli_io", "unterminated quoted field starting near line " + std::to_string(line));
      break;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && trim(field).empty() && !was_quoted) {
      field.clear();
      quoted = was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else if (ch == '\n') {
      ++line;
      break;
    } else {
      field.push_back(ch);
    }
  }
  fields.push_back(was_quoted ? field : trim(field));
  return true;
}

bool blank(const std::vector<std::string>& fields) {
  return std::all_of(fields.begin(), fields.end(), [](const std::string& f) { return f.empty(); });
}

}  // namespace

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) return false;
  if (errno == ERANGE && std::isinf(v)) return false;
  out = v;
  return true;
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  if (in.peek() == 0xEF) {
    char bom[3];
    in.read(bom, 3);
    if (!(static_cast<unsigned char>(bom[1]) == 0xBB && static_cast<unsigned char>(bom[2]) == 0xBF))
      throw DataError("cli_io", "input is not UTF-8 text");
  }
  std::size_t line = 1;
  std::vector<std::string> fields;
  while (read_record(in, fields, line) && blank(fields)) {
  }
  if (fields.empty() || blank(fields)) throw DataError("cli_io", "no data rows: empty file");
  t.header = fields;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i].empty()) throw DataError("cli_io", "empty column name in header position " + std::to_string(i + 1));
    for (std::size_t j = 0; j < i; ++j)
      if (t.header[j] == t.header[i]) throw DataError("cli_io", "duplicate column '" + t.header[i] + "'");
  }
  while (true) {
    const std::size_t start = line;
    if (!read_record(in, fields, line)) break;
    if (blank(fields)) continue;
    if (fields.size() != t.header.size())
      throw DataError("cli_io", "line " + std::to_string(start) + " has " + std::to_string(fields.size()) +
                                    " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(fields);
  }
  if (t.rows.empty()) throw DataError("cli_io", "no data rows");
  return t;
}

PanelDataset to_dataset(const CsvTable& table, const std::string& cluster_column,
                        const std::vector<std::string>& numeric_columns, LoadReport* report) {
  if (table.rows.empty()) throw DataError("cli_io", "no data rows");
  const auto find = [&](const std::string& name) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw DataError("cli_io", "unknown column '" + name + "'");
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const std::size_t cluster_idx = find(cluster_column);
  std::vector<bool> role(table.header.size(), false);
  for (const auto& name : numeric_columns) role[find(name)] = true;

  const std::size_t n = table.rows.size();
  std::vector<std::string> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    labels[r] = table.rows[r][cluster_idx];
    if (labels[r].empty())
      throw DataError("cli_io", "missing cluster id at data row " + std::to_string(r + 1));
  }

  std::vector<Column> cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    Column col;
    col.name = table.header[c];
    col.values.assign(n, std::numeric_limits<double>::quiet_NaN());
    bool numeric = true;
    for (std::size_t r = 0; r < n && numeric; ++r) {
      const std::string& cell = table.rows[r][c];
      if (cell.empty()) continue;
      double v;
      if (parse_double(cell, v)) {
        col.values[r] = v;
      } else if (role[c]) {
        throw DataError("cli_io", "non-numeric cell '" + cell + "' in column '" + col.name +
                                      "' at data row " + std::to_string(r + 1));
      } else {
        numeric = false;
      }
    }
    if (!numeric) {
      col.numeric = false;
      col.values.clear();
      col.labels.reserve(n);
      for (std::size_t r = 0; r < n; ++r) col.labels.push_back(table.rows[r][c]);
    }
    cols.push_back(std::move(col));
  }

  PanelDataset data(std::move(labels), std::move(cols));
  std::size_t dropped = 0;
  if (!numeric_columns.empty()) data = data.drop_missing(numeric_columns, &dropped);
  if (data.rows() == 0) throw DataError("cli_io", "no data rows left after dropping missing cells");
  if (report) {
    report->rows = data.rows();
    report->clusters = data.clusters();
    report->dropped = dropped;
  }
  return data;
}

PanelDataset load_csv(const std::string& path, const std::string& cluster_column,
                      const std::vector<std::string>& numeric_columns, LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cli_io", "cannot open '" + path + "'");
  return to_dataset(read_csv(in), cluster_column, numeric_columns, report);
}

}  // namespace rlstat::io
