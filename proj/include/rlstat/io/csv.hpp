#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

#include "rlstat/dataset.hpp"

namespace rlstat::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC 4180 style: comma separated, double-quoted fields may contain commas,
// quotes ("") and newlines. A UTF-8 byte order mark is skipped.
CsvTable read_csv(std::istream& in);

struct LoadReport {
  std::size_t rows = 0;      // rows kept
  std::size_t clusters = 0;
  std::size_t dropped = 0;   // rows with a missing cell in a role column
};

// Builds a panel dataset. Columns named in `numeric_columns` must hold
// numbers (empty cells are missing and drop the row); other columns are
// numeric when every non-empty cell parses, text otherwise.
PanelDataset to_dataset(const CsvTable& table, const std::string& cluster_column,
                        const std::vector<std::string>& numeric_columns, LoadReport* report = nullptr);

PanelDataset load_csv(const std::string& path, const std::string& cluster_column,
                      const std::vector<std::string>& numeric_columns = {},
                      LoadReport* report = nullptr);

// Strict full-string number parse; false for empty or trailing garbage.
bool parse_double(const std::string& cell, double& out);

}  // namespace rlstat::io
