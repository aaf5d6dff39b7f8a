#include "rlstat/dataset.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <unordered_map>

#include "rlstat/error.hpp"

namespace rlstat {

namespace {

Column gather(const Column& src, std::span<const std::size_t> rows) {
  Column out;
  out.name = src.name;
  out.numeric = src.numeric;
  if (src.numeric) {
    out.values.reserve(rows.size());
    for (auto r : rows) out.values.push_back(src.values[r]);
  } else {
    out.labels.reserve(rows.size());
    for (auto r : rows) out.labels.push_back(src.labels[r]);
  }
  return out;
}

std::size_t column_length(const Column& c) {
  return c.numeric ? c.values.size() : c.labels.size();
}

}  // namespace

Column numeric_column(std::string name, std::vector<double> values) {
  Column c;
  c.name = std::move(name);
  c.numeric = true;
  c.values = std::move(values);
  return c;
}

PanelDataset::PanelDataset(std::vector<std::string> row_cluster, std::vector<Column> columns) {
  std::vector<double> unit(row_cluster.size(), 1.0);
  init(std::move(row_cluster), std::move(columns), std::move(unit));
}

void PanelDataset::init(std::vector<std::string> row_cluster, std::vector<Column> columns,
                        std::vector<double> row_weights) {
  const std::size_t n = row_cluster.size();
  for (const auto& c : columns) {
    if (column_length(c) != n) {
      throw DataError("dataset", "column '" + c.name + "' has " + std::to_string(column_length(c)) +
                                     " rows, expected " + std::to_string(n));
    }
  }
  // Stable grouping by first appearance of each cluster label.
  std::unordered_map<std::string, std::size_t> id;
  std::vector<std::size_t> cluster_of(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto [it, inserted] = id.emplace(row_cluster[r], cluster_labels_.size());
    if (inserted) cluster_labels_.push_back(row_cluster[r]);
    cluster_of[r] = it->second;
  }
  std::vector<std::size_t> counts(cluster_labels_.size(), 0);
  for (auto c : cluster_of) ++counts[c];
  offsets_.assign(cluster_labels_.size() + 1, 0);
  for (std::size_t c = 0; c < counts.size(); ++c) offsets_[c + 1] = offsets_[c] + counts[c];
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t r = 0; r < n; ++r) order[cursor[cluster_of[r]]++] = r;

  row_cluster_.resize(n);
  for (std::size_t c = 0; c < clusters(); ++c) {
    for (std::size_t r = offsets_[c]; r < offsets_[c + 1]; ++r) row_cluster_[r] = c;
  }
  for (auto& col : columns) add_column(gather(col, order));
  row_weights_.resize(n);
  for (std::size_t k = 0; k < n; ++k) row_weights_[k] = row_weights[order[k]];
}

bool PanelDataset::has_column(std::string_view name) const {
  return index_.find(name) != index_.end();
}

const Column& PanelDataset::column(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("dataset", "unknown column '" + std::string(name) + "'");
  return columns_[it->second];
}

std::span<const double> PanelDataset::numeric(std::string_view name) const {
  const Column& c = column(name);
  if (!c.numeric) {
    std::size_t bad = 0;
    for (std::size_t r = 0; r < c.labels.size(); ++r) {
      char* end = nullptr;
      const std::string& s = c.labels[r];
      if (s.empty()) continue;
      std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0') {
        bad = r;
        break;
      }
    }
    throw DataError("dataset", "column '" + c.name + "' is not numeric (cell '" +
                                   (c.labels.empty() ? std::string() : c.labels[bad]) +
                                   "' in data row " + std::to_string(bad + 1) + ")");
  }
  return c.values;
}

std::vector<std::string> PanelDataset::column_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

bool PanelDataset::unit_row_weights() const {
  for (double w : row_weights_)
    if (w != 1.0) return false;
  return true;
}

void PanelDataset::add_column(Column column) {
  if (column_length(column) != rows()) {
    throw DataError("dataset", "column '" + column.name + "' length mismatch");
  }
  auto it = index_.find(column.name);
  if (it != index_.end()) {
    columns_[it->second] = std::move(column);
    return;
  }
  index_.emplace(column.name, columns_.size());
  columns_.push_back(std::move(column));
}

PanelDataset PanelDataset::select_clusters(std::span<const std::size_t> cluster_idx,
                                           bool relabel) const {
  PanelDataset out;
  std::vector<std::size_t> rows;
  out.cluster_labels_.reserve(cluster_idx.size());
  out.offsets_.reserve(cluster_idx.size() + 1);
  for (std::size_t k = 0; k < cluster_idx.size(); ++k) {
    const std::size_t c = cluster_idx[k];
    if (c >= clusters()) throw UsageError("dataset", "cluster index out of range");
    out.cluster_labels_.push_back(relabel ? cluster_labels_[c] + "#" + std::to_string(k)
                                          : cluster_labels_[c]);
    for (std::size_t r = offsets_[c]; r < offsets_[c + 1]; ++r) {
      rows.push_back(r);
      out.row_cluster_.push_back(k);
    }
    out.offsets_.push_back(rows.size());
  }
  for (const auto& col : columns_) out.add_column(gather(col, rows));
  out.row_weights_.reserve(rows.size());
  for (auto r : rows) out.row_weights_.push_back(row_weights_[r]);
  return out;
}

PanelDataset PanelDataset::select_rows(std::span<const std::size_t> row_idx) const {
  std::vector<std::string> labels;
  labels.reserve(row_idx.size());
  std::vector<double> rw;
  rw.reserve(row_idx.size());
  for (auto r : row_idx) {
    if (r >= rows()) throw UsageError("dataset", "row index out of range");
    labels.push_back(cluster_labels_[row_cluster_[r]]);
    rw.push_back(row_weights_[r]);
  }
  std::vector<Column> cols;
  for (const auto& col : columns_) cols.push_back(gather(col, row_idx));
  PanelDataset out;
  out.init(std::move(labels), std::move(cols), std::move(rw));
  return out;
}

PanelDataset PanelDataset::with_row_weights(std::vector<double> weights) const {
  if (weights.size() != rows()) throw UsageError("dataset", "row weight length mismatch");
  PanelDataset out = *this;
  out.row_weights_ = std::move(weights);
  return out;
}

PanelDataset PanelDataset::drop_missing(std::span<const std::string> names,
                                        std::size_t* dropped) const {
  std::vector<bool> keep(rows(), true);
  for (const auto& name : names) {
    auto v = numeric(name);
    for (std::size_t r = 0; r < rows(); ++r)
      if (std::isnan(v[r])) keep[r] = false;
  }
  std::vector<std::size_t> rows_kept;
  for (std::size_t r = 0; r < rows(); ++r)
    if (keep[r]) rows_kept.push_back(r);
  if (dropped) *dropped = rows() - rows_kept.size();
  PanelDataset out;
  for (std::size_t c = 0; c < clusters(); ++c) {
    const std::size_t before = out.row_cluster_.size();
    for (std::size_t r = offsets_[c]; r < offsets_[c + 1]; ++r) {
      if (keep[r]) out.row_cluster_.push_back(out.cluster_labels_.size());
    }
    if (out.row_cluster_.size() > before) {
      out.cluster_labels_.push_back(cluster_labels_[c]);
      out.offsets_.push_back(out.row_cluster_.size());
    }
  }
  for (const auto& col : columns_) out.add_column(gather(col, rows_kept));
  for (auto r : rows_kept) out.row_weights_.push_back(row_weights_[r]);
  return out;
}

void add_within_cluster_lag(PanelDataset& data, const std::string& column, std::size_t lag,
                            const std::string& out_name) {
  auto v = data.numeric(column);
  std::vector<double> lagged(data.rows(), std::numeric_limits<double>::quiet_NaN());
  auto off = data.offsets();
  for (std::size_t c = 0; c < data.clusters(); ++c) {
    for (std::size_t r = off[c] + lag; r < off[c + 1]; ++r) lagged[r] = v[r - lag];
  }
  data.add_column(numeric_column(
      out_name.empty() ? column + "_lag" + std::to_string(lag) : out_name, std::move(lagged)));
}

}  // namespace rlstat
