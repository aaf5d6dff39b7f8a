#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rlstat {

// A column of a panel dataset. Numeric columns hold doubles with NaN marking
// a missing cell; text columns keep the raw cell strings and are only usable
// as categorical factors (fixed effects).
struct Column {
  std::string name;
  bool numeric = true;
  std::vector<double> values;       // numeric columns
  std::vector<std::string> labels;  // text columns
};

// Clustered observations. Rows are stored grouped by cluster, clusters in
// order of first appearance and rows in input order within each cluster.
// The unit of resampling is the cluster.
//
// Every row also carries a frequency multiplier (1 unless the dataset was
// produced by a weighted resampling scheme); estimators treat a row with
// multiplier r as r copies of that row.
class PanelDataset {
 public:
  PanelDataset() = default;

  // Groups rows by cluster label. `row_cluster` has one entry per row and
  // every column must have the same number of rows.
  PanelDataset(std::vector<std::string> row_cluster, std::vector<Column> columns);

  std::size_t rows() const { return row_cluster_.size(); }
  std::size_t clusters() const { return cluster_labels_.size(); }

  // Row range [offsets()[c], offsets()[c+1]) belongs to cluster c.
  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const std::string> cluster_labels() const { return cluster_labels_; }
  std::span<const std::size_t> row_cluster_index() const { return row_cluster_; }
  std::size_t cluster_size(std::size_t c) const { return offsets_[c + 1] - offsets_[c]; }

  bool has_column(std::string_view name) const;
  const Column& column(std::string_view name) const;
  // Numeric values of a column; throws DataError naming the first non-numeric
  // cell when the column holds text.
  std::span<const double> numeric(std::string_view name) const;
  std::span<const Column> columns() const { return columns_; }
  std::vector<std::string> column_names() const;

  std::span<const double> row_weights() const { return row_weights_; }
  bool unit_row_weights() const;

  // Copy of the listed clusters (with repetition). When `relabel` is set the
  // k-th drawn block is labelled "<label>#k" so duplicated clusters stay
  // distinct clusters (and distinct fixed-effect levels).
  PanelDataset select_clusters(std::span<const std::size_t> cluster_idx, bool relabel) const;
  // Copy of the listed rows (with repetition), regrouped by original cluster.
  PanelDataset select_rows(std::span<const std::size_t> row_idx) const;
  // Same rows with the given frequency multipliers.
  PanelDataset with_row_weights(std::vector<double> weights) const;
  // Drops rows with a missing value in any of the named numeric columns.
  PanelDataset drop_missing(std::span<const std::string> names, std::size_t* dropped = nullptr) const;

  void add_column(Column column);

 private:
  void init(std::vector<std::string> row_cluster, std::vector<Column> columns,
            std::vector<double> row_weights);

  std::vector<std::size_t> row_cluster_;  // cluster index per row
  std::vector<std::string> cluster_labels_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Column> columns_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<double> row_weights_;
};

// Column built from numeric values.
Column numeric_column(std::string name, std::vector<double> values);

// Adds "<column>_lag<s>" holding the value s rows earlier within the same
// cluster (NaN when the cluster has fewer preceding rows).
void add_within_cluster_lag(PanelDataset& data, const std::string& column, std::size_t lag,
                            const std::string& out_name = "");

}  // namespace rlstat
