#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "lgfed/data/dataset.hpp"

namespace lgfed::data {

enum class ColumnRole { numeric, categorical, label, protected_attr, ignore };
enum class MissingPolicy { drop, category };

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::ignore;
  // Declared categories get an extra trailing "other" slot for unseen values; when empty,
  // categories are the sorted distinct values of the loaded rows.
  std::vector<std::string> categories;
};

struct RowFilter {
  std::string column;
  std::vector<std::string> keep;
};

struct TabularSchema {
  char delimiter = ',';
  bool header = false;
  std::string comment_prefix;  // lines starting with it are skipped
  std::vector<ColumnSpec> columns;
  std::vector<std::string> missing_tokens{"?"};
  MissingPolicy missing_policy = MissingPolicy::drop;
  std::string missing_category = "Unknown";
  bool drop_first = false;
  std::vector<RowFilter> filters;
  // Values of the label / protected column that map to 1. An empty label list means a
  // multi-class label indexed by sorted distinct value.
  std::vector<std::string> label_positive;
  std::vector<std::string> protected_positive;
  double std_floor = 1e-12;
};

/// Parses the JSON sidecar format documented in README.md.
TabularSchema parse_schema_json(const std::string& text);
TabularSchema load_schema(const std::filesystem::path& path);

struct TabularLoad {
  Dataset data;
  std::vector<std::string> feature_names;
  std::vector<std::size_t> source_file;  // per kept row, index into the input path list
  std::size_t rows_read = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_filter = 0;
  std::size_t unknown_categories = 0;
};

/// Rows from every file are pooled before encoding, so train/test files share one encoder.
TabularLoad load_csv_tabular(const std::vector<std::filesystem::path>& paths, const TabularSchema& schema);
TabularLoad load_csv_text(const std::vector<std::string>& contents, const TabularSchema& schema);

}  // namespace lgfed::data
