#include "lgfed/data/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "lgfed/common/error.hpp"

namespace lgfed::data {

namespace {

using json = nlohmann::json;

ColumnRole parse_role(const std::string& s) {
  if (s == "numeric") return ColumnRole::numeric;
  if (s == "categorical") return ColumnRole::categorical;
  if (s == "label") return ColumnRole::label;
  if (s == "protected") return ColumnRole::protected_attr;
  if (s == "ignore") return ColumnRole::ignore;
  throw ConfigError("unknown column role '" + s + "'");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one record; double quotes group a field and "" escapes a quote.
std::vector<std::string> split_record(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

struct RawRow {
  std::vector<std::string> fields;
  std::size_t file = 0;
};

}  // namespace

TabularSchema parse_schema_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
  }
  try {
    TabularSchema s;
    const std::string delim = j.value("delimiter", std::string(","));
    if (delim.size() != 1) throw ConfigError("delimiter must be one character");
    s.delimiter = delim[0];
    s.header = j.value("header", false);
    s.comment_prefix = j.value("comment_prefix", std::string());
    if (j.contains("missing_tokens")) s.missing_tokens = j.at("missing_tokens").get<std::vector<std::string>>();
    const std::string policy = j.value("missing_policy", std::string("drop"));
    if (policy == "drop") s.missing_policy = MissingPolicy::drop;
    else if (policy == "category") s.missing_policy = MissingPolicy::category;
    else throw ConfigError("missing_policy must be drop or category");
    s.missing_category = j.value("missing_category", s.missing_category);
    s.drop_first = j.value("drop_first", false);
    s.std_floor = j.value("std_floor", s.std_floor);
    s.label_positive = j.value("label_positive", std::vector<std::string>{});
    s.protected_positive = j.value("protected_positive", std::vector<std::string>{});
    for (const auto& f : j.value("filters", json::array()))
      s.filters.push_back({f.at("column").get<std::string>(), f.at("keep").get<std::vector<std::string>>()});
    for (const auto& c : j.at("columns")) {
      ColumnSpec col;
      col.name = c.at("name").get<std::string>();
      col.role = parse_role(c.at("role").get<std::string>());
      col.categories = c.value("categories", std::vector<std::string>{});
      s.columns.push_back(std::move(col));
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad schema: ") + e.what());
  }
}

TabularSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema_json(ss.str());
}

TabularLoad load_csv_text(const std::vector<std::string>& contents, const TabularSchema& schema) {
  const std::size_t ncol = schema.columns.size();
  std::size_t label_col = ncol, prot_col = ncol;
  std::map<std::string, std::size_t> by_name;
  for (std::size_t c = 0; c < ncol; ++c) {
    by_name[schema.columns[c].name] = c;
    if (schema.columns[c].role == ColumnRole::label) {
      if (label_col != ncol) throw ConfigError("schema declares more than one label column");
      label_col = c;
    }
    if (schema.columns[c].role == ColumnRole::protected_attr) {
      if (prot_col != ncol) throw ConfigError("schema declares more than one protected column");
      prot_col = c;
    }
  }
  if (label_col == ncol) throw ConfigError("schema has no label column");
  std::vector<std::pair<std::size_t, const RowFilter*>> filters;
  for (const auto& f : schema.filters) {
    auto it = by_name.find(f.column);
    if (it == by_name.end()) throw ConfigError("filter on unknown column '" + f.column + "'");
    filters.emplace_back(it->second, &f);
  }

  TabularLoad out;
  std::vector<RawRow> rows;
  for (std::size_t file = 0; file < contents.size(); ++file) {
    std::istringstream in(contents[file]);
    std::string line;
    std::size_t offset = 0;
    bool first = true;
    while (std::getline(in, line)) {
      const std::size_t line_offset = offset;
      offset += line.size() + 1;
      if (first && schema.header) {
        first = false;
        continue;
      }
      first = false;
      if (trim(line).empty()) continue;
      if (!schema.comment_prefix.empty() && line.rfind(schema.comment_prefix, 0) == 0) continue;
      auto fields = split_record(line, schema.delimiter);
      if (fields.size() != ncol)
        throw FormatError("expected " + std::to_string(ncol) + " fields, found " + std::to_string(fields.size()),
                          line_offset);
      ++out.rows_read;
      bool keep = true;
      for (const auto& [c, f] : filters)
        if (!contains(f->keep, fields[c])) keep = false;
      if (!keep) {
        ++out.dropped_filter;
        continue;
      }
      bool missing = false;
      for (std::size_t c = 0; c < ncol; ++c) {
        if (schema.columns[c].role == ColumnRole::ignore || !contains(schema.missing_tokens, fields[c])) continue;
        if (schema.missing_policy == MissingPolicy::category && schema.columns[c].role == ColumnRole::categorical)
          fields[c] = schema.missing_category;
        else
          missing = true;
      }
      if (missing) {
        ++out.dropped_missing;
        continue;
      }
      rows.push_back({std::move(fields), file});
    }
  }

  // Category vocabularies. Declared lists gain an "other" slot; inferred ones are sorted.
  struct Encoder {
    std::vector<std::string> cats;
    bool other = false;
    std::size_t skip = 0;  // leading categories without a column (drop_first)
  };
  std::vector<Encoder> enc(ncol);
  for (std::size_t c = 0; c < ncol; ++c) {
    const auto& spec = schema.columns[c];
    if (spec.role != ColumnRole::categorical) continue;
    if (!spec.categories.empty()) {
      enc[c].cats = spec.categories;
      enc[c].other = true;
    } else {
      for (const auto& r : rows) enc[c].cats.push_back(r.fields[c]);
      std::sort(enc[c].cats.begin(), enc[c].cats.end());
      enc[c].cats.erase(std::unique(enc[c].cats.begin(), enc[c].cats.end()), enc[c].cats.end());
    }
    enc[c].skip = schema.drop_first && !enc[c].cats.empty() ? 1 : 0;
  }

  std::vector<std::size_t> col_offset(ncol, 0);
  std::size_t dim = 0;
  for (std::size_t c = 0; c < ncol; ++c) {
    col_offset[c] = dim;
    const auto& spec = schema.columns[c];
    if (spec.role == ColumnRole::numeric) {
      out.feature_names.push_back(spec.name);
      ++dim;
    } else if (spec.role == ColumnRole::categorical) {
      for (std::size_t k = enc[c].skip; k < enc[c].cats.size(); ++k)
        out.feature_names.push_back(spec.name + "=" + enc[c].cats[k]);
      if (enc[c].other) out.feature_names.push_back(spec.name + "=<other>");
      dim += enc[c].cats.size() - enc[c].skip + (enc[c].other ? 1 : 0);
    }
  }

  std::vector<std::string> label_classes;
  if (schema.label_positive.empty()) {
    for (const auto& r : rows) label_classes.push_back(r.fields[label_col]);
    std::sort(label_classes.begin(), label_classes.end());
    label_classes.erase(std::unique(label_classes.begin(), label_classes.end()), label_classes.end());
  }

  auto& d = out.data;
  d.features = Matrix::Zero(static_cast<nn::Index>(rows.size()), static_cast<nn::Index>(dim));
  d.num_classes = schema.label_positive.empty() ? static_cast<int>(label_classes.size()) : 2;
  d.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    const auto row = static_cast<nn::Index>(i);
    out.source_file.push_back(rows[i].file);
    if (schema.label_positive.empty()) {
      const auto it = std::lower_bound(label_classes.begin(), label_classes.end(), f[label_col]);
      d.labels.push_back(static_cast<int>(it - label_classes.begin()));
    } else {
      d.labels.push_back(contains(schema.label_positive, f[label_col]) ? 1 : 0);
    }
    if (prot_col != ncol) d.protected_attr.push_back(contains(schema.protected_positive, f[prot_col]) ? 1 : 0);
    for (std::size_t c = 0; c < ncol; ++c) {
      const auto role = schema.columns[c].role;
      if (role == ColumnRole::numeric) {
        char* end = nullptr;
        const double v = std::strtod(f[c].c_str(), &end);
        if (f[c].empty() || end != f[c].c_str() + f[c].size() || !std::isfinite(v))
          throw DataError("non-numeric value '" + f[c] + "' in column " + schema.columns[c].name);
        d.features(row, static_cast<nn::Index>(col_offset[c])) = v;
      } else if (role == ColumnRole::categorical) {
        const auto& e = enc[c];
        const auto it = std::find(e.cats.begin(), e.cats.end(), f[c]);
        std::size_t k = static_cast<std::size_t>(it - e.cats.begin());
        if (it == e.cats.end()) {
          ++out.unknown_categories;
          k = e.cats.size();  // the other slot
        }
        if (k >= e.skip) d.features(row, static_cast<nn::Index>(col_offset[c] + k - e.skip)) = 1.0;
      }
    }
  }

  // Standardize numeric columns over the loaded rows (population std, floored).
  const double n = static_cast<double>(rows.size());
  for (std::size_t c = 0; c < ncol && n > 0; ++c) {
    if (schema.columns[c].role != ColumnRole::numeric) continue;
    auto col = d.features.col(static_cast<nn::Index>(col_offset[c]));
    const double mean = col.sum() / n;
    const double var = (col.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd < schema.std_floor)
      col.setZero();  // a constant column; dividing its rounding residue by the floor would amplify it
    else
      col = (col.array() - mean) / sd;
  }
  d.validate();
  return out;
}

TabularLoad load_csv_tabular(const std::vector<std::filesystem::path>& paths, const TabularSchema& schema) {
  std::vector<std::string> contents;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    contents.push_back(ss.str());
  }
  return load_csv_text(contents, schema);
}

}  // namespace lgfed::data
