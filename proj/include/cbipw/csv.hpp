#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbipw/dataset.hpp"

namespace cbipw {

// Comma-separated, header row, UTF-8, LF line endings. Machine outputs carry
// 17 significant digits so doubles round-trip exactly.

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct CsvSchema {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;  // the missing-prone covariate, if any, first
  std::optional<std::string> missing;   // indicator column, 1 = observed
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(trim(field));
  return fields;
}

inline double parse_cell(const std::string& cell, std::size_t line_no,
                         const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::runtime_error("csv: cannot parse '" + cell + "' as a number at line " +
                             std::to_string(line_no) + ", column '" + column + "'");
  return v;
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: '" + path + "' is empty");
  const std::vector<std::string> header = detail::split_csv_line(line);

  const auto column_index = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    throw std::runtime_error("csv: column '" + name + "' not found in '" + path + "'");
  };

  const std::size_t idx_y = column_index(schema.outcome);
  const std::size_t idx_a = column_index(schema.treatment);
  std::vector<std::size_t> idx_x;
  for (const auto& name : schema.covariates) idx_x.push_back(column_index(name));
  std::optional<std::size_t> idx_r;
  if (schema.missing) idx_r = column_index(*schema.missing);

  Dataset ds;
  std::vector<Vector> x_rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("csv: line " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(header.size()));

    ds.y.push_back(detail::parse_cell(fields[idx_y], line_no, schema.outcome));

    const double a_val = detail::parse_cell(fields[idx_a], line_no, schema.treatment);
    if (a_val != 0.0 && a_val != 1.0)
      throw std::runtime_error("csv: treatment value '" + fields[idx_a] +
                               "' is not 0 or 1 at line " + std::to_string(line_no));
    ds.a.push_back(static_cast<int>(a_val));

    int r_val = 1;
    if (idx_r) {
      const double rv = detail::parse_cell(fields[*idx_r], line_no, *schema.missing);
      if (rv != 0.0 && rv != 1.0)
        throw std::runtime_error("csv: missingness indicator '" + fields[*idx_r] +
                                 "' is not 0 or 1 at line " + std::to_string(line_no));
      r_val = static_cast<int>(rv);
      if (!ds.r) ds.r.emplace();
      ds.r->push_back(r_val);
    }

    Vector row(idx_x.size());
    for (std::size_t j = 0; j < idx_x.size(); ++j) {
      const std::string& cell = fields[idx_x[j]];
      if (cell.empty()) {
        if (j == 0 && idx_r && r_val == 0) {
          row[j] = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        throw std::runtime_error("csv: empty cell at line " + std::to_string(line_no) +
                                 ", column '" + schema.covariates[j] +
                                 "' (only the missing-prone covariate may be empty, and only "
                                 "where the indicator is 0)");
      }
      row[j] = detail::parse_cell(cell, line_no, schema.covariates[j]);
    }
    x_rows.push_back(std::move(row));
  }
  if (x_rows.empty()) throw std::runtime_error("csv: '" + path + "' has no data rows");

  ds.x = Matrix(x_rows.size(), idx_x.size());
  for (std::size_t i = 0; i < x_rows.size(); ++i)
    for (std::size_t j = 0; j < idx_x.size(); ++j) ds.x(i, j) = x_rows[i][j];
  validate_dataset(ds, /*for_estimation=*/false);
  return ds;
}

// Minimal writer: rows of preformatted cells.
class CsvWriter {
public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("csv: cannot write '" + path + "'");
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j) out_ << ',';
      out_ << cells[j];
    }
    out_ << '\n';
  }

private:
  std::ofstream out_;
};

}  // namespace cbipw
