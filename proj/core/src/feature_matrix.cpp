// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/feature_matrix.hpp"

#include <algorithm>
#include <cmath>

#include "popcast/error.hpp"
#include "popcast/text_io.hpp"

namespace popcast {

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out(names, indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.row_ids[i] = row_ids[indices[i]];
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

std::string format_feature_matrix(const FeatureMatrix& m) {
  std::string out = "video_id";
  for (const auto& n : m.names) out += "," + csv_escape(n);
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += csv_escape(m.row_ids[r]);
    for (double v : m.row(r)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_feature_matrix(std::string_view csv_text) {
  const auto rows = parse_csv(csv_text);
  if (rows.empty() || rows[0].fields.empty() || rows[0].fields[0] != "video_id") {
    throw Error(ErrorCode::MissingColumn, "video_id");
  }
  std::vector<std::string> names(rows[0].fields.begin() + 1, rows[0].fields.end());
  FeatureMatrix m(std::move(names), rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != m.cols() + 1) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(rows[r].line));
    m.row_ids[r - 1] = f[0];
    for (std::size_t c = 0; c < m.cols(); ++c) {
      auto v = parse_double(f[c + 1]);
      if (!v || !std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(rows[r].line));
      m.at(r - 1, c) = *v;
    }
  }
  return m;
}

void write_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, format_feature_matrix(m));
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  return parse_feature_matrix(read_file(path));
}

}  // namespace popcast
