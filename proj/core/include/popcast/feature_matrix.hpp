// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace popcast {

/// Dense row-major matrix of named feature columns.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<std::string> row_ids;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::vector<std::string> column_names, std::size_t n_rows)
      : names(std::move(column_names)), row_ids(n_rows), values(n_rows * names.size(), 0.0) {}

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return names.size(); }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols(), cols()}; }

  std::optional<std::size_t> column_index(std::string_view name) const;

  /// Rows picked by index, in the given order.
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;

  bool operator==(const FeatureMatrix&) const = default;
};

/// CSV with a leading `video_id` column followed by the feature names.
std::string format_feature_matrix(const FeatureMatrix& m);
FeatureMatrix parse_feature_matrix(std::string_view csv_text);
void write_feature_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

}  // namespace popcast
