// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popcast/ingest.hpp"

namespace popcast {

/// 100 * mean(|y - p| / max(|y|, 1)). Throws LengthMismatch, EmptyData.
double mape(std::span<const double> y_true, std::span<const double> y_pred);

/// Throws LengthMismatch.
double mse(std::span<const double> y_true, std::span<const double> y_pred);

struct TargetMetric {
  double mape = 0.0;
  double mse = 0.0;
};

struct MetricReport {
  std::string label;
  std::size_t n_rows = 0;
  std::array<std::optional<TargetMetric>, 4> metrics;  // indexed by Target

  std::optional<TargetMetric>& operator[](Target t) { return metrics[static_cast<std::size_t>(t)]; }
  const std::optional<TargetMetric>& operator[](Target t) const { return metrics[static_cast<std::size_t>(t)]; }
};

enum class AverageSpace { Raw, Log };

struct EnsembleOutput {
  std::vector<std::string> row_ids;
  std::vector<double> averaged;
  std::vector<double> member_a;
  std::vector<double> member_b;
};

/// Elementwise mean of two aligned raw-scale prediction vectors. The log
/// variant averages log1p values and maps back. Throws RowIdMismatch.
EnsembleOutput average_ensemble(std::span<const std::string> ids_a, std::span<const double> pred_a,
                                std::span<const std::string> ids_b, std::span<const double> pred_b,
                                AverageSpace space = AverageSpace::Raw);

struct LeaderboardTable {
  std::string csv;
  std::string text;
};

/// Columns Comment, Heart, Play, Share; MAPE in percent with two decimals.
/// Throws MissingTarget.
LeaderboardTable leaderboard_report(std::span<const MetricReport> reports);

struct DensitySeries {
  std::string split;  // e.g. "train", "test"
  std::string model;  // e.g. "tabular", "fusion"
  std::vector<double> values;
};

inline constexpr std::size_t kDensityBins = 64;

struct DensityHistogram {
  double max_value = 0.0;
  std::vector<double> edges;  // kDensityBins + 1 raw-scale edges
  std::vector<std::vector<std::size_t>> counts;  // per series
};

/// Common log-scale bins: edge k = expm1(k / 64 * log1p(max)) over all
/// series. Negative inputs count in bin 0.
DensityHistogram density_histogram(std::span<const DensitySeries> series);

/// CSV: split,model,bin,lo,hi,count.
std::string density_export(std::span<const DensitySeries> series);

}  // namespace popcast
