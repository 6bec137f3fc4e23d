// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "popcast/error.hpp"
#include "popcast/text_io.hpp"

namespace popcast {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

}  // namespace

double mape(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred);
  if (y_true.empty()) throw Error(ErrorCode::EmptyData, "mape of empty vectors");
  double total = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    total += std::abs(y_true[i] - y_pred[i]) / std::max(std::abs(y_true[i]), 1.0);
  }
  return 100.0 * total / static_cast<double>(y_true.size());
}

double mse(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred);
  if (y_true.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_pred[i];
    total += d * d;
  }
  return total / static_cast<double>(y_true.size());
}

EnsembleOutput average_ensemble(std::span<const std::string> ids_a, std::span<const double> pred_a,
                                std::span<const std::string> ids_b, std::span<const double> pred_b,
                                AverageSpace space) {
  check_lengths(pred_a, pred_b);
  if (ids_a.size() != pred_a.size() || ids_b.size() != pred_b.size()) {
    throw Error(ErrorCode::LengthMismatch, "row ids and predictions differ in length");
  }
  for (std::size_t i = 0; i < ids_a.size(); ++i) {
    if (ids_a[i] != ids_b[i]) throw Error(ErrorCode::RowIdMismatch, ids_a[i] + " vs " + ids_b[i]);
  }
  EnsembleOutput out;
  out.row_ids.assign(ids_a.begin(), ids_a.end());
  out.member_a.assign(pred_a.begin(), pred_a.end());
  out.member_b.assign(pred_b.begin(), pred_b.end());
  out.averaged.resize(pred_a.size());
  for (std::size_t i = 0; i < pred_a.size(); ++i) {
    if (space == AverageSpace::Raw) {
      out.averaged[i] = (pred_a[i] + pred_b[i]) / 2.0;
    } else {
      const double a = std::log1p(std::max(pred_a[i], 0.0));
      const double b = std::log1p(std::max(pred_b[i], 0.0));
      out.averaged[i] = std::expm1((a + b) / 2.0);
    }
  }
  return out;
}

LeaderboardTable leaderboard_report(std::span<const MetricReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::MissingTarget, "no reports to tabulate");
  for (const auto& r : reports) {
    for (Target t : kTargets) {
      if (!r[t]) throw Error(ErrorCode::MissingTarget, r.label + " lacks " + std::string(target_name(t)));
    }
  }

  LeaderboardTable table;
  table.csv = "model,comment,heart,play,share,n_rows\n";
  std::size_t label_width = 0;
  for (const auto& r : reports) label_width = std::max(label_width, r.label.size() + 1);

  auto pad_right = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto pad_left = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };

  table.text = pad_right("", label_width);
  for (Target t : kTargets) table.text += pad_left(std::string(target_title(t)), 9);
  table.text += '\n';
  for (const auto& r : reports) {
    table.csv += csv_escape(r.label);
    table.text += pad_right(r.label + ":", label_width);
    for (Target t : kTargets) {
      const auto cell = format_fixed(r[t]->mape, 2);
      table.csv += "," + cell;
      table.text += pad_left(cell, 9);
    }
    table.csv += "," + std::to_string(r.n_rows) + "\n";
    table.text += '\n';
  }
  return table;
}

DensityHistogram density_histogram(std::span<const DensitySeries> series) {
  DensityHistogram h;
  for (const auto& s : series) {
    if (s.values.empty()) throw Error(ErrorCode::EmptyData, "density series " + s.split + "/" + s.model + " is empty");
    for (double v : s.values) h.max_value = std::max(h.max_value, v);
  }
  const double log_max = std::log1p(h.max_value);
  h.edges.resize(kDensityBins + 1);
  for (std::size_t k = 0; k <= kDensityBins; ++k) {
    h.edges[k] = std::expm1(static_cast<double>(k) / static_cast<double>(kDensityBins) * log_max);
  }
  for (const auto& s : series) {
    std::vector<std::size_t> counts(kDensityBins, 0);
    for (double v : s.values) {
      std::size_t bin = 0;
      if (log_max > 0.0 && v > 0.0) {
        const double pos = std::log1p(v) / log_max * static_cast<double>(kDensityBins);
        bin = std::min(static_cast<std::size_t>(pos), kDensityBins - 1);
      }
      ++counts[bin];
    }
    h.counts.push_back(std::move(counts));
  }
  return h;
}

std::string density_export(std::span<const DensitySeries> series) {
  const auto h = density_histogram(series);
  std::string out = "split,model,bin,lo,hi,count\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    for (std::size_t k = 0; k < kDensityBins; ++k) {
      out += csv_escape(series[s].split) + "," + csv_escape(series[s].model) + "," + std::to_string(k) + "," +
             format_double(h.edges[k]) + "," + format_double(h.edges[k + 1]) + "," + std::to_string(h.counts[s][k]) +
             "\n";
    }
  }
  return out;
}

}  // namespace popcast
