// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gradient-boosted regression trees with the regularized second-order
// objective (squared error, so h = 1): leaf weight -G / (H + lambda), split
// gain 1/2 [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma.
// Splits are found by exact greedy search over midpoints between consecutive
// distinct feature values; ties go to the lowest feature index, then the
// lowest threshold.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popcast/feature_matrix.hpp"

namespace popcast {

struct GbdtParams {
  std::size_t n_rounds = 400;
  std::size_t max_depth = 6;
  double min_child_weight = 1.0;
  double lambda = 1.0;
  double gamma = 0.0;
  double learning_rate = 0.05;
  double subsample_rows = 0.9;
  double colsample = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const GbdtParams&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  double gain = 0.0;  // net of gamma
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf weight before learning-rate scaling

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Flat binary tree; node 0 is the root. A row goes left when its value is
/// strictly below the threshold.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double leaf_weight(std::span<const double> row, std::span<const std::size_t> column_map) const;
  std::size_t depth() const;
  bool operator==(const RegressionTree&) const = default;
};

struct TreeEnsemble {
  double base_score = 0.0;
  double learning_rate = 1.0;
  std::vector<RegressionTree> trees;
  std::vector<std::string> feature_names;
  GbdtParams params;

  bool operator==(const TreeEnsemble&) const = default;
};

/// `y` is the (already transformed) target. Throws EmptyData, NonFiniteTarget.
TreeEnsemble fit_gbdt(const FeatureMatrix& X, std::span<const double> y, const GbdtParams& params);

/// Uses the first `n_trees` trees when given. Throws UnknownFeature.
std::vector<double> predict_gbdt(const TreeEnsemble& model, const FeatureMatrix& X,
                                 std::optional<std::size_t> n_trees = std::nullopt);

std::string format_gbdt(const TreeEnsemble& model);
TreeEnsemble parse_gbdt(std::string_view json_text);
void save_gbdt(const TreeEnsemble& model, const std::filesystem::path& path);
TreeEnsemble load_gbdt(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Cross-validation and search

struct FoldMetrics {
  double mape = 0.0;  // percent, raw scale
  double mse = 0.0;   // raw scale
  std::size_t n_rows = 0;
};

struct CvResult {
  std::vector<FoldMetrics> folds;
  double mean_mape = 0.0;
  double mean_mse = 0.0;
};

/// Seeded shuffle then contiguous folds. Predictions and `y` are mapped back
/// with expm1 before scoring. Throws TooFewRows.
CvResult cross_validate(const FeatureMatrix& X, std::span<const double> y, const GbdtParams& params,
                        std::size_t n_folds = 10, std::uint64_t seed = 0);

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  bool log_scale = false;
};

/// Keyed by GbdtParams field name ("n_rounds", "max_depth", "lambda", ...).
using SearchSpace = std::map<std::string, ParamRange>;

/// Source of candidate parameter sets for tune_gbdt.
class CandidateSampler {
 public:
  virtual ~CandidateSampler() = default;
  virtual GbdtParams draw(std::size_t index) = 0;
};

/// Seeded uniform (or log-uniform) draws over a SearchSpace; fields outside
/// the space keep the base value.
class RandomSearchSampler : public CandidateSampler {
 public:
  RandomSearchSampler(SearchSpace space, GbdtParams base, std::uint64_t seed);
  GbdtParams draw(std::size_t index) override;

 private:
  SearchSpace space_;
  GbdtParams base_;
  std::uint64_t seed_;
};

struct TuneTrial {
  GbdtParams params;
  double cv_mape = 0.0;
};

struct TuneResult {
  GbdtParams best;
  double best_cv_mape = 0.0;
  std::size_t best_index = 0;
  std::vector<TuneTrial> trials;
};

/// Scores `budget` draws by mean CV MAPE and returns the argmin (earliest draw
/// wins ties).
TuneResult tune_gbdt(const FeatureMatrix& X, std::span<const double> y, CandidateSampler& sampler,
                     std::size_t budget, std::size_t n_folds = 10, std::uint64_t cv_seed = 0);

/// Random search convenience overload. Throws EmptySpace.
TuneResult tune_gbdt(const FeatureMatrix& X, std::span<const double> y, const SearchSpace& space,
                     std::size_t budget, std::uint64_t seed, const GbdtParams& base = {},
                     std::size_t n_folds = 10);

SearchSpace default_search_space();

// ---------------------------------------------------------------------------
// Importance

struct FeatureImportance {
  std::string name;
  double gain = 0.0;
  std::size_t splits = 0;
};

struct ImportanceReport {
  std::vector<FeatureImportance> entries;  // model feature order

  /// Descending gain; ties keep feature order.
  std::vector<FeatureImportance> sorted() const;
  double total_gain() const;
};

ImportanceReport feature_importance(const TreeEnsemble& model);
std::string format_importance_csv(const ImportanceReport& report);

}  // namespace popcast
