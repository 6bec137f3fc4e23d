// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "popcast/error.hpp"
#include "popcast/evaluate.hpp"
#include "popcast/gbdt.hpp"
#include "popcast/rng.hpp"

namespace popcast {

CvResult cross_validate(const FeatureMatrix& X, std::span<const double> y, const GbdtParams& params,
                        std::size_t n_folds, std::uint64_t seed) {
  const std::size_t n = X.rows();
  if (n != y.size()) throw Error(ErrorCode::LengthMismatch, "rows and targets differ in length");
  if (n_folds < 2) throw Error(ErrorCode::InvalidArgument, "n_folds must be at least 2");
  // Every training split needs two rows after removing the largest fold.
  const std::size_t largest_fold = (n + n_folds - 1) / n_folds;
  if (n < n_folds || n - largest_fold < 2) {
    throw Error(ErrorCode::TooFewRows, std::to_string(n) + " rows for " + std::to_string(n_folds) + " folds");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  CvResult result;
  for (std::size_t k = 0; k < n_folds; ++k) {
    const std::size_t begin = k * n / n_folds;
    const std::size_t end = (k + 1) * n / n_folds;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> valid_idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
    train_idx.reserve(n - valid_idx.size());
    train_idx.insert(train_idx.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(begin));
    train_idx.insert(train_idx.end(), order.begin() + static_cast<std::ptrdiff_t>(end), order.end());

    const auto X_train = X.select_rows(train_idx);
    const auto X_valid = X.select_rows(valid_idx);
    std::vector<double> y_train;
    y_train.reserve(train_idx.size());
    for (auto i : train_idx) y_train.push_back(y[i]);

    const auto model = fit_gbdt(X_train, y_train, params);
    const auto pred = predict_gbdt(model, X_valid);
    std::vector<double> raw_true;
    std::vector<double> raw_pred;
    for (std::size_t i = 0; i < valid_idx.size(); ++i) {
      raw_true.push_back(std::expm1(y[valid_idx[i]]));
      raw_pred.push_back(std::max(std::expm1(pred[i]), 0.0));
    }
    FoldMetrics fm;
    fm.n_rows = valid_idx.size();
    fm.mape = mape(raw_true, raw_pred);
    fm.mse = mse(raw_true, raw_pred);
    result.folds.push_back(fm);
  }
  for (const auto& f : result.folds) {
    result.mean_mape += f.mape;
    result.mean_mse += f.mse;
  }
  result.mean_mape /= static_cast<double>(n_folds);
  result.mean_mse /= static_cast<double>(n_folds);
  return result;
}

namespace {

double* real_field(GbdtParams& p, const std::string& name) {
  if (name == "min_child_weight") return &p.min_child_weight;
  if (name == "lambda") return &p.lambda;
  if (name == "gamma") return &p.gamma;
  if (name == "learning_rate") return &p.learning_rate;
  if (name == "subsample_rows") return &p.subsample_rows;
  if (name == "colsample") return &p.colsample;
  return nullptr;
}

std::size_t* count_field(GbdtParams& p, const std::string& name) {
  if (name == "n_rounds") return &p.n_rounds;
  if (name == "max_depth") return &p.max_depth;
  return nullptr;
}

}  // namespace

RandomSearchSampler::RandomSearchSampler(SearchSpace space, GbdtParams base, std::uint64_t seed)
    : space_(std::move(space)), base_(base), seed_(seed) {
  GbdtParams probe;
  for (const auto& [name, range] : space_) {
    if (!real_field(probe, name) && !count_field(probe, name)) {
      throw Error(ErrorCode::InvalidArgument, "unknown search parameter '" + name + "'");
    }
    if (!(range.lo <= range.hi)) throw Error(ErrorCode::InvalidArgument, "empty range for '" + name + "'");
    if (range.log_scale && !(range.lo > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "log-scale range for '" + name + "' must be positive");
    }
  }
}

GbdtParams RandomSearchSampler::draw(std::size_t index) {
  Rng rng(derive_seed(seed_, "draw/" + std::to_string(index)));
  GbdtParams p = base_;
  for (const auto& [name, range] : space_) {
    const double u = rng.uniform();
    double v = range.log_scale ? std::exp(std::log(range.lo) + u * (std::log(range.hi) - std::log(range.lo)))
                               : range.lo + u * (range.hi - range.lo);
    if (range.lo == range.hi) v = range.lo;
    if (double* f = real_field(p, name)) {
      *f = v;
    } else if (std::size_t* c = count_field(p, name)) {
      *c = static_cast<std::size_t>(std::llround(v));
    }
  }
  return p;
}

TuneResult tune_gbdt(const FeatureMatrix& X, std::span<const double> y, CandidateSampler& sampler,
                     std::size_t budget, std::size_t n_folds, std::uint64_t cv_seed) {
  if (budget == 0) throw Error(ErrorCode::InvalidArgument, "search budget must be at least 1");
  TuneResult result;
  for (std::size_t i = 0; i < budget; ++i) {
    const GbdtParams p = sampler.draw(i);
    const auto cv = cross_validate(X, y, p, n_folds, cv_seed);
    result.trials.push_back({p, cv.mean_mape});
    if (i == 0 || cv.mean_mape < result.best_cv_mape) {
      result.best = p;
      result.best_cv_mape = cv.mean_mape;
      result.best_index = i;
    }
  }
  return result;
}

TuneResult tune_gbdt(const FeatureMatrix& X, std::span<const double> y, const SearchSpace& space,
                     std::size_t budget, std::uint64_t seed, const GbdtParams& base, std::size_t n_folds) {
  if (space.empty()) throw Error(ErrorCode::EmptySpace, "search space has no parameters");
  RandomSearchSampler sampler(space, base, seed);
  return tune_gbdt(X, y, sampler, budget, n_folds, derive_seed(seed, "cv"));
}

SearchSpace default_search_space() {
  return {{"n_rounds", {100, 600, false}},        {"max_depth", {3, 8, false}},
          {"learning_rate", {0.01, 0.2, true}},   {"lambda", {0.1, 10.0, true}},
          {"gamma", {0.0, 0.5, false}},           {"min_child_weight", {1.0, 10.0, true}},
          {"subsample_rows", {0.6, 1.0, false}},  {"colsample", {0.6, 1.0, false}}};
}

}  // namespace popcast
