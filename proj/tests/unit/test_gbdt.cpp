// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/gbdt.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "popcast/error.hpp"
#include "popcast/features.hpp"
#include "popcast/rng.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace popcast {
namespace {

FeatureMatrix column(std::vector<double> xs) {
  FeatureMatrix X({"x0"}, xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    X.row_ids[i] = "r" + std::to_string(i);
    X.at(i, 0) = xs[i];
  }
  return X;
}

GbdtParams exact(std::size_t rounds, std::size_t depth) {
  GbdtParams p;
  p.n_rounds = rounds;
  p.max_depth = depth;
  p.subsample_rows = 1.0;
  p.colsample = 1.0;
  return p;
}

FeatureMatrix random_matrix(Rng& rng, std::size_t n, std::size_t p) {
  std::vector<std::string> names;
  for (std::size_t f = 0; f < p; ++f) names.push_back("f" + std::to_string(f));
  FeatureMatrix X(names, n);
  for (std::size_t i = 0; i < n; ++i) {
    X.row_ids[i] = "r" + std::to_string(i);
    for (std::size_t f = 0; f < p; ++f) X.at(i, f) = rng.uniform(-1.0, 1.0);
  }
  return X;
}

TEST(Fit, TwoRowClosedForm) {
  auto p = exact(1, 1);
  p.lambda = 0.0;
  p.gamma = 0.0;
  p.learning_rate = 1.0;
  const std::vector<double> y = {0.0, 1.0};
  const auto m = fit_gbdt(column({0.0, 1.0}), y, p);
  EXPECT_EQ(m.base_score, 0.5);
  ASSERT_EQ(m.trees.size(), 1u);
  const auto& root = m.trees[0].nodes[0];
  EXPECT_EQ(root.feature, 0);
  EXPECT_EQ(root.threshold, 0.5);
  EXPECT_EQ(root.gain, 0.25);
  EXPECT_EQ(m.trees[0].nodes[static_cast<std::size_t>(root.left)].weight, -0.5);
  EXPECT_EQ(m.trees[0].nodes[static_cast<std::size_t>(root.right)].weight, 0.5);
  EXPECT_EQ(predict_gbdt(m, column({0.0, 1.0})), (std::vector<double>{0.0, 1.0}));

  const auto imp = feature_importance(m);
  ASSERT_EQ(imp.entries.size(), 1u);
  EXPECT_EQ(imp.entries[0].gain, 0.25);
  EXPECT_EQ(imp.entries[0].splits, 1u);
}

TEST(Fit, ConstantTargetNeverSplits) {
  auto p = exact(20, 4);
  p.gamma = 0.1;
  Rng rng(5);
  const auto X = random_matrix(rng, 30, 3);
  const std::vector<double> y(30, 2.5);
  const auto m = fit_gbdt(X, y, p);
  for (double v : predict_gbdt(m, X)) EXPECT_EQ(v, 2.5);
  for (const auto& t : m.trees) EXPECT_EQ(t.nodes.size(), 1u);
}

TEST(Fit, MatchesBruteForceOracle) {
  for (int inst = 0; inst < 50; ++inst) {
    Rng rng(derive_seed(77, std::to_string(inst)));
    const std::size_t p = 1 + rng.below(3);
    const auto X = random_matrix(rng, 20, p);
    std::vector<double> y(20);
    for (auto& v : y) v = rng.normal();
    auto params = exact(3, 1 + rng.below(2));
    params.lambda = rng.uniform(0.0, 2.0);
    params.learning_rate = 0.5;
    const auto m = fit_gbdt(X, y, params);

    oracle::Rows rows(20, std::vector<double>(p));
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t f = 0; f < p; ++f) rows[i][f] = X.at(i, f);
    }
    const auto ref = oracle::boost(rows, y, {params.max_depth, params.lambda, params.gamma, params.min_child_weight},
                                   params.n_rounds, params.learning_rate);
    for (std::size_t t = 0; t < ref.trees.size(); ++t) {
      const auto& a = m.trees[t].nodes;
      const auto& b = ref.trees[t];
      ASSERT_EQ(a.size(), b.size()) << inst;
      // Both builders number nodes in preorder.
      for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].feature, b[k].feature) << inst;
        EXPECT_EQ(a[k].threshold, b[k].threshold) << inst;
      }
    }
    const auto pred = predict_gbdt(m, X);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(pred[i], ref.train_pred[i], 1e-12);
  }
}

TEST(Fit, DyadicShiftIsExact) {
  // Targets are a constant plus dyadic offsets, so every sum is exact.
  std::vector<double> xs, y;
  for (int i = 0; i < 16; ++i) {
    xs.push_back(i);
    y.push_back(3.0 + (i < 8 ? -0.25 : 0.25));
  }
  auto p = exact(1, 1);
  p.lambda = 0.0;
  p.learning_rate = 1.0;
  const auto m = fit_gbdt(column(xs), y, p);
  EXPECT_EQ(m.base_score, 3.0);
  EXPECT_EQ(m.trees[0].nodes[0].threshold, 7.5);
  EXPECT_EQ(predict_gbdt(m, column(xs)), y);
}

TEST(Fit, GammaBlocksWeakSplits) {
  auto p = exact(1, 1);
  p.lambda = 0.0;
  p.learning_rate = 1.0;
  p.gamma = 0.3;  // the only split gains 0.25
  const std::vector<double> y = {0.0, 1.0};
  EXPECT_EQ(fit_gbdt(column({0.0, 1.0}), y, p).trees[0].nodes.size(), 1u);
}

TEST(Fit, MinChildWeightLimitsLeafSize) {
  auto p = exact(1, 3);
  p.min_child_weight = 3.0;
  Rng rng(9);
  const auto X = random_matrix(rng, 12, 2);
  std::vector<double> y(12);
  for (auto& v : y) v = rng.normal();
  const auto m = fit_gbdt(X, y, p);
  // Count rows reaching each leaf.
  std::map<const TreeNode*, int> hits;
  const std::vector<std::size_t> cols = {0, 1};
  for (std::size_t i = 0; i < 12; ++i) {
    std::size_t k = 0;
    const auto& nodes = m.trees[0].nodes;
    while (!nodes[k].is_leaf()) {
      k = static_cast<std::size_t>(X.at(i, static_cast<std::size_t>(nodes[k].feature)) < nodes[k].threshold
                                       ? nodes[k].left
                                       : nodes[k].right);
    }
    ++hits[&nodes[k]];
  }
  for (const auto& [leaf, n] : hits) EXPECT_GE(n, 3);
}

TEST(Fit, SubsamplingIsSeeded) {
  Rng rng(11);
  const auto X = random_matrix(rng, 80, 4);
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i) y[i] = X.at(i, 0) * 2.0 + rng.normal() * 0.1;
  GbdtParams p;
  p.n_rounds = 30;
  p.max_depth = 3;
  p.seed = 1;
  const auto a = fit_gbdt(X, y, p);
  EXPECT_EQ(a, fit_gbdt(X, y, p));
  p.seed = 2;
  EXPECT_NE(a.trees, fit_gbdt(X, y, p).trees);
}

TEST(Fit, InputErrors) {
  const auto p = exact(1, 1);
  const std::vector<double> none;
  EXPECT_THROW(fit_gbdt(FeatureMatrix({"x"}, 0), none, p), Error);
  const std::vector<double> bad = {1.0, std::numeric_limits<double>::quiet_NaN()};
  try {
    fit_gbdt(column({0, 1}), bad, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteTarget);
  }
  GbdtParams q;
  q.learning_rate = 0.0;
  EXPECT_THROW(q.validate(), Error);
}

TEST(Predict, EmptyEnsembleGivesBase) {
  TreeEnsemble m;
  m.base_score = 4.25;
  m.feature_names = {"x0"};
  EXPECT_EQ(predict_gbdt(m, column({1, 2, 3})), (std::vector<double>(3, 4.25)));
}

TEST(Predict, ColumnsMatchedByName) {
  Rng rng(21);
  const auto X = random_matrix(rng, 40, 3);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = X.at(i, 2);
  const auto m = fit_gbdt(X, y, exact(10, 2));
  // Reversed column order must not change predictions.
  FeatureMatrix R({"f2", "f1", "f0"}, 40);
  for (std::size_t i = 0; i < 40; ++i) {
    R.row_ids[i] = X.row_ids[i];
    for (std::size_t f = 0; f < 3; ++f) R.at(i, f) = X.at(i, 2 - f);
  }
  EXPECT_EQ(predict_gbdt(m, X), predict_gbdt(m, R));
  FeatureMatrix missing({"f0", "f1"}, 1);
  try {
    predict_gbdt(m, missing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownFeature);
  }
}

TEST(Predict, PrefixOfTrees) {
  Rng rng(4);
  const auto X = random_matrix(rng, 30, 2);
  std::vector<double> y(30);
  for (auto& v : y) v = rng.normal();
  const auto m = fit_gbdt(X, y, exact(5, 2));
  EXPECT_EQ(predict_gbdt(m, X, 0), std::vector<double>(30, m.base_score));
  EXPECT_EQ(predict_gbdt(m, X, 5), predict_gbdt(m, X));
  EXPECT_EQ(predict_gbdt(m, X), predict_gbdt(m, X));
}

TEST(Persistence, RoundTripBitExact) {
  testing::TempDir dir;
  Rng rng(8);
  const auto X = random_matrix(rng, 50, 3);
  std::vector<double> y(50);
  for (auto& v : y) v = std::sin(3.0 * rng.normal());
  GbdtParams p;
  p.n_rounds = 25;
  p.max_depth = 4;
  const auto m = fit_gbdt(X, y, p);
  save_gbdt(m, dir / "m.json");
  const auto back = load_gbdt(dir / "m.json");
  EXPECT_EQ(back, m);
  EXPECT_EQ(predict_gbdt(back, X), predict_gbdt(m, X));
  EXPECT_EQ(format_gbdt(back), format_gbdt(m));
}

TEST(Persistence, MalformedModelRejected) {
  try {
    parse_gbdt("{\"format\": \"nope\"}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadModelFile);
  }
  EXPECT_THROW(parse_gbdt("not json"), Error);
}

TEST(CrossValidate, ConstantTargetIsPerfect) {
  Rng rng(2);
  const auto X = random_matrix(rng, 40, 2);
  const std::vector<double> y(40, 5.0);
  const auto cv = cross_validate(X, y, exact(5, 2), 10, 3);
  EXPECT_EQ(cv.folds.size(), 10u);
  EXPECT_EQ(cv.mean_mape, 0.0);
}

TEST(CrossValidate, DeterministicAndFinite) {
  const auto bundle = generate_synthetic(SyntheticOptions{});
  const auto X = assemble_feature_matrix(bundle.train, fit_features(bundle.train, bundle.test));
  const auto y = transformed_targets(bundle.train, Target::Play);
  const auto a = cross_validate(X, y, GbdtParams{}, 10, 7);
  const auto b = cross_validate(X, y, GbdtParams{}, 10, 7);
  ASSERT_EQ(a.folds.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_TRUE(std::isfinite(a.folds[k].mape));
    EXPECT_EQ(a.folds[k].mape, b.folds[k].mape);
    EXPECT_EQ(a.folds[k].mse, b.folds[k].mse);
  }
}

TEST(CrossValidate, TooFewRows) {
  Rng rng(2);
  const auto X = random_matrix(rng, 5, 1);
  const std::vector<double> y(5, 1.0);
  try {
    cross_validate(X, y, exact(1, 1), 10, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewRows);
  }
}

class Fixed : public CandidateSampler {
 public:
  explicit Fixed(std::vector<GbdtParams> c) : c_(std::move(c)) {}
  GbdtParams draw(std::size_t i) override { return c_.at(i); }

 private:
  std::vector<GbdtParams> c_;
};

TEST(Tune, BudgetOneReturnsTheDraw) {
  Rng rng(6);
  const auto X = random_matrix(rng, 40, 2);
  std::vector<double> y(40);
  for (auto& v : y) v = std::abs(rng.normal());
  const SearchSpace space = {{"max_depth", {1, 4, false}}, {"n_rounds", {5, 20, false}}};
  RandomSearchSampler sampler(space, GbdtParams{}, 3);
  const auto first = sampler.draw(0);
  const auto r = tune_gbdt(X, y, space, 1, 3, GbdtParams{}, 4);
  EXPECT_EQ(r.best, first);
  EXPECT_EQ(r.trials.size(), 1u);
}

TEST(Tune, FixedPointSpace) {
  Rng rng(6);
  const auto X = random_matrix(rng, 40, 2);
  std::vector<double> y(40);
  for (auto& v : y) v = std::abs(rng.normal());
  const SearchSpace space = {{"max_depth", {2, 2, false}}, {"n_rounds", {7, 7, false}}, {"lambda", {0.5, 0.5, true}}};
  const auto r = tune_gbdt(X, y, space, 4, 9, GbdtParams{}, 4);
  EXPECT_EQ(r.best.max_depth, 2u);
  EXPECT_EQ(r.best.n_rounds, 7u);
  EXPECT_EQ(r.best.lambda, 0.5);
}

TEST(Tune, ReturnsArgminOfItsOwnLog) {
  const auto bundle = generate_synthetic(SyntheticOptions{});
  const auto X = assemble_feature_matrix(bundle.train, fit_features(bundle.train, bundle.test));
  const auto y = transformed_targets(bundle.train, Target::Heart);
  SearchSpace space = default_search_space();
  space["n_rounds"] = {10, 60, false};
  const auto r = tune_gbdt(X, y, space, 20, 7, GbdtParams{}, 5);
  ASSERT_EQ(r.trials.size(), 20u);
  for (const auto& t : r.trials) EXPECT_LE(r.best_cv_mape, t.cv_mape);
  EXPECT_EQ(r.trials[r.best_index].params, r.best);
}

TEST(Tune, EarliestWinsTies) {
  Rng rng(6);
  const auto X = random_matrix(rng, 30, 2);
  std::vector<double> y(30);
  for (auto& v : y) v = std::abs(rng.normal());
  GbdtParams a = exact(3, 1);
  Fixed sampler({a, a, a});
  EXPECT_EQ(tune_gbdt(X, y, sampler, 3, 3, 0).best_index, 0u);
}

TEST(Tune, SpaceValidation) {
  EXPECT_THROW(RandomSearchSampler({{"depth", {1, 2, false}}}, GbdtParams{}, 0), Error);
  EXPECT_THROW(RandomSearchSampler({{"lambda", {2, 1, false}}}, GbdtParams{}, 0), Error);
  EXPECT_THROW(RandomSearchSampler({{"lambda", {0, 1, true}}}, GbdtParams{}, 0), Error);
  Rng rng(1);
  const auto X = random_matrix(rng, 20, 1);
  const std::vector<double> y(20, 1.0);
  try {
    tune_gbdt(X, y, SearchSpace{}, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySpace);
  }
}

TEST(Importance, EmptyEnsembleIsZero) {
  TreeEnsemble m;
  m.feature_names = {"a", "b"};
  const auto r = feature_importance(m);
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(r.total_gain(), 0.0);
  for (const auto& e : r.entries) EXPECT_EQ(e.splits, 0u);
}

TEST(Importance, InformativeColumnOnTop) {
  Rng rng(12);
  const auto X = random_matrix(rng, 200, 5);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = std::exp(X.at(i, 3));
  GbdtParams p;
  p.n_rounds = 30;
  p.max_depth = 3;
  const auto sorted = feature_importance(fit_gbdt(X, y, p)).sorted();
  EXPECT_EQ(sorted.front().name, "f3");
  for (std::size_t k = 1; k < sorted.size(); ++k) EXPECT_GE(sorted[k - 1].gain, sorted[k].gain);
  const auto csv = format_importance_csv(feature_importance(fit_gbdt(X, y, p)));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "feature,gain,splits");
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 3), "f3,");
}

}  // namespace
}  // namespace popcast
