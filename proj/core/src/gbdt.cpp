// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "popcast/error.hpp"
#include "popcast/rng.hpp"

namespace popcast {

void GbdtParams::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "gbdt params: " + what); };
  if (!(min_child_weight >= 0.0)) bad("min_child_weight must be >= 0");
  if (!(lambda >= 0.0)) bad("lambda must be >= 0");
  if (!(gamma >= 0.0)) bad("gamma must be >= 0");
  if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
  if (!(subsample_rows > 0.0 && subsample_rows <= 1.0)) bad("subsample_rows must be in (0, 1]");
  if (!(colsample > 0.0 && colsample <= 1.0)) bad("colsample must be in (0, 1]");
}

double RegressionTree::leaf_weight(std::span<const double> row, std::span<const std::size_t> column_map) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    const double v = row[column_map[static_cast<std::size_t>(n.feature)]];
    i = static_cast<std::size_t>(v < n.threshold ? n.left : n.right);
  }
  return nodes[i].weight;
}

std::size_t RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    for (int c : {nodes[i].left, nodes[i].right}) {
      d[static_cast<std::size_t>(c)] = d[i] + 1;
      deepest = std::max(deepest, d[i] + 1);
    }
  }
  return deepest;
}

namespace {

// Relative width of the band in which two candidate gains count as equal.
constexpr double kTieSlack = 1e-12;

using RowList = std::vector<std::uint32_t>;

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& X, std::span<const double> grad, const GbdtParams& params,
              std::span<const std::size_t> features)
      : X_(X), grad_(grad), params_(params), features_(features) {}

  // `sorted[k]` lists the node's rows ordered by feature features_[k], ties by
  // row index.
  RegressionTree build(std::vector<RowList> sorted) {
    tree_.nodes.clear();
    grow(std::move(sorted), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<RowList> sorted, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    // Sum in ascending row order so the node total does not depend on which
    // feature list is used.
    RowList rows = sorted.front();
    std::sort(rows.begin(), rows.end());
    double G = 0.0;
    for (auto r : rows) G += grad_[r];
    const double H = static_cast<double>(rows.size());
    tree_.nodes[static_cast<std::size_t>(id)].weight = -G / (H + params_.lambda);

    if (depth >= params_.max_depth || rows.size() < 2) return id;
    const SplitCandidate best = find_split(sorted, G, H);
    if (best.feature < 0 || !(best.gain > 0.0)) return id;

    const std::size_t col = static_cast<std::size_t>(best.feature);
    std::vector<RowList> left(sorted.size());
    std::vector<RowList> right(sorted.size());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      for (auto r : sorted[k]) {
        (X_.at(r, col) < best.threshold ? left[k] : right[k]).push_back(r);
      }
    }
    sorted.clear();
    sorted.shrink_to_fit();

    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.gain = best.gain;
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  double score(double g, double h) const { return g * g / (h + params_.lambda); }

  SplitCandidate find_split(const std::vector<RowList>& sorted, double G, double H) const {
    SplitCandidate best;
    const double parent = score(G, H);
    for (std::size_t k = 0; k < features_.size(); ++k) {
      const std::size_t col = features_[k];
      const RowList& order = sorted[k];
      double GL = 0.0;
      double HL = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        GL += grad_[order[i]];
        HL += 1.0;
        const double a = X_.at(order[i], col);
        const double b = X_.at(order[i + 1], col);
        if (!(a < b)) continue;
        const double HR = H - HL;
        if (HL < params_.min_child_weight || HR < params_.min_child_weight) continue;
        const double GR = G - GL;
        const double sl = score(GL, HL);
        const double sr = score(GR, HR);
        const double gain = 0.5 * (sl + sr - parent) - params_.gamma;
        // Gains equal up to summation-order rounding count as ties, so the
        // lowest feature and threshold keep them.
        const double slack = kTieSlack * (sl + sr + parent);
        if (best.feature < 0 || gain > best.gain + slack) {
          double threshold = (a + b) / 2.0;
          if (!(threshold > a)) threshold = b;
          best = {gain, static_cast<int>(col), threshold};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& X_;
  std::span<const double> grad_;
  const GbdtParams& params_;
  std::span<const std::size_t> features_;
  RegressionTree tree_;
};

std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, double fraction) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (fraction >= 1.0) return idx;
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  // Partial Fisher-Yates: the first `keep` slots become the sample.
  for (std::size_t i = 0; i < keep && i + 1 < n; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> map_columns(const TreeEnsemble& model, const FeatureMatrix& X) {
  std::vector<std::size_t> map(model.feature_names.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    auto idx = X.column_index(model.feature_names[i]);
    if (!idx) throw Error(ErrorCode::UnknownFeature, model.feature_names[i]);
    map[i] = *idx;
  }
  return map;
}

}  // namespace

TreeEnsemble fit_gbdt(const FeatureMatrix& X, std::span<const double> y, const GbdtParams& params) {
  params.validate();
  const std::size_t n = X.rows();
  if (n == 0 || y.empty()) throw Error(ErrorCode::EmptyData, "no training rows");
  if (n != y.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(n) + " rows vs " + std::to_string(y.size()) + " targets");
  }
  if (n < 2) throw Error(ErrorCode::EmptyData, "need at least two training rows");
  if (X.cols() == 0) throw Error(ErrorCode::EmptyData, "no feature columns");
  for (double v : y) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteTarget, "target contains NaN or infinity");
  }
  for (double v : X.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "feature matrix contains NaN or infinity");
  }

  TreeEnsemble model;
  model.params = params;
  model.learning_rate = params.learning_rate;
  model.feature_names = X.names;
  double sum = 0.0;
  for (double v : y) sum += v;
  model.base_score = sum / static_cast<double>(n);

  // Global per-feature orderings; per-tree row samples filter them.
  std::vector<RowList> global_order(X.cols());
  for (std::size_t c = 0; c < X.cols(); ++c) {
    auto& order = global_order[c];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return X.at(a, c) < X.at(b, c); });
  }

  Rng rng(params.seed);
  std::vector<double> pred(n, model.base_score);
  std::vector<double> grad(n);
  std::vector<char> in_sample(n);
  std::vector<std::size_t> all_cols(X.cols());
  std::iota(all_cols.begin(), all_cols.end(), std::size_t{0});

  model.trees.reserve(params.n_rounds);
  for (std::size_t round = 0; round < params.n_rounds; ++round) {
    const auto rows = sample_indices(rng, n, params.subsample_rows);
    const auto cols = params.colsample >= 1.0 ? all_cols : sample_indices(rng, X.cols(), params.colsample);

    for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y[i];
    std::fill(in_sample.begin(), in_sample.end(), 0);
    for (auto r : rows) in_sample[r] = 1;

    std::vector<RowList> sorted(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
      sorted[k].reserve(rows.size());
      for (auto r : global_order[cols[k]]) {
        if (in_sample[r]) sorted[k].push_back(r);
      }
    }

    TreeBuilder builder(X, grad, params, cols);
    RegressionTree tree = builder.build(std::move(sorted));
    for (std::size_t i = 0; i < n; ++i) pred[i] += params.learning_rate * tree.leaf_weight(X.row(i), all_cols);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

std::vector<double> predict_gbdt(const TreeEnsemble& model, const FeatureMatrix& X, std::optional<std::size_t> n_trees) {
  const auto map = map_columns(model, X);
  const std::size_t used = std::min(n_trees.value_or(model.trees.size()), model.trees.size());
  std::vector<double> out(X.rows(), model.base_score);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto row = X.row(r);
    double p = model.base_score;
    for (std::size_t t = 0; t < used; ++t) p += model.learning_rate * model.trees[t].leaf_weight(row, map);
    out[r] = p;
  }
  return out;
}

// ---------------------------------------------------------------------------

ImportanceReport feature_importance(const TreeEnsemble& model) {
  ImportanceReport report;
  for (const auto& name : model.feature_names) report.entries.push_back({name, 0.0, 0});
  for (const auto& tree : model.trees) {
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      auto& e = report.entries[static_cast<std::size_t>(node.feature)];
      e.gain += node.gain;
      ++e.splits;
    }
  }
  return report;
}

std::vector<FeatureImportance> ImportanceReport::sorted() const {
  auto out = entries;
  std::stable_sort(out.begin(), out.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) { return a.gain > b.gain; });
  return out;
}

double ImportanceReport::total_gain() const {
  double total = 0.0;
  for (const auto& e : entries) total += e.gain;
  return total;
}

}  // namespace popcast
