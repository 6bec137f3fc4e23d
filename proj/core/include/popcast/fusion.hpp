// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-branch fusion regressor. Each embedding source is projected to a
// shared width: text sources (5, 6) through dense -> layer norm -> GELU,
// video sources (1-4) through dense -> batch norm -> ReLU. Branch outputs are
// concatenated in ascending source order and fed to a dense head whose widths
// strictly decrease to 1 (dense -> ReLU -> dropout per hidden layer, linear
// output). Gradients are computed by hand; gradient_check compares them with
// central differences.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "popcast/ingest.hpp"
#include "popcast/rng.hpp"

namespace popcast {

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// Source id -> rows x input_dim matrix; rows aligned across sources.
using Batch = std::map<int, Matrix>;

Batch gather_rows(const Batch& batch, std::span<const std::size_t> rows);

/// Stacks embedding rows for `ids` from each listed source.
/// Throws MissingSource when a source or an id is absent.
Batch make_batch(const std::map<int, EmbeddingSet>& embeddings, std::span<const int> sources,
                 std::span<const std::string> ids);

/// True when every listed source has a vector for `id`.
bool has_all_sources(const std::map<int, EmbeddingSet>& embeddings, std::span<const int> sources,
                     const std::string& id);

enum class BranchKind { Video, Text };

struct BranchSpec {
  int source_id = 0;
  std::size_t input_dim = 0;
  BranchKind kind = BranchKind::Video;
  std::size_t unified_width = 256;

  bool operator==(const BranchSpec&) const = default;
};

/// Picks the kind from the source registry (5 and 6 are text).
BranchSpec make_branch_spec(int source_id, std::size_t input_dim, std::size_t unified_width = 256);

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // in x out, row-major
  std::vector<double> bias;    // empty when the layer has no bias
};

struct Branch {
  BranchSpec spec;
  // Video projections carry no bias: batch norm removes it and beta replaces it.
  DenseLayer projection;
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;  // video only
  std::vector<double> running_var;   // video only
};

enum class Mode { Train, Eval };

inline constexpr double kLayerNormEps = 1e-9;
inline constexpr double kBatchNormEps = 1e-5;

struct BranchCache {
  Matrix pre;         // projection output
  Matrix normalized;  // before the affine
  Matrix affine;      // gamma * normalized + beta
  Matrix out;
  std::vector<double> mean;     // per row (text) or per unit (video)
  std::vector<double> inv_std;
  std::vector<double> variance;  // biased batch variance (video, train mode)
};

struct HeadCache {
  Matrix input;
  Matrix pre;
  Matrix mask;  // dropout scale per element; empty when no dropout applied
};

struct ForwardCache {
  Mode mode = Mode::Eval;
  const Batch* batch = nullptr;
  std::vector<BranchCache> branches;
  std::vector<HeadCache> head;
  std::vector<double> output;
};

/// One gradient buffer per parameter tensor, aligned with parameters().
using Gradients = std::vector<std::vector<double>>;

class FusionNet {
 public:
  FusionNet() = default;

  const std::vector<Branch>& branches() const { return branches_; }
  std::vector<Branch>& branches() { return branches_; }
  const std::vector<DenseLayer>& head() const { return head_; }
  std::vector<DenseLayer>& head() { return head_; }
  std::vector<std::size_t> head_widths() const;
  std::size_t concat_width() const;

  double dropout() const { return dropout_; }
  void set_dropout(double rate);
  std::uint64_t seed() const { return seed_; }

  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;
  Gradients zero_gradients() const;

  /// Train mode uses batch statistics for batch norm and applies dropout when
  /// `dropout_rng` is given. Throws MissingSourceInBatch, ShapeMismatch.
  std::vector<double> forward(const Batch& batch, Mode mode, Rng* dropout_rng = nullptr,
                              ForwardCache* cache = nullptr) const;

  /// Accumulates dLoss/dParam into `grads` given dLoss/dOutput.
  void backward(const ForwardCache& cache, std::span<const double> grad_output, Gradients& grads) const;

  /// Folds train-mode batch statistics into the running estimates.
  void update_running_stats(const ForwardCache& cache, double momentum);

  bool operator==(const FusionNet&) const;

 private:
  friend FusionNet build_fusion_net(std::vector<BranchSpec>, std::vector<std::size_t>, std::uint64_t, double);
  friend FusionNet parse_fusion(std::string_view);

  std::vector<Branch> branches_;  // ascending source id
  std::vector<DenseLayer> head_;
  double dropout_ = 0.3;
  std::uint64_t seed_ = 0;
};

/// Seeded He-uniform init for video branches and hidden head layers,
/// Xavier-uniform for text branches and the output layer.
/// Throws BadHeadShape, DuplicateSource.
FusionNet build_fusion_net(std::vector<BranchSpec> specs, std::vector<std::size_t> head_widths, std::uint64_t seed,
                           double dropout = 0.3);

double mse_loss(std::span<const double> pred, std::span<const double> target);
std::vector<double> mse_loss_grad(std::span<const double> pred, std::span<const double> target);

struct GradientCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t n_checked = 0;
};

/// Central differences against backward() on the MSE loss, train-mode batch
/// norm, dropout off. Relative error |a - n| / max(|a|, |n|, 1e-6); the floor
/// sits above the truncation noise of a central difference at eps = 1e-5.
GradientCheckResult gradient_check(const FusionNet& net, const Batch& batch, std::span<const double> targets,
                                   double epsilon = 1e-5);

class AdamOptimizer {
 public:
  AdamOptimizer(const FusionNet& net, double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(FusionNet& net, const Gradients& grads);

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
  Gradients m_;
  Gradients v_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double val_frac = 0.2;
  double dropout = 0.3;
  double bn_momentum = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  FusionNet net;  // parameters from the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
};

/// Adam on MSE in the transformed target space with early stopping on
/// validation MSE. Throws TooFewRows, DivergedLoss.
TrainResult train_fusion(FusionNet net, const Batch& inputs, std::span<const double> targets, const TrainConfig& cfg);

/// Eval-mode forward mapped back with max(expm1(z), 0).
std::vector<double> predict_fusion(const FusionNet& net, const Batch& inputs);

/// Versioned binary blob: magic, JSON architecture header, raw little-endian
/// doubles for every parameter and running statistic.
std::string format_fusion(const FusionNet& net);
FusionNet parse_fusion(std::string_view bytes);
void save_fusion(const FusionNet& net, const std::filesystem::path& path);
FusionNet load_fusion(const std::filesystem::path& path);

}  // namespace popcast
