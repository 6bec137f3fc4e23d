// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "popcast/error.hpp"
#include "popcast/fusion.hpp"

namespace popcast {

AdamOptimizer::AdamOptimizer(const FusionNet& net, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(net.zero_gradients()), v_(net.zero_gradients()) {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
}

void AdamOptimizer::step(FusionNet& net, const Gradients& grads) {
  auto params = net.parameters();
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradients do not match the network");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k];
    const auto& g = grads[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "fusion training: " + what); };
  if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
  if (batch_size == 0) bad("batch_size must be positive");
  if (max_epochs == 0) bad("max_epochs must be positive");
  if (patience == 0) bad("patience must be at least 1");
  if (!(val_frac > 0.0 && val_frac <= 0.5)) bad("val_frac must be in (0, 0.5]");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must be in [0, 1)");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) bad("bn_momentum must be in (0, 1]");
}

namespace {

std::size_t batch_rows(const Batch& batch) { return batch.empty() ? 0 : batch.begin()->second.rows; }

std::vector<double> pick(std::span<const double> v, std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

}  // namespace

TrainResult train_fusion(FusionNet net, const Batch& inputs, std::span<const double> targets, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = batch_rows(inputs);
  for (const auto& [id, m] : inputs) {
    if (m.rows != n) throw Error(ErrorCode::ShapeMismatch, "sources disagree on row count");
  }
  if (n != targets.size()) throw Error(ErrorCode::LengthMismatch, "inputs and targets differ in length");
  for (double t : targets) {
    if (!std::isfinite(t)) throw Error(ErrorCode::NonFiniteTarget, "fusion target contains NaN or infinity");
  }
  const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_frac * static_cast<double>(n)));
  if (n_val < 2 || n < n_val + 2) {
    throw Error(ErrorCode::TooFewRows, std::to_string(n) + " rows leave too few for training and validation");
  }
  net.set_dropout(cfg.dropout);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng split_rng(derive_seed(cfg.seed, "split"));
  split_rng.shuffle(std::span<std::size_t>(perm));

  TrainResult result;
  result.val_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  result.train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(result.val_rows.begin(), result.val_rows.end());
  std::sort(result.train_rows.begin(), result.train_rows.end());

  const Batch val_batch = gather_rows(inputs, result.val_rows);
  const auto val_targets = pick(targets, result.val_rows);

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  AdamOptimizer adam(net, cfg.learning_rate);

  result.best_val_loss = std::numeric_limits<double>::infinity();
  result.net = net;
  std::size_t since_best = 0;
  std::vector<std::size_t> order = result.train_rows;
  ForwardCache cache;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    // Batch boundaries; a trailing single row joins the previous batch so
    // batch statistics are never taken over one row.
    std::vector<std::size_t> bounds;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) bounds.push_back(b);
    if (bounds.size() > 1 && order.size() - bounds.back() == 1) bounds.pop_back();
    bounds.push_back(order.size());

    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi + 1 < bounds.size(); ++bi) {
      const std::span<const std::size_t> rows(order.data() + bounds[bi], bounds[bi + 1] - bounds[bi]);
      const Batch batch = gather_rows(inputs, rows);
      const auto y = pick(targets, rows);
      const auto pred = net.forward(batch, Mode::Train, &dropout_rng, &cache);
      const double loss = mse_loss(pred, y);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::DivergedLoss, "training loss became non-finite at epoch " + std::to_string(epoch));
      }
      loss_sum += loss * static_cast<double>(rows.size());
      auto grads = net.zero_gradients();
      net.backward(cache, mse_loss_grad(pred, y), grads);
      adam.step(net, grads);
      net.update_running_stats(cache, cfg.bn_momentum);
    }

    const double val_loss = mse_loss(net.forward(val_batch, Mode::Eval), val_targets);
    if (!std::isfinite(val_loss)) {
      throw Error(ErrorCode::DivergedLoss, "validation loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.history.push_back({epoch, loss_sum / static_cast<double>(order.size()), val_loss});
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.net = net;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

std::vector<double> predict_fusion(const FusionNet& net, const Batch& inputs) {
  auto z = net.forward(inputs, Mode::Eval);
  for (auto& v : z) v = std::max(std::expm1(v), 0.0);
  return z;
}

}  // namespace popcast
