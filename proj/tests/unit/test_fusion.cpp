// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/fusion.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "popcast/error.hpp"
#include "popcast/features.hpp"
#include "popcast/rng.hpp"
#include "popcast/text_io.hpp"
#include "support/temp_dir.hpp"

namespace popcast {
namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no popcast::Error thrown";
  return ErrorCode::InvalidArgument;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

/// Two-branch toy net: one video source and one text source.
struct Toy {
  FusionNet net;
  Batch batch;
  std::vector<double> y;
};

Toy toy(std::uint64_t seed, std::size_t rows = 6, std::vector<std::size_t> head = {3, 1}) {
  Rng rng(seed);
  Toy t;
  t.net = build_fusion_net({make_branch_spec(2, 4, 3), make_branch_spec(5, 4, 3)}, head, seed);
  t.batch[2] = random_matrix(rng, rows, 4);
  t.batch[5] = random_matrix(rng, rows, 4);
  for (std::size_t i = 0; i < rows; ++i) t.y.push_back(rng.normal());
  return t;
}

std::size_t param_index(const FusionNet& net, const std::string& name) {
  const auto names = net.parameter_names();
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

TEST(Build, ShapesFromSpecs) {
  const auto net = build_fusion_net({make_branch_spec(3, 10, 32), make_branch_spec(4, 12, 32)}, {64, 16, 1}, 1);
  EXPECT_EQ(net.branches().size(), 2u);
  EXPECT_EQ(net.concat_width(), 64u);
  EXPECT_EQ(net.head_widths(), (std::vector<std::size_t>{64, 16, 1}));
  EXPECT_TRUE(net.branches()[0].projection.bias.empty());
  EXPECT_EQ(make_branch_spec(6, 8).kind, BranchKind::Text);
  EXPECT_EQ(make_branch_spec(1, 8).kind, BranchKind::Video);
  EXPECT_EQ(make_branch_spec(6, 8).unified_width, 256u);
}

TEST(Build, SeededInitIsReproducible) {
  const auto a = build_fusion_net({make_branch_spec(3, 10, 32), make_branch_spec(4, 12, 32)}, {64, 16, 1}, 1);
  const auto b = build_fusion_net({make_branch_spec(3, 10, 32), make_branch_spec(4, 12, 32)}, {64, 16, 1}, 1);
  const auto c = build_fusion_net({make_branch_spec(3, 10, 32), make_branch_spec(4, 12, 32)}, {64, 16, 1}, 2);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
}

TEST(Build, RejectsBadShapes) {
  const std::vector<BranchSpec> specs = {make_branch_spec(3, 4, 8)};
  EXPECT_EQ(code_of([&] { build_fusion_net(specs, {16, 16, 1}, 0); }), ErrorCode::BadHeadShape);
  EXPECT_EQ(code_of([&] { build_fusion_net(specs, {16, 4}, 0); }), ErrorCode::BadHeadShape);
  EXPECT_EQ(code_of([&] { build_fusion_net(specs, {}, 0); }), ErrorCode::BadHeadShape);
  EXPECT_EQ(code_of([&] { build_fusion_net({make_branch_spec(3, 4, 8), make_branch_spec(3, 4, 8)}, {4, 1}, 0); }),
            ErrorCode::DuplicateSource);
  EXPECT_EQ(code_of([&] { build_fusion_net({make_branch_spec(3, 4, 8), make_branch_spec(4, 4, 6)}, {4, 1}, 0); }),
            ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { build_fusion_net({}, {4, 1}, 0); }), ErrorCode::InvalidArgument);
}

TEST(Forward, EvalIgnoresDropoutSeed) {
  auto t = toy(3, 6, {5, 3, 1});
  t.net.set_dropout(0.5);
  Rng r1(1), r2(2);
  EXPECT_EQ(t.net.forward(t.batch, Mode::Eval, &r1), t.net.forward(t.batch, Mode::Eval, &r2));
  EXPECT_EQ(t.net.forward(t.batch, Mode::Eval, &r1), t.net.forward(t.batch, Mode::Eval));
}

TEST(Forward, TrainDropoutMaskScalesKeptUnits) {
  auto t = toy(3, 64, {40, 1});
  t.net.set_dropout(0.25);
  Rng rng(9);
  ForwardCache cache;
  t.net.forward(t.batch, Mode::Train, &rng, &cache);
  const auto& mask = cache.head[0].mask;
  ASSERT_EQ(mask.data.size(), 64u * 40u);
  std::size_t kept = 0;
  for (double m : mask.data) {
    EXPECT_TRUE(m == 0.0 || m == 1.0 / 0.75);
    kept += m != 0.0;
  }
  const double frac = static_cast<double>(kept) / static_cast<double>(mask.data.size());
  EXPECT_NEAR(frac, 0.75, 0.05);
}

TEST(Forward, EvalRowsAreIndependent) {
  auto t = toy(4, 2);
  const auto both = t.net.forward(t.batch, Mode::Eval);
  for (std::size_t r = 0; r < 2; ++r) {
    const std::vector<std::size_t> one = {r};
    const auto single = t.net.forward(gather_rows(t.batch, one), Mode::Eval);
    EXPECT_EQ(single[0], both[r]);
  }
}

TEST(Forward, ZeroOutputLayerPredictsZero) {
  auto t = toy(5);
  auto& last = t.net.head().back();
  std::fill(last.weight.begin(), last.weight.end(), 0.0);
  std::fill(last.bias.begin(), last.bias.end(), 0.0);
  for (double v : t.net.forward(t.batch, Mode::Eval)) EXPECT_EQ(v, 0.0);
}

TEST(Forward, LayerNormRowsStandardised) {
  auto t = toy(6, 8);
  ForwardCache cache;
  t.net.forward(t.batch, Mode::Train, nullptr, &cache);
  const auto& n = cache.branches[1].normalized;  // source 5 is the text branch
  for (std::size_t r = 0; r < n.rows; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < n.cols; ++c) mean += n(r, c);
    mean /= static_cast<double>(n.cols);
    for (std::size_t c = 0; c < n.cols; ++c) var += (n(r, c) - mean) * (n(r, c) - mean);
    var /= static_cast<double>(n.cols);
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(Forward, BatchNormColumnsStandardisedInTrain) {
  auto t = toy(7, 10);
  ForwardCache cache;
  t.net.forward(t.batch, Mode::Train, nullptr, &cache);
  const auto& n = cache.branches[0].normalized;
  for (std::size_t c = 0; c < n.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n.rows; ++r) mean += n(r, c);
    EXPECT_NEAR(mean / static_cast<double>(n.rows), 0.0, 1e-9);
  }
}

TEST(Forward, BatchValidation) {
  auto t = toy(8);
  Batch missing = t.batch;
  missing.erase(5);
  EXPECT_EQ(code_of([&] { t.net.forward(missing, Mode::Eval); }), ErrorCode::MissingSourceInBatch);
  Batch narrow = t.batch;
  narrow[5] = Matrix(6, 3);
  EXPECT_EQ(code_of([&] { t.net.forward(narrow, Mode::Eval); }), ErrorCode::ShapeMismatch);
  Batch ragged = t.batch;
  ragged[5] = Matrix(5, 4);
  EXPECT_EQ(code_of([&] { t.net.forward(ragged, Mode::Eval); }), ErrorCode::ShapeMismatch);
}

TEST(Gradients, ToyNetsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto t = toy(100 + seed);
    // Nonzero shifts keep pre-activations off the ReLU kink.
    Rng rng(seed);
    const auto names = t.net.parameter_names();
    auto params = t.net.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (names[k].ends_with("bias") || names[k].ends_with("beta")) {
        for (auto& v : params[k]) v = 0.1 * rng.normal();
      }
    }
    const auto r = gradient_check(t.net, t.batch, t.y, 1e-5);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed << " " << r.worst_parameter;
    EXPECT_EQ(r.n_checked, t.net.parameter_count());
  }
}

TEST(Gradients, OutputLayerClosedForm) {
  auto t = toy(11, 1, {1});
  ForwardCache cache;
  const auto pred = t.net.forward(t.batch, Mode::Train, nullptr, &cache);
  auto grads = t.net.zero_gradients();
  t.net.backward(cache, mse_loss_grad(pred, t.y), grads);
  const auto w = param_index(t.net, "head0.weight");
  const auto b = param_index(t.net, "head0.bias");
  const double d = 2.0 * (pred[0] - t.y[0]);
  const auto& input = cache.head[0].input;
  for (std::size_t k = 0; k < input.cols; ++k) EXPECT_EQ(grads[w][k], d * input(0, k));
  EXPECT_EQ(grads[b][0], d);
}

TEST(Gradients, ZeroInputZeroProjectionGradient) {
  auto t = toy(12);
  for (auto& [id, m] : t.batch) std::fill(m.data.begin(), m.data.end(), 0.0);
  ForwardCache cache;
  const auto pred = t.net.forward(t.batch, Mode::Train, nullptr, &cache);
  auto grads = t.net.zero_gradients();
  t.net.backward(cache, mse_loss_grad(pred, t.y), grads);
  for (const char* name : {"branch2.weight", "branch5.weight"}) {
    for (double g : grads[param_index(t.net, name)]) EXPECT_EQ(g, 0.0) << name;
  }
}

TEST(Gradients, CheckRejectsLargeNets) {
  const auto net = build_fusion_net({make_branch_spec(1, 100, 64)}, {32, 1}, 0);
  Batch batch;
  batch[1] = Matrix(2, 100);
  const std::vector<double> y = {0, 0};
  EXPECT_THROW(gradient_check(net, batch, y), Error);
}

TEST(Loss, MseAndGradient) {
  const std::vector<double> p = {1, 3}, y = {0, 0};
  EXPECT_EQ(mse_loss(p, y), 5.0);
  EXPECT_EQ(mse_loss_grad(p, y), (std::vector<double>{1.0, 3.0}));
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto t = toy(13);
  const FusionNet before = t.net;
  AdamOptimizer adam(t.net);
  adam.step(t.net, t.net.zero_gradients());
  EXPECT_EQ(t.net, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto t = toy(14);
  const FusionNet before = t.net;
  AdamOptimizer adam(t.net, 1e-3);
  auto g = t.net.zero_gradients();
  for (auto& v : g) std::fill(v.begin(), v.end(), 0.5);
  adam.step(t.net, g);
  const auto a = before.parameters();
  const auto b = t.net.parameters();
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) EXPECT_NEAR(a[k][i] - b[k][i], 1e-3, 1e-10);
  }
}

struct SynthData {
  Batch inputs;
  std::vector<double> y;
  std::vector<BranchSpec> specs;
};

SynthData synth_data(Target target, std::size_t unified) {
  SyntheticOptions o;
  o.n_train = 200;
  for (int id : {1, 4, 5}) o.dims[id] = 12;
  const auto bundle = generate_synthetic(o);
  const std::vector<int> sources = {1, 4, 5};
  std::vector<std::string> ids;
  std::vector<double> y;
  const auto all = transformed_targets(bundle.train, target);
  for (std::size_t i = 0; i < bundle.train.size(); ++i) {
    if (has_all_sources(bundle.embeddings, sources, bundle.train.rows[i].video_id)) {
      ids.push_back(bundle.train.rows[i].video_id);
      y.push_back(all[i]);
    }
  }
  SynthData d;
  d.inputs = make_batch(bundle.embeddings, sources, ids);
  d.y = y;
  for (int s : sources) d.specs.push_back(make_branch_spec(s, 12, unified));
  return d;
}

TEST(Train, ZeroTargetsStayAtZero) {
  const auto d = synth_data(Target::Play, 8);
  auto net = build_fusion_net(d.specs, {8, 1}, 3);
  auto& last = net.head().back();
  std::fill(last.weight.begin(), last.weight.end(), 0.0);
  std::fill(last.bias.begin(), last.bias.end(), 0.0);
  const std::vector<double> zeros(d.y.size(), 0.0);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  const auto r = train_fusion(net, d.inputs, zeros, cfg);
  EXPECT_EQ(r.best_val_loss, 0.0);
  for (double v : r.net.forward(d.inputs, Mode::Eval)) EXPECT_EQ(v, 0.0);
}

TEST(Train, DeterministicHistory) {
  const auto d = synth_data(Target::Comment, 8);
  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.seed = 21;
  const auto net = build_fusion_net(d.specs, {8, 1}, 3);
  const auto a = train_fusion(net, d.inputs, d.y, cfg);
  const auto b = train_fusion(net, d.inputs, d.y, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].val_loss, b.history[e].val_loss);
  }
  EXPECT_EQ(a.net, b.net);
}

TEST(Train, RestoresBestEpoch) {
  const auto d = synth_data(Target::Heart, 16);
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.patience = 4;
  cfg.max_epochs = 300;
  const auto r = train_fusion(build_fusion_net(d.specs, {16, 4, 1}, 9), d.inputs, d.y, cfg);
  double best = r.history.front().val_loss;
  for (const auto& e : r.history) best = std::min(best, e.val_loss);
  EXPECT_EQ(r.best_val_loss, best);
  EXPECT_EQ(r.history[r.best_epoch - 1].val_loss, best);
  EXPECT_LE(r.history.size() - r.best_epoch, cfg.patience);
  EXPECT_LT(r.best_epoch, cfg.max_epochs);

  std::vector<double> val_y;
  for (auto i : r.val_rows) val_y.push_back(d.y[i]);
  EXPECT_EQ(mse_loss(r.net.forward(gather_rows(d.inputs, r.val_rows), Mode::Eval), val_y), best);
  EXPECT_EQ(r.train_rows.size() + r.val_rows.size(), d.y.size());
}

TEST(Train, RunningStatsMove) {
  const auto d = synth_data(Target::Share, 8);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  const auto r = train_fusion(build_fusion_net(d.specs, {8, 1}, 3), d.inputs, d.y, cfg);
  const auto& video = r.net.branches()[0];
  EXPECT_NE(video.running_mean, std::vector<double>(8, 0.0));
  EXPECT_NE(video.running_var, std::vector<double>(8, 1.0));
}

TEST(Train, ConfigAndDataErrors) {
  TrainConfig c;
  c.patience = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.val_frac = 0.6;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), Error);

  auto t = toy(15, 4);
  EXPECT_EQ(code_of([&] { train_fusion(t.net, t.batch, t.y, TrainConfig{}); }), ErrorCode::TooFewRows);
  auto big = toy(15, 20);
  big.y[3] = std::nan("");
  EXPECT_EQ(code_of([&] { train_fusion(big.net, big.batch, big.y, TrainConfig{}); }), ErrorCode::NonFiniteTarget);
}

TEST(Train, OverflowingLossIsDivergence) {
  // Squared errors past the double range turn the batch loss infinite.
  auto t = toy(16, 40);
  for (auto& v : t.y) v *= 1e200;
  TrainConfig cfg;
  cfg.max_epochs = 2;
  EXPECT_EQ(code_of([&] { train_fusion(t.net, t.batch, t.y, cfg); }), ErrorCode::DivergedLoss);
}

TEST(Predict, RawScaleClamp) {
  auto t = toy(17, 1);
  auto& last = t.net.head().back();
  std::fill(last.weight.begin(), last.weight.end(), 0.0);
  auto raw = [&](double z) {
    last.bias[0] = z;
    return predict_fusion(t.net, t.batch)[0];
  };
  EXPECT_EQ(raw(0.0), 0.0);
  EXPECT_NEAR(raw(std::log(101.0)), 100.0, 1e-9);
  EXPECT_EQ(raw(-5.0), 0.0);
}

TEST(Batches, MakeBatchAndCoverage) {
  EmbeddingSet s(3, 2);
  const std::vector<double> a = {1, 2}, b = {3, 4};
  s.add("v1", a);
  s.add("v2", b);
  const std::map<int, EmbeddingSet> emb = {{3, s}};
  const std::vector<int> sources = {3};
  const std::vector<std::string> ids = {"v2", "v1"};
  const auto batch = make_batch(emb, sources, ids);
  EXPECT_EQ(batch.at(3).data, (std::vector<double>{3, 4, 1, 2}));
  const std::vector<std::string> bad = {"v9"};
  EXPECT_EQ(code_of([&] { make_batch(emb, sources, bad); }), ErrorCode::MissingSource);
  EXPECT_TRUE(has_all_sources(emb, sources, "v1"));
  EXPECT_FALSE(has_all_sources(emb, sources, "v9"));
  const std::vector<int> four = {4};
  EXPECT_FALSE(has_all_sources(emb, four, "v1"));
}

TEST(Persistence, RoundTripBitExact) {
  testing::TempDir dir;
  const auto d = synth_data(Target::Play, 8);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  const auto net = train_fusion(build_fusion_net(d.specs, {8, 1}, 3), d.inputs, d.y, cfg).net;
  save_fusion(net, dir / "f.bin");
  const auto back = load_fusion(dir / "f.bin");
  EXPECT_EQ(back, net);
  EXPECT_EQ(back.forward(d.inputs, Mode::Eval), net.forward(d.inputs, Mode::Eval));
  EXPECT_EQ(format_fusion(back), format_fusion(net));
}

TEST(Persistence, CorruptFilesRejected) {
  const auto bytes = format_fusion(toy(18).net);
  EXPECT_EQ(code_of([&] { parse_fusion(bytes.substr(0, bytes.size() - 3)); }), ErrorCode::BadModelFile);
  EXPECT_EQ(code_of([&] { parse_fusion(bytes + "x"); }), ErrorCode::BadModelFile);
  EXPECT_EQ(code_of([&] { parse_fusion("NOTAFILE"); }), ErrorCode::BadModelFile);
}

}  // namespace
}  // namespace popcast
