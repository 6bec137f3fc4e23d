// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0
//
// Drives the built binary end to end on a small synthetic bundle.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "popcast/error.hpp"
#include "popcast/ingest.hpp"
#include "popcast/text_io.hpp"
#include "run_config.hpp"
#include "support/oracles.hpp"

namespace popcast::cli {
namespace {

namespace fs = std::filesystem;

fs::path scratch_root() {
  static const fs::path root = [] {
    auto p = fs::temp_directory_path() / ("popcast_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

class ScratchCleanup : public ::testing::Environment {
 public:
  void TearDown() override { fs::remove_all(scratch_root()); }
};
const auto* const kCleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

struct Run {
  int code = -1;
  std::string err;
};

Run popcast(const std::string& args) {
  const fs::path err = scratch_root() / "stderr.txt";
  const std::string cmd = std::string(POPCAST_BIN) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_file(err);
  return r;
}

constexpr const char* kSmallConfig = R"({
  "gbdt": {"n_rounds": 20, "max_depth": 3},
  "fusion": {"unified_width": 8, "head_widths": [8, 1], "max_epochs": 5, "batch_size": 16},
  "synth": {"n_train": 120, "n_test": 20,
            "dims": {"1": 6, "2": 6, "3": 6, "4": 6, "5": 6, "6": 6}}
})";

/// Synthetic bundle plus one complete run, shared by the tests below.
class Pipeline : public ::testing::Test {
 protected:
  static fs::path dir() { return scratch_root() / "pipeline"; }
  static fs::path run() { return dir() / "run"; }
  static fs::path manifest() { return dir() / "bundle" / "manifest.json"; }
  static fs::path config() { return dir() / "config.json"; }
  static std::string common(const fs::path& out) {
    return "--manifest " + manifest().string() + " --out " + out.string() + " --seed 7 --config " + config().string();
  }

  static void SetUpTestSuite() {
    fs::create_directories(dir());
    write_file_atomic(config(), kSmallConfig);
    ASSERT_EQ(popcast("synth --out " + (dir() / "bundle").string() + " --seed 7 --config " + config().string()).code, 0);
    for (const char* cmd : {"prepare", "train-tabular", "train-fusion", "predict", "report"}) {
      const auto r = popcast(std::string(cmd) + " " + common(run()));
      ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
    }
  }
};

struct PredRow {
  std::string id, target;
  double tabular = 0.0;
  std::optional<double> fusion;
  double ensemble = 0.0;
};

std::vector<PredRow> read_predictions(const fs::path& path) {
  const auto rows = parse_csv(read_file(path));
  EXPECT_EQ(rows.at(0).fields,
            (std::vector<std::string>{"video_id", "target", "pred_tabular", "pred_fusion", "pred_ensemble"}));
  std::vector<PredRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    PredRow p{f[0], f[1], std::stod(f[2]), std::nullopt, std::stod(f[4])};
    if (!f[3].empty()) p.fusion = std::stod(f[3]);
    out.push_back(p);
  }
  return out;
}

TEST(Overrides, UnknownKeysRejected) {
  RunConfig c;
  EXPECT_THROW(apply_overrides(c, Json::parse(R"({"gbdt": {"depth": 3}})"), "."), Error);
  EXPECT_THROW(apply_overrides(c, Json::parse(R"({"colour": 1})"), "."), Error);
  EXPECT_THROW(apply_overrides(c, Json::parse(R"({"freq_corpus": "everything"})"), "."), Error);
}

TEST(Overrides, AppliedAndResolved) {
  RunConfig c;
  c.out = "/somewhere/private";
  c.seed = 11;
  apply_overrides(c, Json::parse(R"({"iqr_k": 3.0, "fusion": {"head_widths": [16, 4, 1]}, "tune": {"budget": 5}})"),
                  ".");
  EXPECT_EQ(c.iqr_k, 3.0);
  EXPECT_EQ(c.fusion.head_widths, (std::vector<std::size_t>{16, 4, 1}));
  const auto j = resolved_json(c);
  EXPECT_EQ(j["seed"], 11);
  EXPECT_EQ(j["tune"]["budget"], 5);
  EXPECT_EQ(j["fusion"]["head_widths"], Json::parse("[16, 4, 1]"));
  EXPECT_EQ(j.dump().find("/somewhere/private"), std::string::npos);
}

TEST_F(Pipeline, ArtifactsPresent) {
  for (const char* f : {"run.json", "prep/prep_report.json", "prep/split.csv", "models/gbdt_play.json",
                        "models/fusion_share.bin", "predictions_test.csv", "reports/leaderboard.csv",
                        "reports/summary.json", "reports/density.csv", "reports/importance_comment.csv"}) {
    EXPECT_TRUE(fs::exists(run() / f)) << f;
  }
  EXPECT_FALSE(fs::exists(run() / "error.json"));
}

TEST_F(Pipeline, ZeroTuneBudgetNoted) {
  const auto m = Json::parse(read_file(run() / "models" / "tabular_metrics.json"));
  EXPECT_EQ(m["play"]["tuning"], "budget 0: default parameters used");
}

TEST_F(Pipeline, PrepReportMatchesIqrOracle) {
  const auto bundle = load_tabular(dir() / "bundle" / "train.csv", true);
  std::vector<bool> keep(bundle.size(), true);
  for (Target t : kTargets) {
    std::vector<double> logs;
    for (const auto& r : bundle.rows) logs.push_back(std::log1p((*r.targets)[t]));
    const auto k = oracle::iqr_keep(logs, 1.5);
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = keep[i] && k[i];
  }
  std::vector<std::string> expected;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) expected.push_back(bundle.rows[i].video_id);
  }
  const auto report = Json::parse(read_file(run() / "prep" / "prep_report.json"));
  EXPECT_EQ(report["dropped_ids"].get<std::vector<std::string>>(), expected);
  EXPECT_EQ(report["n_dropped"], expected.size());
  EXPECT_EQ(report["n_fit"].get<std::size_t>() + report["n_holdout"].get<std::size_t>(),
            bundle.size() - expected.size());
}

TEST_F(Pipeline, EnsembleIsMemberMean) {
  for (const char* split : {"train", "holdout", "test"}) {
    const auto preds = read_predictions(run() / ("predictions_" + std::string(split) + ".csv"));
    ASSERT_FALSE(preds.empty());
    std::size_t with_fusion = 0;
    for (const auto& p : preds) {
      EXPECT_GE(p.tabular, 0.0);
      if (!p.fusion) {
        EXPECT_EQ(p.ensemble, p.tabular) << p.id;  // incomplete embedding coverage
        continue;
      }
      ++with_fusion;
      EXPECT_GE(*p.fusion, 0.0);
      EXPECT_DOUBLE_EQ(p.ensemble, 0.5 * (p.tabular + *p.fusion)) << p.id;
    }
    EXPECT_GT(with_fusion, preds.size() / 2) << split;
  }
}

TEST_F(Pipeline, MissingEmbeddingFallsBackToTabular) {
  const fs::path copy = scratch_root() / "fallback";
  fs::remove_all(copy);
  fs::copy(dir(), copy, fs::copy_options::recursive);
  // Drop one test video from a source every fusion net reads.
  const auto test = load_tabular(copy / "bundle" / "test.csv", false);
  const std::string victim = test.rows.front().video_id;
  const fs::path emb = copy / "bundle" / "emb_3.txt";
  std::string kept, line;
  std::istringstream in(read_file(emb));
  while (std::getline(in, line)) {
    if (!line.starts_with(victim + "\t")) kept += line + "\n";
  }
  write_file_atomic(emb, kept);

  const std::string args = "--manifest " + (copy / "bundle" / "manifest.json").string() + " --out " +
                           (copy / "run").string() + " --seed 7 --config " + config().string();
  const auto r = popcast("predict " + args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t fallbacks = 0;
  for (const auto& p : read_predictions(copy / "run" / "predictions_test.csv")) {
    if (p.id != victim) continue;
    EXPECT_FALSE(p.fusion.has_value());
    EXPECT_EQ(p.ensemble, p.tabular);
    ++fallbacks;
  }
  EXPECT_EQ(fallbacks, kTargets.size());
}

TEST_F(Pipeline, DensityCountsCoverPredictions) {
  const auto preds = read_predictions(run() / "predictions_test.csv");
  const auto rows = parse_csv(read_file(run() / "reports" / "density.csv"));
  std::map<std::string, std::size_t> totals;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    totals[rows[i].fields[0] + "/" + rows[i].fields[1]] += std::stoul(rows[i].fields[5]);
  }
  std::map<std::string, std::size_t> expected;
  for (const auto& p : preds) {
    ++expected["test/tabular:" + p.target];
    ++expected["test/ensemble:" + p.target];
    if (p.fusion) ++expected["test/fusion:" + p.target];
  }
  for (const auto& [series, n] : expected) EXPECT_EQ(totals[series], n) << series;
}

TEST_F(Pipeline, ImportanceSortedByGain) {
  for (Target t : kTargets) {
    const auto rows = parse_csv(read_file(run() / "reports" / ("importance_" + std::string(target_name(t)) + ".csv")));
    ASSERT_EQ(rows.at(0).fields, (std::vector<std::string>{"feature", "gain", "splits"}));
    ASSERT_GT(rows.size(), 1u);
    for (std::size_t i = 2; i < rows.size(); ++i) {
      EXPECT_GE(std::stod(rows[i - 1].fields[1]), std::stod(rows[i].fields[1]));
    }
  }
}

TEST_F(Pipeline, RerunIsByteStable) {
  const fs::path again = scratch_root() / "again";
  for (const char* cmd : {"prepare", "train-tabular", "train-fusion"}) {
    ASSERT_EQ(popcast(std::string(cmd) + " " + common(again)).code, 0) << cmd;
  }
  for (const auto& entry : fs::directory_iterator(run() / "models")) {
    EXPECT_EQ(read_file(entry.path()), read_file(again / "models" / entry.path().filename())) << entry.path();
  }
  EXPECT_EQ(read_file(run() / "prep" / "prep_report.json"), read_file(again / "prep" / "prep_report.json"));
}

TEST_F(Pipeline, MissingPrepIsExitThree) {
  const fs::path empty = scratch_root() / "empty_run";
  const auto r = popcast("train-tabular " + common(empty));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("prepare"), std::string::npos) << r.err;
  EXPECT_TRUE(fs::exists(empty / "error.json"));
}

TEST_F(Pipeline, CorruptCsvIsExitTwo) {
  const fs::path copy = scratch_root() / "corrupt";
  fs::remove_all(copy);
  fs::create_directories(copy);
  fs::copy(dir() / "bundle", copy / "bundle", fs::copy_options::recursive);
  std::ofstream(copy / "bundle" / "train.csv", std::ios::app) << "broken,row\n";
  const auto r = popcast("prepare --manifest " + (copy / "bundle" / "manifest.json").string() + " --out " +
                         (copy / "run").string() + " --seed 7");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("MalformedRow"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrorsAreExitTwo) {
  EXPECT_EQ(popcast("prepare --out /tmp/x").code, 2);
  EXPECT_EQ(popcast("no-such-command").code, 2);
}

}  // namespace
}  // namespace popcast::cli
