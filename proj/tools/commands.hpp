// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline commands. Every artifact lives under the run directory:
//
//   run.json                   resolved settings per command
//   prep/                      median_stats.json, freq_table.json,
//                              features_{train,test}.csv, iqr_mask.csv,
//                              split.csv, targets.csv, prep_report.json
//   models/                    gbdt_<target>.json, fusion_<target>.bin,
//                              tabular_metrics.json, fusion_metrics.json
//   predictions_<split>.csv    split in {train, holdout, test}
//   reports/                   leaderboard.{csv,txt}, density.csv,
//                              importance_<target>.csv, summary.json,
//                              ablation.csv, ablation_best.json
//   ablation/checkpoints/      one JSON per finished ablation cell

#pragma once

#include <filesystem>
#include <string>

#include "run_config.hpp"

namespace popcast::cli {

/// Writes a synthetic bundle into config.out; returns the manifest path.
std::filesystem::path cmd_synth(const RunConfig& config);
void cmd_prepare(const RunConfig& config);
void cmd_train_tabular(const RunConfig& config);
void cmd_train_fusion(const RunConfig& config);
/// Returns false when the grid stopped early (max_new_cells).
bool cmd_ablate(const RunConfig& config);
void cmd_predict(const RunConfig& config);
void cmd_report(const RunConfig& config);

/// Machine-readable error record written to <out>/error.json.
std::string format_error_json(const std::string& command, const std::exception& error);

}  // namespace popcast::cli
