// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "popcast/evaluate.hpp"
#include "popcast/features.hpp"
#include "popcast/fusion.hpp"
#include "popcast/gbdt.hpp"
#include "popcast/ingest.hpp"

namespace popcast::cli {

using Json = nlohmann::ordered_json;

struct TuneSettings {
  std::size_t budget = 0;  // 0 keeps the base parameters
  std::size_t folds = 10;
  SearchSpace space = default_search_space();
};

struct FusionSettings {
  std::size_t unified_width = 256;
  std::vector<std::size_t> head_widths{512, 128, 32, 1};
  TrainConfig train;
};

struct AblationSettings {
  std::string mode = "all";  // "all" or "listed"
  std::filesystem::path labels_file;
  std::vector<Target> targets{kTargets.begin(), kTargets.end()};
  std::size_t threads = 1;
  std::optional<std::size_t> max_new_cells;
};

struct SynthSettings {
  std::size_t n_train = 400;
  std::size_t n_test = 100;
  std::map<int, std::size_t> dims{{1, 48}, {2, 48}, {3, 48}, {4, 48}, {5, 64}, {6, 64}};
  double missing_meta_frac = 0.05;
};

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out;
  std::uint64_t seed = 0;

  std::optional<DaypartHours> daypart;  // falls back to the manifest's hours
  double iqr_k = 1.5;
  double holdout_frac = 0.2;
  FrequencyCorpus freq_corpus = FrequencyCorpus::TrainAndTest;
  GbdtParams gbdt;
  TuneSettings tune;
  FusionSettings fusion;
  AverageSpace ensemble_space = AverageSpace::Raw;
  AblationSettings ablation;
  SynthSettings synth;
};

/// Applies a JSON override document. Relative file paths resolve against
/// `base_dir`. Unknown keys throw InvalidArgument.
void apply_overrides(RunConfig& config, const Json& overrides, const std::filesystem::path& base_dir);
void load_overrides(RunConfig& config, const std::filesystem::path& path);

/// Resolved settings without machine-specific paths, for run.json.
Json resolved_json(const RunConfig& config);

}  // namespace popcast::cli
