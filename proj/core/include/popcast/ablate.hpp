// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0
//
// Source-subset ablation grid: one fusion net per (subset, target), scored by
// MAPE on a shared held-out split. Cells are seeded independently so the grid
// can run in any order, in parallel, and resume from per-cell checkpoints.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "popcast/fusion.hpp"
#include "popcast/ingest.hpp"

namespace popcast {

struct SubsetSpec {
  std::vector<int> sources;  // ascending, unique, each in 1..6
  std::string label;         // e.g. "2+3+4+6"

  bool operator==(const SubsetSpec&) const = default;
};

/// Throws DuplicateSource, BadLabel.
SubsetSpec make_subset(std::vector<int> sources);
/// Accepts `d(+d)*` with digits 1..6 in any order. Throws BadLabel, DuplicateSource.
SubsetSpec parse_subset(std::string_view label);

/// All non-empty subsets, by size then lexicographically by source list.
std::vector<SubsetSpec> enumerate_subsets(const std::set<int>& available);
/// One label per line; blank lines and '#' comments skipped; file order kept.
std::vector<SubsetSpec> parse_subset_list(std::string_view text);
std::vector<SubsetSpec> load_subset_list(const std::filesystem::path& path);

enum class CellState { Pending, Done, Failed };

struct AblationCell {
  CellState state = CellState::Pending;
  double mape = 0.0;
  std::string error;  // set when Failed
};

struct AblationRow {
  SubsetSpec subset;
  std::array<AblationCell, 4> cells;  // indexed by Target

  const AblationCell& operator[](Target t) const { return cells[static_cast<std::size_t>(t)]; }
  AblationCell& operator[](Target t) { return cells[static_cast<std::size_t>(t)]; }
};

struct AblationTable {
  std::vector<AblationRow> rows;  // requested subset order
  std::vector<Target> targets;
  std::uint64_t seed = 0;
  std::string config;  // JSON snapshot of the settings that shaped the cells

  bool complete() const;
};

struct AblationConfig {
  std::size_t unified_width = 256;
  std::vector<std::size_t> head_widths{512, 128, 32, 1};
  TrainConfig train;  // train.seed is replaced per cell
  double holdout_frac = 0.2;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty disables checkpoints
  /// Stop after this many newly computed cells (remaining cells stay Pending).
  std::optional<std::size_t> max_new_cells;
  std::size_t threads = 1;

  std::string snapshot() const;
};

/// `rows` index labeled rows of bundle.train to use. Rows lacking any of a
/// subset's sources are left out of that subset's cells. Throws MissingSource
/// when a subset names a source the bundle does not have.
AblationTable run_ablation(const DatasetBundle& bundle, std::span<const std::size_t> rows,
                           const std::vector<SubsetSpec>& subsets, const std::vector<Target>& targets,
                           const AblationConfig& config);

/// Seed for one cell; depends only on (seed, label, target).
std::uint64_t cell_seed(std::uint64_t seed, const std::string& label, Target target);

struct BestCell {
  std::string label;
  double mape = 0.0;
};

/// Argmin per target over Done cells; ties go to the lexicographically
/// smaller label. Empty when a target has no finished cell.
std::array<std::optional<BestCell>, 4> highlight_best(const AblationTable& table);

/// Columns label,share,heart,comment,play; failed cells read "ERR", pending
/// or unrequested cells are empty.
std::string format_ablation_csv(const AblationTable& table);
AblationTable parse_ablation_csv(std::string_view text);

}  // namespace popcast
