// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset bundle: the tabular CSVs, one embedding file per source and the
// manifest tying them together. Also hosts the seeded synthetic generator.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace popcast {

// ---------------------------------------------------------------------------
// Targets

enum class Target { Comment = 0, Heart = 1, Play = 2, Share = 3 };

inline constexpr std::array<Target, 4> kTargets = {Target::Comment, Target::Heart, Target::Play,
                                                    Target::Share};

/// Lowercase column name: "comment", "heart", "play", "share".
std::string_view target_name(Target t);
/// Display name: "Comment", "Heart", ...
std::string_view target_title(Target t);
Target parse_target(std::string_view name);

struct TargetValues {
  std::array<double, 4> values{};

  double& operator[](Target t) { return values[static_cast<std::size_t>(t)]; }
  double operator[](Target t) const { return values[static_cast<std::size_t>(t)]; }
  bool operator==(const TargetValues&) const = default;
};

// ---------------------------------------------------------------------------
// Tabular records

enum class MetaField { Duration = 0, FrameCount = 1, Fps = 2, Width = 3, Height = 4 };

inline constexpr std::array<MetaField, 5> kMetaFields = {MetaField::Duration, MetaField::FrameCount,
                                                         MetaField::Fps, MetaField::Width,
                                                         MetaField::Height};

/// CSV column name: "duration_s", "frame_count", "fps", "width", "height".
std::string_view meta_name(MetaField f);

struct Record {
  std::string video_id;
  std::string author_id;
  std::int64_t create_time = 0;  // unix seconds, UTC
  std::string caption;
  double author_follower_count = 0.0;
  double author_following_count = 0.0;
  double author_total_heart_count = 0.0;
  double author_total_video_count = 0.0;
  std::array<std::optional<double>, 5> meta{};  // indexed by MetaField; nullopt = missing
  std::optional<TargetValues> targets;

  std::optional<double>& meta_at(MetaField f) { return meta[static_cast<std::size_t>(f)]; }
  const std::optional<double>& meta_at(MetaField f) const { return meta[static_cast<std::size_t>(f)]; }

  bool operator==(const Record&) const = default;
};

struct RecordTable {
  std::vector<Record> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  bool has_targets() const;
  std::vector<std::string> video_ids() const;
  bool operator==(const RecordTable&) const = default;
};

/// Header columns, in order; `with_targets` appends the four target columns.
std::vector<std::string> tabular_header(bool with_targets);

RecordTable parse_tabular(std::string_view csv_text, bool has_targets);
RecordTable load_tabular(const std::filesystem::path& path, bool has_targets);
std::string format_tabular(const RecordTable& table);
void write_tabular(const RecordTable& table, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Embeddings

inline constexpr int kNumSources = 6;

/// Registry name for source ids 1..6 (VideoMAE, ViViT, TimeSformer, X-CLIP,
/// LLaVA-NeXT, InternVideo2).
std::string_view source_name(int source_id);
bool is_text_source(int source_id);

class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(int source_id, std::size_t dim);

  int source_id() const { return source_id_; }
  std::string_view source_name() const;
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }

  /// Throws DimMismatch on wrong length, NonFiniteValue, DuplicateVideoId.
  void add(std::string video_id, std::span<const double> vector);

  bool contains(const std::string& video_id) const { return index_.contains(video_id); }
  /// Empty span when absent.
  std::span<const double> find(const std::string& video_id) const;

  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  bool operator==(const EmbeddingSet& other) const {
    return source_id_ == other.source_id_ && dim_ == other.dim_ && ids_ == other.ids_ &&
           values_ == other.values_;
  }

 private:
  int source_id_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

EmbeddingSet parse_embeddings(std::string_view text);
EmbeddingSet load_embeddings(const std::filesystem::path& path);
std::string format_embeddings(const EmbeddingSet& set);
void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Bundle

/// Posting-hour buckets: sleeping [0, sleep_end), working [work_start,
/// work_end), leisure otherwise.
struct DaypartHours {
  int sleep_end = 7;
  int work_start = 9;
  int work_end = 17;

  void validate() const;
  bool operator==(const DaypartHours&) const = default;
};

struct Manifest {
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
  std::map<int, std::filesystem::path> embeddings;
  double max_missing_frac = 0.25;
  DaypartHours daypart;
};

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest directory when possible.
std::string format_manifest(const Manifest& manifest, const std::filesystem::path& base_dir);

struct SourceCoverage {
  int source_id = 0;
  std::vector<std::string> missing_train;
  std::vector<std::string> missing_test;
  double missing_frac = 0.0;  // over train and test ids together
};

struct DatasetBundle {
  RecordTable train;
  RecordTable test;
  std::map<int, EmbeddingSet> embeddings;
  std::filesystem::path manifest_path;
  Manifest manifest;
  std::map<int, SourceCoverage> coverage;

  std::vector<int> source_ids() const;
};

/// Computes per-source missing-id lists for the bundle's tables.
std::map<int, SourceCoverage> compute_coverage(const RecordTable& train, const RecordTable& test,
                                               const std::map<int, EmbeddingSet>& embeddings);

DatasetBundle validate_bundle(const std::filesystem::path& manifest_path);

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticOptions {
  std::uint64_t seed = 7;
  std::size_t n_train = 100;
  std::size_t n_test = 20;
  std::map<int, std::size_t> dims;  // source id -> dim; sources absent here are not generated
  double missing_meta_frac = 0.05;
};

/// Deterministic given the options. Targets are driven by a latent per-video
/// quality, author reach, duration and tag popularity, with lognormal noise.
DatasetBundle generate_synthetic(const SyntheticOptions& options);

/// Writes train.csv, test.csv, emb_<id>.txt and manifest.json into `dir` and
/// returns the manifest path.
std::filesystem::path write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);

}  // namespace popcast
