// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tabular feature engineering: per-author median imputation of video meta,
// calendar features, hashtag/mention frequency features, log1p transforms and
// IQR filtering of training targets.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "popcast/feature_matrix.hpp"
#include "popcast/ingest.hpp"

namespace popcast {

// ---------------------------------------------------------------------------
// Median imputation

using MetaValues = std::array<std::optional<double>, 5>;

struct MedianStats {
  std::map<std::string, MetaValues> per_author;  // only fields with >=1 observed value are set
  std::array<double, 5> global{};
};

/// Midpoint median of a non-empty sample (mean of the two central order
/// statistics for even counts).
double median(std::vector<double> values);

/// Throws AllMissing when a field has no observed training value.
MedianStats fit_median_stats(const RecordTable& train);

/// Fills missing meta from the author's median, then the global median.
RecordTable impute_video_meta(const RecordTable& table, const MedianStats& stats);

// ---------------------------------------------------------------------------
// Calendar

struct CivilDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;
  bool operator==(const CivilDate&) const = default;
};

enum class Daypart { Working, Leisure, Sleeping };

struct TimeFeatures {
  int year = 0;
  int month = 0;
  int day = 0;
  int hour = 0;
  bool is_us_holiday = false;
  Daypart daypart = Daypart::Leisure;
  double post_age_norm = 0.0;  // 0 at the earliest training post, 1 at the latest, unclamped
};

CivilDate civil_date_utc(std::int64_t unix_seconds);
int hour_utc(std::int64_t unix_seconds);

Daypart classify_daypart(int hour, const DaypartHours& hours = {});
std::string_view daypart_name(Daypart d);

/// Federal holidays on their nominal dates (no observed-day shifting).
bool is_us_holiday(const CivilDate& date);

TimeFeatures derive_time_features(std::int64_t create_time, std::int64_t train_min, std::int64_t train_max,
                                  const DaypartHours& hours = {});

// ---------------------------------------------------------------------------
// Hashtags and mentions

struct TagTokens {
  std::vector<std::string> hashtags;
  std::vector<std::string> mentions;
};

/// `#` + run of [A-Za-z0-9_], `@` + run of [A-Za-z0-9_.]; the marker must
/// start the string or follow a character outside [A-Za-z0-9_]. Lowercased,
/// duplicates kept, in order of appearance.
TagTokens tokenize_tags(std::string_view caption);

struct FrequencyTable {
  std::map<std::string, std::int64_t> hashtag_freq;
  std::map<std::string, std::int64_t> mention_freq;
  std::size_t corpus_size = 0;

  bool operator==(const FrequencyTable&) const = default;
};

/// Total occurrence counts over the corpus.
FrequencyTable fit_tag_frequency(std::span<const std::string> captions);

struct TagFeatures {
  double hashtag_count = 0.0;
  double mention_count = 0.0;
  double hashtag_freq_sum = 0.0;
  double mention_freq_sum = 0.0;
  bool operator==(const TagFeatures&) const = default;
};

TagFeatures tag_features(std::string_view caption, const FrequencyTable& freq);

// ---------------------------------------------------------------------------
// Transforms and filtering

/// ln(1 + x); DomainError for x < 0.
double log1p_checked(double x);
/// e^y - 1; DomainError for y < 0.
double expm1_checked(double y);

/// Linear interpolation between order statistics at p * (n - 1).
/// `values` need not be sorted.
double quantile_linear(std::span<const double> values, double p);

/// Keep mask: value within [Q1 - k*IQR, Q3 + k*IQR].
std::vector<bool> iqr_filter(std::span<const double> values, double k = 1.5);

struct IqrReport {
  std::vector<bool> keep;                // per row, false when any target is flagged
  std::array<std::vector<bool>, 4> flagged;  // per target, per row
};

/// Applies iqr_filter to each target (on the log1p scale) of a table with
/// targets. A row is dropped when any of its targets is flagged.
IqrReport iqr_filter_targets(const RecordTable& train, double k = 1.5);

/// log1p of one target column.
std::vector<double> transformed_targets(const RecordTable& table, Target target);

// ---------------------------------------------------------------------------
// Assembly

enum class FrequencyCorpus { TrainAndTest, TrainOnly };

struct FeatureOptions {
  DaypartHours daypart;
  FrequencyCorpus corpus = FrequencyCorpus::TrainAndTest;
};

struct TimeRange {
  std::int64_t min = 0;
  std::int64_t max = 0;
};

/// Everything fitted on training data that feature assembly needs.
struct FittedFeatures {
  MedianStats medians;
  FrequencyTable frequencies;
  TimeRange time_range;
  DaypartHours daypart;
};

FittedFeatures fit_features(const RecordTable& train, const RecordTable& test, const FeatureOptions& options = {});

/// The 22 canonical columns, in order.
const std::vector<std::string>& canonical_feature_names();

FeatureMatrix assemble_feature_matrix(const RecordTable& table, const FittedFeatures& fitted);

std::string format_median_stats(const MedianStats& stats);
std::string format_frequency_table(const FrequencyTable& freq);

}  // namespace popcast
