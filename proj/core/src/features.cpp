// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/features.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "popcast/error.hpp"

namespace popcast {

namespace chr = std::chrono;

// ---------------------------------------------------------------------------
// Median imputation

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyData, "median of empty sample");
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return (lower + upper) / 2.0;
}

MedianStats fit_median_stats(const RecordTable& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyData, "training table is empty");
  MedianStats stats;
  std::map<std::string, std::array<std::vector<double>, 5>> by_author;
  std::array<std::vector<double>, 5> all;
  for (const auto& r : train.rows) {
    auto& slot = by_author[r.author_id];
    for (std::size_t f = 0; f < 5; ++f) {
      if (r.meta[f]) {
        slot[f].push_back(*r.meta[f]);
        all[f].push_back(*r.meta[f]);
      }
    }
  }
  for (std::size_t f = 0; f < 5; ++f) {
    if (all[f].empty()) throw Error(ErrorCode::AllMissing, std::string(meta_name(kMetaFields[f])));
    stats.global[f] = median(std::move(all[f]));
  }
  for (auto& [author, fields] : by_author) {
    MetaValues medians;
    bool any = false;
    for (std::size_t f = 0; f < 5; ++f) {
      if (!fields[f].empty()) {
        medians[f] = median(std::move(fields[f]));
        any = true;
      }
    }
    if (any) stats.per_author.emplace(author, medians);
  }
  return stats;
}

RecordTable impute_video_meta(const RecordTable& table, const MedianStats& stats) {
  RecordTable out = table;
  for (auto& r : out.rows) {
    const auto it = stats.per_author.find(r.author_id);
    for (std::size_t f = 0; f < 5; ++f) {
      if (r.meta[f]) continue;
      if (it != stats.per_author.end() && it->second[f]) {
        r.meta[f] = *it->second[f];
      } else {
        r.meta[f] = stats.global[f];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calendar

CivilDate civil_date_utc(std::int64_t unix_seconds) {
  const auto tp = chr::sys_seconds{chr::seconds{unix_seconds}};
  const chr::year_month_day ymd{chr::floor<chr::days>(tp)};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day())};
}

int hour_utc(std::int64_t unix_seconds) {
  const auto tp = chr::sys_seconds{chr::seconds{unix_seconds}};
  const auto since_midnight = tp - chr::floor<chr::days>(tp);
  return static_cast<int>(chr::duration_cast<chr::hours>(since_midnight).count());
}

Daypart classify_daypart(int hour, const DaypartHours& hours) {
  if (hour < 0 || hour > 23) throw Error(ErrorCode::InvalidArgument, "hour out of range: " + std::to_string(hour));
  if (hour < hours.sleep_end) return Daypart::Sleeping;
  if (hour >= hours.work_start && hour < hours.work_end) return Daypart::Working;
  return Daypart::Leisure;
}

std::string_view daypart_name(Daypart d) {
  switch (d) {
    case Daypart::Working: return "working";
    case Daypart::Leisure: return "leisure";
    case Daypart::Sleeping: return "sleeping";
  }
  return "leisure";
}

namespace {

bool is_nth_weekday(const chr::year_month_day& ymd, chr::weekday wd, unsigned n) {
  const chr::year_month_weekday target{ymd.year() / ymd.month() / wd[n]};
  return chr::sys_days{target} == chr::sys_days{ymd};
}

bool is_last_weekday(const chr::year_month_day& ymd, chr::weekday wd) {
  const chr::year_month_weekday_last target{ymd.year(), ymd.month(), chr::weekday_last{wd}};
  return chr::sys_days{target} == chr::sys_days{ymd};
}

}  // namespace

bool is_us_holiday(const CivilDate& date) {
  const chr::year_month_day ymd{chr::year{date.year}, chr::month{date.month}, chr::day{date.day}};
  if (!ymd.ok()) throw Error(ErrorCode::InvalidArgument, "invalid civil date");
  const unsigned m = date.month;
  const unsigned d = date.day;

  if ((m == 1 && d == 1) || (m == 6 && d == 19) || (m == 7 && d == 4) || (m == 11 && d == 11) ||
      (m == 12 && d == 25)) {
    return true;
  }
  switch (m) {
    case 1: return is_nth_weekday(ymd, chr::Monday, 3);    // Martin Luther King Jr. Day
    case 2: return is_nth_weekday(ymd, chr::Monday, 3);    // Presidents' Day
    case 5: return is_last_weekday(ymd, chr::Monday);      // Memorial Day
    case 9: return is_nth_weekday(ymd, chr::Monday, 1);    // Labor Day
    case 10: return is_nth_weekday(ymd, chr::Monday, 2);   // Columbus Day
    case 11: return is_nth_weekday(ymd, chr::Thursday, 4); // Thanksgiving
    default: return false;
  }
}

TimeFeatures derive_time_features(std::int64_t create_time, std::int64_t train_min, std::int64_t train_max,
                                  const DaypartHours& hours) {
  if (train_min >= train_max) throw Error(ErrorCode::DegenerateRange, "training timestamps span no time");
  TimeFeatures tf;
  const auto date = civil_date_utc(create_time);
  tf.year = date.year;
  tf.month = static_cast<int>(date.month);
  tf.day = static_cast<int>(date.day);
  tf.hour = hour_utc(create_time);
  tf.is_us_holiday = is_us_holiday(date);
  tf.daypart = classify_daypart(tf.hour, hours);
  tf.post_age_norm = static_cast<double>(create_time - train_min) / static_cast<double>(train_max - train_min);
  return tf;
}

// ---------------------------------------------------------------------------
// Hashtags and mentions

namespace {

bool is_word_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

TagTokens tokenize_tags(std::string_view caption) {
  TagTokens out;
  std::size_t i = 0;
  while (i < caption.size()) {
    const char c = caption[i];
    const bool marker = c == '#' || c == '@';
    if (!marker || (i > 0 && is_word_char(caption[i - 1]))) {
      ++i;
      continue;
    }
    const bool mention = c == '@';
    std::size_t j = i + 1;
    while (j < caption.size() && (is_word_char(caption[j]) || (mention && caption[j] == '.'))) ++j;
    if (j == i + 1) {
      ++i;
      continue;
    }
    std::string token;
    token.reserve(j - i - 1);
    for (std::size_t k = i + 1; k < j; ++k) token.push_back(ascii_lower(caption[k]));
    (mention ? out.mentions : out.hashtags).push_back(std::move(token));
    i = j;
  }
  return out;
}

FrequencyTable fit_tag_frequency(std::span<const std::string> captions) {
  FrequencyTable table;
  table.corpus_size = captions.size();
  for (const auto& caption : captions) {
    auto tokens = tokenize_tags(caption);
    for (auto& t : tokens.hashtags) ++table.hashtag_freq[std::move(t)];
    for (auto& t : tokens.mentions) ++table.mention_freq[std::move(t)];
  }
  return table;
}

TagFeatures tag_features(std::string_view caption, const FrequencyTable& freq) {
  const auto tokens = tokenize_tags(caption);
  TagFeatures f;
  f.hashtag_count = static_cast<double>(tokens.hashtags.size());
  f.mention_count = static_cast<double>(tokens.mentions.size());
  for (const auto& t : tokens.hashtags) {
    if (auto it = freq.hashtag_freq.find(t); it != freq.hashtag_freq.end()) {
      f.hashtag_freq_sum += static_cast<double>(it->second);
    }
  }
  for (const auto& t : tokens.mentions) {
    if (auto it = freq.mention_freq.find(t); it != freq.mention_freq.end()) {
      f.mention_freq_sum += static_cast<double>(it->second);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Transforms and filtering

double log1p_checked(double x) {
  if (!(x >= 0.0)) throw Error(ErrorCode::DomainError, "log1p of negative value");
  return std::log1p(x);
}

double expm1_checked(double y) {
  if (!(y >= 0.0)) throw Error(ErrorCode::DomainError, "expm1 of negative value");
  return std::expm1(y);
}

double quantile_linear(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::EmptyData, "quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level outside [0, 1]");
  std::vector<double> work(values.begin(), values.end());
  const double pos = p * static_cast<double>(work.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  const auto lo_it = work.begin() + static_cast<std::ptrdiff_t>(lo);
  std::nth_element(work.begin(), lo_it, work.end());
  const double a = *lo_it;
  if (lo + 1 >= work.size()) return a;
  const double b = *std::min_element(lo_it + 1, work.end());
  return a + frac * (b - a);
}

std::vector<bool> iqr_filter(std::span<const double> values, double k) {
  if (values.empty()) throw Error(ErrorCode::EmptyData, "iqr_filter of empty sample");
  if (!(k > 0.0)) throw Error(ErrorCode::InvalidArgument, "IQR multiplier must be positive");
  const double q1 = quantile_linear(values, 0.25);
  const double q3 = quantile_linear(values, 0.75);
  const double iqr = q3 - q1;
  const double lo = q1 - k * iqr;
  const double hi = q3 + k * iqr;
  std::vector<bool> keep(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) keep[i] = values[i] >= lo && values[i] <= hi;
  return keep;
}

std::vector<double> transformed_targets(const RecordTable& table, Target target) {
  std::vector<double> y;
  y.reserve(table.size());
  for (const auto& r : table.rows) {
    if (!r.targets) throw Error(ErrorCode::MissingTarget, r.video_id);
    y.push_back(log1p_checked((*r.targets)[target]));
  }
  return y;
}

IqrReport iqr_filter_targets(const RecordTable& train, double k) {
  IqrReport report;
  report.keep.assign(train.size(), true);
  if (train.empty()) return report;
  for (Target t : kTargets) {
    const auto y = transformed_targets(train, t);
    const auto keep = iqr_filter(y, k);
    auto& flagged = report.flagged[static_cast<std::size_t>(t)];
    flagged.resize(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      flagged[i] = !keep[i];
      if (!keep[i]) report.keep[i] = false;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Assembly

FittedFeatures fit_features(const RecordTable& train, const RecordTable& test, const FeatureOptions& options) {
  if (train.empty()) throw Error(ErrorCode::EmptyData, "training table is empty");
  options.daypart.validate();
  FittedFeatures fitted;
  fitted.daypart = options.daypart;
  fitted.medians = fit_median_stats(train);

  std::vector<std::string> corpus;
  for (const auto& r : train.rows) corpus.push_back(r.caption);
  if (options.corpus == FrequencyCorpus::TrainAndTest) {
    for (const auto& r : test.rows) corpus.push_back(r.caption);
  }
  fitted.frequencies = fit_tag_frequency(corpus);

  auto [lo, hi] = std::minmax_element(train.rows.begin(), train.rows.end(),
                                      [](const Record& a, const Record& b) { return a.create_time < b.create_time; });
  fitted.time_range = {lo->create_time, hi->create_time};
  if (fitted.time_range.min >= fitted.time_range.max) {
    throw Error(ErrorCode::DegenerateRange, "all training videos share one timestamp");
  }
  return fitted;
}

const std::vector<std::string>& canonical_feature_names() {
  static const std::vector<std::string> names = {
      "log_author_follower_count", "log_author_following_count", "log_author_total_heart_count",
      "log_author_total_video_count", "duration_s", "frame_count", "fps", "width", "height", "year", "month", "day",
      "hour", "is_us_holiday", "daypart_working", "daypart_leisure", "daypart_sleeping", "post_age_norm",
      "hashtag_count", "mention_count", "hashtag_freq_sum", "mention_freq_sum"};
  return names;
}

FeatureMatrix assemble_feature_matrix(const RecordTable& table, const FittedFeatures& fitted) {
  const RecordTable imputed = impute_video_meta(table, fitted.medians);
  FeatureMatrix m(canonical_feature_names(), imputed.size());
  for (std::size_t r = 0; r < imputed.size(); ++r) {
    const Record& rec = imputed.rows[r];
    m.row_ids[r] = rec.video_id;
    auto row = m.row(r);
    std::size_t c = 0;
    row[c++] = log1p_checked(rec.author_follower_count);
    row[c++] = log1p_checked(rec.author_following_count);
    row[c++] = log1p_checked(rec.author_total_heart_count);
    row[c++] = log1p_checked(rec.author_total_video_count);
    for (const auto& v : rec.meta) row[c++] = *v;

    const auto tf = derive_time_features(rec.create_time, fitted.time_range.min, fitted.time_range.max, fitted.daypart);
    row[c++] = tf.year;
    row[c++] = tf.month;
    row[c++] = tf.day;
    row[c++] = tf.hour;
    row[c++] = tf.is_us_holiday ? 1.0 : 0.0;
    row[c++] = tf.daypart == Daypart::Working ? 1.0 : 0.0;
    row[c++] = tf.daypart == Daypart::Leisure ? 1.0 : 0.0;
    row[c++] = tf.daypart == Daypart::Sleeping ? 1.0 : 0.0;
    row[c++] = tf.post_age_norm;

    const auto tags = tag_features(rec.caption, fitted.frequencies);
    row[c++] = tags.hashtag_count;
    row[c++] = tags.mention_count;
    row[c++] = tags.hashtag_freq_sum;
    row[c++] = tags.mention_freq_sum;
  }
  return m;
}

std::string format_median_stats(const MedianStats& stats) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json global;
  for (std::size_t f = 0; f < 5; ++f) global[std::string(meta_name(kMetaFields[f]))] = stats.global[f];
  j["global"] = global;
  nlohmann::ordered_json authors = nlohmann::ordered_json::object();
  for (const auto& [author, values] : stats.per_author) {
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (std::size_t f = 0; f < 5; ++f) {
      if (values[f]) a[std::string(meta_name(kMetaFields[f]))] = *values[f];
    }
    authors[author] = a;
  }
  j["per_author"] = authors;
  return j.dump(2) + "\n";
}

std::string format_frequency_table(const FrequencyTable& freq) {
  nlohmann::ordered_json j;
  j["corpus_size"] = freq.corpus_size;
  nlohmann::ordered_json tags = nlohmann::ordered_json::object();
  for (const auto& [k, v] : freq.hashtag_freq) tags[k] = v;
  nlohmann::ordered_json mentions = nlohmann::ordered_json::object();
  for (const auto& [k, v] : freq.mention_freq) mentions[k] = v;
  j["hashtags"] = tags;
  j["mentions"] = mentions;
  return j.dump(2) + "\n";
}

}  // namespace popcast
