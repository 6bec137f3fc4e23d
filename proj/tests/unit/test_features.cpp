// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/features.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "popcast/error.hpp"
#include "popcast/rng.hpp"
#include "support/oracles.hpp"

namespace popcast {
namespace {

Record meta_row(std::string vid, std::string author, std::optional<double> duration) {
  Record r;
  r.video_id = std::move(vid);
  r.author_id = std::move(author);
  r.meta = {duration, 300.0, 30.0, 540.0, 960.0};
  return r;
}

TEST(Median, OddAndEvenCounts) {
  EXPECT_EQ(median({10, 30, 20}), 20.0);
  EXPECT_EQ(median({10, 20}), 15.0);
  EXPECT_EQ(median({7}), 7.0);
}

TEST(MedianStats, PerAuthorAndGlobal) {
  RecordTable t;
  t.rows = {meta_row("v1", "a1", 10), meta_row("v2", "a1", 30), meta_row("v3", "a1", 20),
            meta_row("v4", "a2", 10), meta_row("v5", "a2", 20), meta_row("v6", "a3", std::nullopt)};
  const auto s = fit_median_stats(t);
  EXPECT_EQ(s.per_author.at("a1")[0], 20.0);
  EXPECT_EQ(s.per_author.at("a2")[0], 15.0);
  EXPECT_FALSE(s.per_author.at("a3")[0].has_value());
  EXPECT_EQ(s.global[0], oracle::sort_median({10, 30, 20, 10, 20}));
}

TEST(MedianStats, SingleRow) {
  RecordTable t;
  t.rows = {meta_row("v1", "a1", 7)};
  const auto s = fit_median_stats(t);
  EXPECT_EQ(s.per_author.at("a1")[0], 7.0);
  EXPECT_EQ(s.global[0], 7.0);
}

TEST(MedianStats, AllMissingFieldRejected) {
  RecordTable t;
  t.rows = {meta_row("v1", "a1", std::nullopt)};
  EXPECT_THROW(fit_median_stats(t), Error);
}

TEST(Impute, AuthorThenGlobalFallback) {
  RecordTable train;
  train.rows = {meta_row("v1", "a1", 10), meta_row("v2", "a1", 30), meta_row("v3", "a1", 20),
                meta_row("v4", "a2", 100)};
  const auto stats = fit_median_stats(train);

  RecordTable q;
  q.rows = {meta_row("q1", "a1", std::nullopt), meta_row("q2", "unseen", 5)};
  q.rows[1].meta_at(MetaField::Fps).reset();
  const auto out = impute_video_meta(q, stats);
  EXPECT_EQ(out.rows[0].meta_at(MetaField::Duration), 20.0);
  EXPECT_EQ(out.rows[1].meta_at(MetaField::Fps), 30.0);
  EXPECT_EQ(out.rows[1].meta_at(MetaField::Duration), 5.0);
}

TEST(Impute, CompleteRowUnchanged) {
  RecordTable t;
  t.rows = {meta_row("v1", "a1", 12)};
  EXPECT_EQ(impute_video_meta(t, fit_median_stats(t)), t);
}

TEST(TimeFeatures, PostAgeNormalisation) {
  EXPECT_EQ(derive_time_features(100, 100, 200).post_age_norm, 0.0);
  EXPECT_EQ(derive_time_features(150, 100, 200).post_age_norm, 0.5);
  EXPECT_EQ(derive_time_features(250, 100, 200).post_age_norm, 1.5);
  EXPECT_THROW(derive_time_features(100, 100, 100), Error);
}

TEST(TimeFeatures, CalendarFieldsInUtc) {
  // 2023-11-14 22:13:20 UTC.
  const auto tf = derive_time_features(1700000000, 0, 1700000001);
  EXPECT_EQ(tf.year, 2023);
  EXPECT_EQ(tf.month, 11);
  EXPECT_EQ(tf.day, 14);
  EXPECT_EQ(tf.hour, 22);
  EXPECT_EQ(tf.daypart, Daypart::Leisure);
  EXPECT_FALSE(tf.is_us_holiday);
}

TEST(Daypart, DefaultBuckets) {
  EXPECT_EQ(classify_daypart(3), Daypart::Sleeping);
  EXPECT_EQ(classify_daypart(10), Daypart::Working);
  EXPECT_EQ(classify_daypart(20), Daypart::Leisure);
  EXPECT_EQ(classify_daypart(7), Daypart::Leisure);
  EXPECT_EQ(classify_daypart(17), Daypart::Leisure);
  EXPECT_EQ(daypart_name(Daypart::Working), "working");
}

TEST(Holidays, FixedAndFloatingDates) {
  EXPECT_TRUE(is_us_holiday({2022, 7, 4}));
  EXPECT_FALSE(is_us_holiday({2022, 7, 5}));
  EXPECT_TRUE(is_us_holiday({2022, 11, 24}));
  EXPECT_FALSE(is_us_holiday({2022, 11, 17}));
  EXPECT_TRUE(is_us_holiday({2023, 5, 29}));  // last Monday of May
  EXPECT_TRUE(is_us_holiday({2024, 1, 15}));  // third Monday of January
  EXPECT_TRUE(is_us_holiday({2022, 12, 25}));
}

TEST(Tags, TokenizerRules) {
  auto t = tokenize_tags("");
  EXPECT_TRUE(t.hashtags.empty());
  EXPECT_TRUE(t.mentions.empty());

  t = tokenize_tags("Go #Fun #fun @Bob_1 now");
  EXPECT_EQ(t.hashtags, (std::vector<std::string>{"fun", "fun"}));
  EXPECT_EQ(t.mentions, (std::vector<std::string>{"bob_1"}));

  t = tokenize_tags("mail a@b #x9!");
  EXPECT_EQ(t.hashtags, (std::vector<std::string>{"x9"}));
  EXPECT_TRUE(t.mentions.empty());

  t = tokenize_tags("@john.doe ##a x#y");
  EXPECT_EQ(t.mentions, (std::vector<std::string>{"john.doe"}));
  EXPECT_EQ(t.hashtags, (std::vector<std::string>{"a"}));
}

TEST(Tags, FrequencyTable) {
  const std::vector<std::string> corpus = {"#a #a", "#a @b"};
  const auto f = fit_tag_frequency(corpus);
  EXPECT_EQ(f.hashtag_freq, (std::map<std::string, std::int64_t>{{"a", 3}}));
  EXPECT_EQ(f.mention_freq, (std::map<std::string, std::int64_t>{{"b", 1}}));
  EXPECT_EQ(f.corpus_size, 2u);

  EXPECT_EQ(fit_tag_frequency({}).corpus_size, 0u);
  const std::vector<std::string> plain = {"no tags here"};
  const auto g = fit_tag_frequency(plain);
  EXPECT_TRUE(g.hashtag_freq.empty());
  EXPECT_TRUE(g.mention_freq.empty());
  EXPECT_EQ(g.corpus_size, 1u);
}

TEST(Tags, FrequencyMatchesRegexRecount) {
  const std::vector<std::string> pieces = {"#Fun", "@a.b", "x@y", "##z", "#a#b", "@q.#r", "word", "!", "#_"};
  for (int inst = 0; inst < 200; ++inst) {
    Rng rng(static_cast<std::uint64_t>(inst));
    std::vector<std::string> corpus(rng.below(6));
    for (auto& c : corpus) {
      for (std::size_t k = rng.below(6); k > 0; --k) c += pieces[rng.below(pieces.size())] + (rng.uniform() < 0.7 ? " " : "");
    }
    const auto got = fit_tag_frequency(corpus);
    const auto want = oracle::recount_tags(corpus);
    ASSERT_EQ(got.hashtag_freq, want.hashtags) << inst;
    ASSERT_EQ(got.mention_freq, want.mentions) << inst;
  }
}

TEST(Tags, CaptionFeatures) {
  FrequencyTable f;
  f.hashtag_freq = {{"a", 10}};
  EXPECT_EQ(tag_features("#a and #a", f), (TagFeatures{2, 0, 20, 0}));
  EXPECT_EQ(tag_features("@x", FrequencyTable{}), (TagFeatures{0, 1, 0, 0}));
  EXPECT_EQ(tag_features("", f), (TagFeatures{}));
}

TEST(Transforms, LogAndInverse) {
  EXPECT_EQ(log1p_checked(0.0), 0.0);
  EXPECT_NEAR(log1p_checked(std::exp(1.0) - 1.0), 1.0, 1e-15);
  EXPECT_NEAR(expm1_checked(log1p_checked(12345.678)), 12345.678, 1e-6);
  EXPECT_THROW(log1p_checked(-1.0), Error);
  EXPECT_THROW(expm1_checked(-0.5), Error);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v = {100, 1, 3, 2, 4};
  EXPECT_EQ(quantile_linear(v, 0.25), 2.0);
  EXPECT_EQ(quantile_linear(v, 0.75), 4.0);
  const std::vector<double> w = {1, 2, 3, 4};
  EXPECT_EQ(quantile_linear(w, 0.25), 1.75);
}

TEST(Iqr, DocumentedCases) {
  const std::vector<double> a = {1, 2, 3, 4, 100};
  EXPECT_EQ(iqr_filter(a, 1.5), (std::vector<bool>{true, true, true, true, false}));
  const std::vector<double> b = {5, 5, 5, 5};
  EXPECT_EQ(iqr_filter(b), (std::vector<bool>(4, true)));
  const std::vector<double> c = {1};
  EXPECT_EQ(iqr_filter(c), (std::vector<bool>{true}));
}

TEST(Iqr, MatchesQuantileOracle) {
  for (int inst = 0; inst < 300; ++inst) {
    Rng rng(1000 + static_cast<std::uint64_t>(inst));
    std::vector<double> v(1 + rng.below(50));
    for (auto& x : v) x = std::exp(1.5 * rng.normal());
    const double k = rng.uniform(0.2, 3.0);
    ASSERT_EQ(iqr_filter(v, k), oracle::iqr_keep(v, k)) << inst;
  }
}

TEST(Iqr, TargetsDropRowWhenAnyFlagged) {
  RecordTable t;
  for (int i = 0; i < 8; ++i) {
    Record r = meta_row("v" + std::to_string(i), "a", 1);
    r.targets = TargetValues{{10, 10, 10, 10}};
    t.rows.push_back(r);
  }
  (*t.rows[3].targets)[Target::Share] = 1e9;
  const auto rep = iqr_filter_targets(t);
  EXPECT_FALSE(rep.keep[3]);
  EXPECT_TRUE(rep.flagged[static_cast<std::size_t>(Target::Share)][3]);
  EXPECT_FALSE(rep.flagged[static_cast<std::size_t>(Target::Play)][3]);
  for (std::size_t i = 0; i < 8; ++i) {
    if (i != 3) {
      EXPECT_TRUE(rep.keep[i]);
    }
  }
}

TEST(Assembly, CanonicalColumnsAndImputedCell) {
  const auto bundle = generate_synthetic(SyntheticOptions{});
  const auto fitted = fit_features(bundle.train, bundle.test);
  const auto m = assemble_feature_matrix(bundle.train, fitted);
  EXPECT_EQ(m.cols(), 22u);
  EXPECT_EQ(m.names, canonical_feature_names());
  EXPECT_EQ(m.names.front(), "log_author_follower_count");
  EXPECT_EQ(m, assemble_feature_matrix(bundle.train, fitted));

  const auto dur = *m.column_index("duration_s");
  std::size_t checked = 0;
  for (std::size_t i = 0; i < bundle.train.size(); ++i) {
    const auto& r = bundle.train.rows[i];
    if (r.meta_at(MetaField::Duration)) continue;
    const auto it = fitted.medians.per_author.find(r.author_id);
    const double want = it != fitted.medians.per_author.end() && it->second[0] ? *it->second[0]
                                                                                : fitted.medians.global[0];
    EXPECT_EQ(m.at(i, dur), want);
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(Assembly, CorpusChoice) {
  const auto bundle = generate_synthetic(SyntheticOptions{});
  const auto both = fit_features(bundle.train, bundle.test);
  const auto train_only = fit_features(bundle.train, bundle.test, {DaypartHours{}, FrequencyCorpus::TrainOnly});
  EXPECT_EQ(both.frequencies.corpus_size, bundle.train.size() + bundle.test.size());
  EXPECT_EQ(train_only.frequencies.corpus_size, bundle.train.size());
}

}  // namespace
}  // namespace popcast
