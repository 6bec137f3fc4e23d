// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "popcast/error.hpp"
#include "popcast/ingest.hpp"
#include "popcast/rng.hpp"
#include "popcast/text_io.hpp"

namespace popcast {

namespace {

constexpr std::int64_t kEpochStart = 1640995200;  // 2022-01-01T00:00:00Z
constexpr std::int64_t kSpanSeconds = 540LL * 86400;

constexpr std::size_t kNumHashtags = 30;
constexpr std::size_t kNumHandles = 15;

constexpr std::array<std::string_view, 12> kWords = {"fun",    "daily", "look",  "wow",   "vibes",  "morning",
                                                     "recipe", "dance", "travel", "cat",  "weekend", "story"};

// How strongly each source's vectors encode the latent quality.
constexpr std::array<double, 6> kSourceSignal = {0.6, 0.7, 0.8, 1.2, 0.9, 0.7};

struct Author {
  std::string id;
  double follower = 0.0;
  double following = 0.0;
  double total_heart = 0.0;
  double total_video = 0.0;
};

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

// Zipf(1) rank draw over n items by inverse CDF on the harmonic weights.
std::size_t zipf_draw(Rng& rng, std::size_t n) {
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) total += 1.0 / static_cast<double>(r + 1);
  double u = rng.uniform() * total;
  for (std::size_t r = 0; r < n; ++r) {
    u -= 1.0 / static_cast<double>(r + 1);
    if (u < 0.0) return r;
  }
  return n - 1;
}

struct Latent {
  double quality = 0.0;
  double reach = 0.0;
};

}  // namespace

DatasetBundle generate_synthetic(const SyntheticOptions& options) {
  if (options.n_train < 10) throw Error(ErrorCode::InvalidArgument, "n_train must be at least 10");
  for (const auto& [id, dim] : options.dims) {
    (void)source_name(id);
    if (dim == 0) throw Error(ErrorCode::InvalidArgument, "embedding dims must be positive");
  }

  Rng author_rng(derive_seed(options.seed, "authors"));
  const std::size_t n_authors = std::max<std::size_t>(3, options.n_train / 6 + 1);
  std::vector<Author> authors;
  for (std::size_t a = 0; a < n_authors; ++a) {
    Author au;
    au.id = numbered("a", a, 4);
    au.follower = std::round(std::exp(8.0 + 1.5 * author_rng.normal()));
    au.following = std::round(std::exp(5.0 + author_rng.normal()));
    au.total_heart = std::round(au.follower * std::exp(1.5 + 0.5 * author_rng.normal()));
    au.total_video = std::round(std::exp(4.0 + 0.8 * author_rng.normal())) + 1.0;
    authors.push_back(std::move(au));
  }

  Rng rng(derive_seed(options.seed, "records"));
  const std::size_t n_total = options.n_train + options.n_test;
  std::vector<Latent> latents(n_total);
  DatasetBundle bundle;

  for (std::size_t i = 0; i < n_total; ++i) {
    Record rec;
    rec.video_id = numbered("v", i, 6);
    const Author& au = authors[rng.below(authors.size())];
    rec.author_id = au.id;
    rec.author_follower_count = au.follower;
    rec.author_following_count = au.following;
    rec.author_total_heart_count = au.total_heart;
    rec.author_total_video_count = au.total_video;
    rec.create_time = kEpochStart + static_cast<std::int64_t>(rng.below(static_cast<std::size_t>(kSpanSeconds)));

    std::string caption;
    double tag_pop = 0.0;
    const std::size_t n_words = 2 + rng.below(4);
    for (std::size_t w = 0; w < n_words; ++w) {
      if (!caption.empty()) caption += ' ';
      caption += kWords[rng.below(kWords.size())];
    }
    const std::size_t n_tags = rng.below(4);
    for (std::size_t t = 0; t < n_tags; ++t) {
      const std::size_t rank = zipf_draw(rng, kNumHashtags);
      tag_pop += 1.0 / static_cast<double>(rank + 1);
      std::string tag = numbered("tag", rank, 2);
      if (rng.uniform() < 0.2) tag[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(tag[0])));
      caption += " #" + tag;
    }
    const std::size_t n_mentions = rng.below(3);
    for (std::size_t t = 0; t < n_mentions; ++t) {
      caption += " @" + numbered("user", zipf_draw(rng, kNumHandles), 2);
    }
    if (rng.uniform() < 0.1) caption += ", \"quoted\" bit";
    rec.caption = std::move(caption);

    static constexpr std::array<double, 4> kFps = {24.0, 25.0, 30.0, 60.0};
    static constexpr std::array<std::array<double, 2>, 3> kSizes = {{{540, 960}, {720, 1280}, {1080, 1920}}};
    const double duration = std::round(rng.uniform(5.0, 60.0) * 1000.0) / 1000.0;
    const double fps = kFps[rng.below(kFps.size())];
    const auto& size = kSizes[rng.below(kSizes.size())];
    rec.meta_at(MetaField::Duration) = duration;
    rec.meta_at(MetaField::FrameCount) = std::round(duration * fps);
    rec.meta_at(MetaField::Fps) = fps;
    rec.meta_at(MetaField::Width) = size[0];
    rec.meta_at(MetaField::Height) = size[1];
    for (auto& m : rec.meta) {
      if (rng.uniform() < options.missing_meta_frac) m.reset();
    }

    const double quality = rng.normal();
    const double reach = std::log1p(au.follower);
    latents[i] = {quality, reach};
    const double age = static_cast<double>(kEpochStart + kSpanSeconds - rec.create_time) / static_cast<double>(kSpanSeconds);
    const double log_play = 2.5 + 0.45 * reach + 0.02 * duration + 0.9 * quality + 0.6 * tag_pop + 0.5 * age +
                            0.35 * rng.normal();
    TargetValues tv;
    tv[Target::Play] = std::round(std::exp(log_play)) + 1.0;
    tv[Target::Heart] = std::round(tv[Target::Play] * std::exp(-2.2 + 0.3 * quality + 0.3 * rng.normal())) + 1.0;
    tv[Target::Comment] = std::round(tv[Target::Play] * std::exp(-5.0 + 0.4 * quality + 0.4 * rng.normal())) + 1.0;
    tv[Target::Share] = std::round(tv[Target::Play] * std::exp(-5.5 + 0.5 * quality + 0.5 * rng.normal())) + 1.0;

    if (i < options.n_train) {
      rec.targets = tv;
      bundle.train.rows.push_back(std::move(rec));
    } else {
      bundle.test.rows.push_back(std::move(rec));
    }
  }

  for (const auto& [id, dim] : options.dims) {
    Rng erng(derive_seed(options.seed, "embeddings/" + std::to_string(id)));
    std::vector<double> direction(dim);
    std::vector<double> reach_dir(dim);
    double norm = 0.0;
    for (auto& d : direction) {
      d = erng.normal();
      norm += d * d;
    }
    norm = std::sqrt(norm);
    for (auto& d : direction) d /= norm;
    for (auto& d : reach_dir) d = erng.normal() / std::sqrt(static_cast<double>(dim));

    const double signal = kSourceSignal[static_cast<std::size_t>(id - 1)] * std::sqrt(static_cast<double>(dim));
    EmbeddingSet set(id, dim);
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < n_total; ++i) {
      const bool missing = erng.uniform() < 0.02;
      for (std::size_t j = 0; j < dim; ++j) {
        v[j] = signal * latents[i].quality * direction[j] + 0.3 * (latents[i].reach - 8.0) * reach_dir[j] +
               erng.normal();
      }
      if (missing) continue;
      set.add(numbered("v", i, 6), v);
    }
    bundle.embeddings.emplace(id, std::move(set));
    bundle.manifest.embeddings[id] = "emb_" + std::to_string(id) + ".txt";
  }
  bundle.manifest.train_csv = "train.csv";
  bundle.manifest.test_csv = "test.csv";
  bundle.coverage = compute_coverage(bundle.train, bundle.test, bundle.embeddings);
  return bundle;
}

std::filesystem::path write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Manifest m = bundle.manifest;
  m.train_csv = dir / "train.csv";
  m.test_csv = dir / "test.csv";
  write_tabular(bundle.train, m.train_csv);
  write_tabular(bundle.test, m.test_csv);
  m.embeddings.clear();
  for (const auto& [id, set] : bundle.embeddings) {
    const auto path = dir / ("emb_" + std::to_string(id) + ".txt");
    write_embeddings(set, path);
    m.embeddings[id] = path;
  }
  const auto manifest_path = dir / "manifest.json";
  write_file_atomic(manifest_path, format_manifest(m, dir));
  return manifest_path;
}

}  // namespace popcast
