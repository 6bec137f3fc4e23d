// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "popcast/error.hpp"
#include "popcast/text_io.hpp"

namespace popcast {

namespace {

constexpr std::array<std::string_view, 4> kTargetNames = {"comment", "heart", "play", "share"};
constexpr std::array<std::string_view, 4> kTargetTitles = {"Comment", "Heart", "Play", "Share"};
constexpr std::array<std::string_view, 5> kMetaNames = {"duration_s", "frame_count", "fps", "width",
                                                        "height"};
constexpr std::array<std::string_view, 6> kSourceNames = {"VideoMAE",   "ViViT",     "TimeSformer",
                                                          "X-CLIP",     "LLaVA-NeXT", "InternVideo2"};

constexpr std::size_t kBaseColumns = 13;

std::string line_msg(std::size_t line) { return "line " + std::to_string(line); }

double parse_count(const std::string& cell, std::size_t line, std::string_view column) {
  auto v = parse_double(cell);
  if (!v || !std::isfinite(*v) || *v < 0.0) {
    throw Error(ErrorCode::MalformedRow, line_msg(line) + ": bad " + std::string(column) + " '" + cell + "'");
  }
  return *v;
}

std::optional<double> parse_optional_meta(const std::string& cell) {
  auto v = parse_double(cell);
  if (!v || !std::isfinite(*v) || *v < 0.0) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_spaces(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string_view target_name(Target t) { return kTargetNames[static_cast<std::size_t>(t)]; }
std::string_view target_title(Target t) { return kTargetTitles[static_cast<std::size_t>(t)]; }

Target parse_target(std::string_view name) {
  for (Target t : kTargets) {
    if (target_name(t) == name) return t;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown target '" + std::string(name) + "'");
}

std::string_view meta_name(MetaField f) { return kMetaNames[static_cast<std::size_t>(f)]; }

bool RecordTable::has_targets() const {
  return !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const Record& r) { return r.targets.has_value(); });
}

std::vector<std::string> RecordTable::video_ids() const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) ids.push_back(r.video_id);
  return ids;
}

std::vector<std::string> tabular_header(bool with_targets) {
  std::vector<std::string> h = {"video_id",
                                "author_id",
                                "create_time",
                                "caption",
                                "author_follower_count",
                                "author_following_count",
                                "author_total_heart_count",
                                "author_total_video_count"};
  for (auto name : kMetaNames) h.emplace_back(name);
  if (with_targets) {
    for (auto name : kTargetNames) h.emplace_back(name);
  }
  return h;
}

RecordTable parse_tabular(std::string_view csv_text, bool has_targets) {
  const auto rows = parse_csv(csv_text);
  const auto expected = tabular_header(true);
  if (rows.empty()) throw Error(ErrorCode::MissingColumn, std::string(expected[0]));

  const auto& header = rows.front().fields;
  for (std::size_t i = 0; i < kBaseColumns; ++i) {
    if (i >= header.size() || header[i] != expected[i]) throw Error(ErrorCode::MissingColumn, expected[i]);
  }
  bool file_has_targets = false;
  if (header.size() > kBaseColumns) {
    for (std::size_t i = kBaseColumns; i < expected.size(); ++i) {
      if (i >= header.size() || header[i] != expected[i]) throw Error(ErrorCode::MissingColumn, expected[i]);
    }
    if (header.size() != expected.size()) {
      throw Error(ErrorCode::MalformedRow, "unexpected column '" + header[expected.size()] + "'");
    }
    file_has_targets = true;
  }
  if (has_targets && !file_has_targets) throw Error(ErrorCode::MissingColumn, expected[kBaseColumns]);

  RecordTable table;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto& f = row.fields;
    if (f.size() != header.size()) {
      throw Error(ErrorCode::MalformedRow, line_msg(row.line) + ": expected " + std::to_string(header.size()) +
                                               " fields, got " + std::to_string(f.size()));
    }
    Record rec;
    rec.video_id = f[0];
    rec.author_id = f[1];
    if (rec.video_id.empty()) throw Error(ErrorCode::MalformedRow, line_msg(row.line) + ": empty video_id");
    if (rec.author_id.empty()) throw Error(ErrorCode::MalformedRow, line_msg(row.line) + ": empty author_id");
    auto t = parse_int(f[2]);
    if (!t) throw Error(ErrorCode::MalformedRow, line_msg(row.line) + ": bad create_time '" + f[2] + "'");
    rec.create_time = *t;
    rec.caption = f[3];
    rec.author_follower_count = parse_count(f[4], row.line, expected[4]);
    rec.author_following_count = parse_count(f[5], row.line, expected[5]);
    rec.author_total_heart_count = parse_count(f[6], row.line, expected[6]);
    rec.author_total_video_count = parse_count(f[7], row.line, expected[7]);
    for (std::size_t m = 0; m < kMetaFields.size(); ++m) rec.meta[m] = parse_optional_meta(f[8 + m]);

    if (file_has_targets) {
      const bool all_empty = std::all_of(f.begin() + kBaseColumns, f.end(), [](const std::string& s) { return s.empty(); });
      if (!all_empty) {
        TargetValues tv;
        for (std::size_t k = 0; k < 4; ++k) {
          tv.values[k] = parse_count(f[kBaseColumns + k], row.line, expected[kBaseColumns + k]);
        }
        rec.targets = tv;
      } else if (has_targets) {
        throw Error(ErrorCode::MalformedRow, line_msg(row.line) + ": missing targets");
      }
    }
    if (!seen.insert(rec.video_id).second) throw Error(ErrorCode::DuplicateVideoId, rec.video_id);
    table.rows.push_back(std::move(rec));
  }
  return table;
}

RecordTable load_tabular(const std::filesystem::path& path, bool has_targets) {
  return parse_tabular(read_file(path), has_targets);
}

std::string format_tabular(const RecordTable& table) {
  const bool with_targets =
      std::any_of(table.rows.begin(), table.rows.end(), [](const Record& r) { return r.targets.has_value(); });
  std::ostringstream out;
  const auto header = tabular_header(with_targets);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : table.rows) {
    out << csv_escape(r.video_id) << ',' << csv_escape(r.author_id) << ',' << r.create_time << ','
        << csv_quote(r.caption) << ',' << format_double(r.author_follower_count) << ','
        << format_double(r.author_following_count) << ',' << format_double(r.author_total_heart_count) << ','
        << format_double(r.author_total_video_count);
    for (const auto& m : r.meta) out << ',' << (m ? format_double(*m) : std::string());
    if (with_targets) {
      for (std::size_t k = 0; k < 4; ++k) out << ',' << (r.targets ? format_double(r.targets->values[k]) : std::string());
    }
    out << '\n';
  }
  return out.str();
}

void write_tabular(const RecordTable& table, const std::filesystem::path& path) {
  write_file_atomic(path, format_tabular(table));
}

// ---------------------------------------------------------------------------

std::string_view source_name(int source_id) {
  if (source_id < 1 || source_id > kNumSources) {
    throw Error(ErrorCode::InvalidArgument, "source id out of range: " + std::to_string(source_id));
  }
  return kSourceNames[static_cast<std::size_t>(source_id - 1)];
}

bool is_text_source(int source_id) { return source_id == 5 || source_id == 6; }

EmbeddingSet::EmbeddingSet(int source_id, std::size_t dim) : source_id_(source_id), dim_(dim) {
  (void)popcast::source_name(source_id);
  if (dim == 0) throw Error(ErrorCode::BadHeader, "dim must be positive");
}

std::string_view EmbeddingSet::source_name() const { return popcast::source_name(source_id_); }

void EmbeddingSet::add(std::string video_id, std::span<const double> vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::DimMismatch, video_id + ": expected " + std::to_string(dim_) + " values, got " +
                                            std::to_string(vector.size()));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, video_id);
  }
  if (index_.contains(video_id)) throw Error(ErrorCode::DuplicateVideoId, video_id);
  index_.emplace(video_id, ids_.size());
  ids_.push_back(std::move(video_id));
  values_.insert(values_.end(), vector.begin(), vector.end());
}

std::span<const double> EmbeddingSet::find(const std::string& video_id) const {
  auto it = index_.find(video_id);
  if (it == index_.end()) return {};
  return row(it->second);
}

EmbeddingSet parse_embeddings(std::string_view text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view header;
  if (!next_line(header)) throw Error(ErrorCode::BadHeader, "empty file");
  const auto tokens = split_spaces(header);
  if (tokens.size() < 5 || tokens[0] != "#popembed" || tokens[1] != "v1") {
    throw Error(ErrorCode::BadHeader, std::string(header));
  }
  auto value_of = [&](std::string_view token, std::string_view key) -> std::string_view {
    if (!token.starts_with(key) || token.size() <= key.size() || token[key.size()] != '=') {
      throw Error(ErrorCode::BadHeader, "expected " + std::string(key) + "=... in '" + std::string(header) + "'");
    }
    return token.substr(key.size() + 1);
  };
  const auto name = value_of(tokens[2], "source");
  const auto id = parse_int(value_of(tokens[3], "id"));
  const auto dim = parse_int(value_of(tokens[4], "dim"));
  if (!id || *id < 1 || *id > kNumSources) throw Error(ErrorCode::BadHeader, "bad source id");
  if (!dim || *dim <= 0) throw Error(ErrorCode::BadHeader, "bad dim");
  if (source_name(static_cast<int>(*id)) != name) {
    throw Error(ErrorCode::BadHeader, "source name '" + std::string(name) + "' does not match id " + std::to_string(*id));
  }

  EmbeddingSet set(static_cast<int>(*id), static_cast<std::size_t>(*dim));
  std::vector<double> values;
  std::string_view line;
  while (next_line(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw Error(ErrorCode::MalformedRow, line_msg(line_no) + ": expected <video_id>TAB<values>");
    }
    const std::string vid(line.substr(0, tab));
    values.clear();
    for (auto tok : split_spaces(line.substr(tab + 1))) {
      auto v = parse_double(tok);
      if (!v) throw Error(ErrorCode::MalformedRow, line_msg(line_no) + ": bad value '" + std::string(tok) + "'");
      if (!std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, line_msg(line_no));
      values.push_back(*v);
    }
    if (values.size() != set.dim()) {
      throw Error(ErrorCode::DimMismatch, line_msg(line_no) + ": expected " + std::to_string(set.dim()) +
                                              " values, got " + std::to_string(values.size()));
    }
    set.add(vid, values);
  }
  return set;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) { return parse_embeddings(read_file(path)); }

std::string format_embeddings(const EmbeddingSet& set) {
  std::string out = "#popembed v1 source=" + std::string(set.source_name()) + " id=" +
                    std::to_string(set.source_id()) + " dim=" + std::to_string(set.dim()) + "\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += set.ids()[i];
    out += '\t';
    auto row = set.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ' ';
      out += format_double(row[j]);
    }
    out += '\n';
  }
  return out;
}

void write_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  write_file_atomic(path, format_embeddings(set));
}

// ---------------------------------------------------------------------------

void DaypartHours::validate() const {
  if (!(0 <= sleep_end && sleep_end <= work_start && work_start <= work_end && work_end <= 24)) {
    throw Error(ErrorCode::InvalidArgument, "daypart hours must satisfy 0 <= sleep_end <= work_start <= work_end <= 24");
  }
}

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("manifest: ") + e.what());
  }
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  Manifest m;
  try {
    m.train_csv = resolve(j.at("train_csv").get<std::string>());
    m.test_csv = resolve(j.at("test_csv").get<std::string>());
    if (j.contains("embeddings")) {
      for (const auto& [key, value] : j.at("embeddings").items()) {
        auto id = parse_int(key);
        if (!id || *id < 1 || *id > kNumSources) {
          throw Error(ErrorCode::InvalidArgument, "manifest: bad source key '" + key + "'");
        }
        m.embeddings[static_cast<int>(*id)] = resolve(value.get<std::string>());
      }
    }
    m.max_missing_frac = j.value("max_missing_frac", 0.25);
    if (j.contains("daypart")) {
      const auto& d = j.at("daypart");
      m.daypart.sleep_end = d.value("sleep_end", m.daypart.sleep_end);
      m.daypart.work_start = d.value("work_start", m.daypart.work_start);
      m.daypart.work_end = d.value("work_end", m.daypart.work_end);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("manifest: ") + e.what());
  }
  if (!(m.max_missing_frac >= 0.0 && m.max_missing_frac <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "manifest: max_missing_frac must be in [0, 1]");
  }
  m.daypart.validate();
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

std::string format_manifest(const Manifest& manifest, const std::filesystem::path& base_dir) {
  auto rel = [&](const std::filesystem::path& p) {
    if (base_dir.empty()) return p.generic_string();
    auto r = p.lexically_relative(base_dir);
    return (r.empty() ? p : r).generic_string();
  };
  nlohmann::ordered_json j;
  j["train_csv"] = rel(manifest.train_csv);
  j["test_csv"] = rel(manifest.test_csv);
  nlohmann::ordered_json emb = nlohmann::ordered_json::object();
  for (const auto& [id, path] : manifest.embeddings) emb[std::to_string(id)] = rel(path);
  j["embeddings"] = emb;
  j["max_missing_frac"] = manifest.max_missing_frac;
  j["daypart"] = {{"sleep_end", manifest.daypart.sleep_end},
                  {"work_start", manifest.daypart.work_start},
                  {"work_end", manifest.daypart.work_end}};
  return j.dump(2) + "\n";
}

std::vector<int> DatasetBundle::source_ids() const {
  std::vector<int> ids;
  for (const auto& [id, set] : embeddings) ids.push_back(id);
  return ids;
}

std::map<int, SourceCoverage> compute_coverage(const RecordTable& train, const RecordTable& test,
                                               const std::map<int, EmbeddingSet>& embeddings) {
  std::map<int, SourceCoverage> out;
  const std::size_t total = train.size() + test.size();
  for (const auto& [id, set] : embeddings) {
    SourceCoverage cov;
    cov.source_id = id;
    for (const auto& r : train.rows) {
      if (!set.contains(r.video_id)) cov.missing_train.push_back(r.video_id);
    }
    for (const auto& r : test.rows) {
      if (!set.contains(r.video_id)) cov.missing_test.push_back(r.video_id);
    }
    cov.missing_frac = total == 0 ? 0.0
                                  : static_cast<double>(cov.missing_train.size() + cov.missing_test.size()) /
                                        static_cast<double>(total);
    out.emplace(id, std::move(cov));
  }
  return out;
}

DatasetBundle validate_bundle(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::exists(manifest_path)) {
    throw Error(ErrorCode::Io, "manifest not found: " + manifest_path.string());
  }
  DatasetBundle bundle;
  bundle.manifest_path = manifest_path;
  bundle.manifest = load_manifest(manifest_path);
  const auto& m = bundle.manifest;

  bundle.train = load_tabular(m.train_csv, true);
  bundle.test = load_tabular(m.test_csv, false);
  for (const auto& [id, path] : m.embeddings) {
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::ManifestMissingSource, std::to_string(id) + " (" + path.string() + ")");
    }
    auto set = load_embeddings(path);
    if (set.source_id() != id) {
      throw Error(ErrorCode::BadHeader, path.string() + " declares source " + std::to_string(set.source_id()) +
                                            " but the manifest lists it as " + std::to_string(id));
    }
    bundle.embeddings.emplace(id, std::move(set));
  }
  bundle.coverage = compute_coverage(bundle.train, bundle.test, bundle.embeddings);
  for (const auto& [id, cov] : bundle.coverage) {
    if (cov.missing_frac > m.max_missing_frac) {
      throw Error(ErrorCode::CoverageBelowThreshold,
                  "source " + std::to_string(id) + " is missing " + format_fixed(100.0 * cov.missing_frac, 1) +
                      "% of ids (limit " + format_fixed(100.0 * m.max_missing_frac, 1) + "%)");
    }
  }
  return bundle;
}

}  // namespace popcast
