// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/ablate.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <thread>

#include "popcast/error.hpp"
#include "popcast/evaluate.hpp"
#include "popcast/features.hpp"
#include "popcast/text_io.hpp"

namespace popcast {

namespace {

using Json = nlohmann::ordered_json;

std::string join_label(const std::vector<int>& sources) {
  std::string label;
  for (int s : sources) {
    if (!label.empty()) label += '+';
    label += std::to_string(s);
  }
  return label;
}

}  // namespace

SubsetSpec make_subset(std::vector<int> sources) {
  if (sources.empty()) throw Error(ErrorCode::BadLabel, "subset is empty");
  std::sort(sources.begin(), sources.end());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i] < 1 || sources[i] > kNumSources) {
      throw Error(ErrorCode::BadLabel, "source id " + std::to_string(sources[i]) + " outside 1..6");
    }
    if (i > 0 && sources[i] == sources[i - 1]) {
      throw Error(ErrorCode::DuplicateSource, "source " + std::to_string(sources[i]) + " repeated");
    }
  }
  SubsetSpec s;
  s.label = join_label(sources);
  s.sources = std::move(sources);
  return s;
}

SubsetSpec parse_subset(std::string_view label) {
  std::vector<int> sources;
  const std::string text(label);
  auto bad = [&] { throw Error(ErrorCode::BadLabel, "malformed subset label '" + text + "'"); };
  if (label.empty()) bad();
  for (std::size_t i = 0; i < label.size(); ++i) {
    const char c = label[i];
    if (i % 2 == 0) {
      if (c < '1' || c > '6') bad();
      sources.push_back(c - '0');
    } else if (c != '+') {
      bad();
    }
  }
  if (label.size() % 2 == 0) bad();  // trailing '+'
  return make_subset(std::move(sources));
}

std::vector<SubsetSpec> enumerate_subsets(const std::set<int>& available) {
  if (available.empty()) throw Error(ErrorCode::InvalidArgument, "no sources to enumerate");
  const std::vector<int> ids(available.begin(), available.end());
  const std::size_t k = ids.size();
  std::vector<std::vector<int>> all;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << k); ++mask) {
    std::vector<int> s;
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (std::uint64_t{1} << i)) s.push_back(ids[i]);
    }
    all.push_back(std::move(s));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  std::vector<SubsetSpec> out;
  for (auto& s : all) out.push_back(make_subset(std::move(s)));
  return out;
}

std::vector<SubsetSpec> parse_subset_list(std::string_view text) {
  std::vector<SubsetSpec> out;
  std::set<std::string> seen;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (line.empty()) continue;
    auto s = parse_subset(line);
    if (!seen.insert(s.label).second) throw Error(ErrorCode::BadLabel, "subset '" + s.label + "' listed twice");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SubsetSpec> load_subset_list(const std::filesystem::path& path) { return parse_subset_list(read_file(path)); }

bool AblationTable::complete() const {
  for (const auto& r : rows) {
    for (Target t : targets) {
      if (r[t].state == CellState::Pending) return false;
    }
  }
  return true;
}

std::string AblationConfig::snapshot() const {
  Json j;
  j["unified_width"] = unified_width;
  j["head_widths"] = head_widths;
  j["learning_rate"] = train.learning_rate;
  j["batch_size"] = train.batch_size;
  j["max_epochs"] = train.max_epochs;
  j["patience"] = train.patience;
  j["val_frac"] = train.val_frac;
  j["dropout"] = train.dropout;
  j["bn_momentum"] = train.bn_momentum;
  j["holdout_frac"] = holdout_frac;
  j["seed"] = seed;
  return j.dump();
}

std::uint64_t cell_seed(std::uint64_t seed, const std::string& label, Target target) {
  return derive_seed(seed, label + "|" + std::string(target_name(target)));
}

namespace {

struct CellJob {
  std::size_t row = 0;
  Target target = Target::Comment;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const std::string& label, Target t) {
  return dir / (label + "." + std::string(target_name(t)) + ".json");
}

std::optional<AblationCell> read_checkpoint(const std::filesystem::path& path, const std::string& config) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const auto j = Json::parse(read_file(path));
    // Checkpoints from different settings are stale; recompute them.
    if (j.at("config").get<std::string>() != config) return std::nullopt;
    AblationCell cell;
    if (j.at("state").get<std::string>() == "done") {
      cell.state = CellState::Done;
      cell.mape = j.at("mape").get<double>();
    } else {
      cell.state = CellState::Failed;
      cell.error = j.at("error").get<std::string>();
    }
    return cell;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_checkpoint(const std::filesystem::path& path, const std::string& label, Target t, const std::string& config,
                      const AblationCell& cell) {
  Json j;
  j["label"] = label;
  j["target"] = target_name(t);
  j["config"] = config;
  if (cell.state == CellState::Done) {
    j["state"] = "done";
    j["mape"] = cell.mape;
  } else {
    j["state"] = "failed";
    j["error"] = cell.error;
  }
  write_file_atomic(path, j.dump() + "\n");
}

AblationCell run_cell(const DatasetBundle& bundle, const SubsetSpec& subset, Target target,
                      const std::vector<std::size_t>& fit_rows, const std::vector<std::size_t>& eval_rows,
                      const AblationConfig& config) {
  std::vector<std::string> fit_ids;
  std::vector<double> fit_y;
  std::vector<std::string> eval_ids;
  std::vector<double> eval_y;
  for (auto r : fit_rows) {
    const auto& rec = bundle.train.rows[r];
    if (!has_all_sources(bundle.embeddings, subset.sources, rec.video_id)) continue;
    fit_ids.push_back(rec.video_id);
    fit_y.push_back(log1p_checked((*rec.targets)[target]));
  }
  for (auto r : eval_rows) {
    const auto& rec = bundle.train.rows[r];
    if (!has_all_sources(bundle.embeddings, subset.sources, rec.video_id)) continue;
    eval_ids.push_back(rec.video_id);
    eval_y.push_back((*rec.targets)[target]);
  }
  if (eval_ids.empty()) throw Error(ErrorCode::TooFewRows, "no held-out rows carry every source of " + subset.label);

  const std::uint64_t seed = cell_seed(config.seed, subset.label, target);
  std::vector<BranchSpec> specs;
  for (int s : subset.sources) {
    specs.push_back(make_branch_spec(s, bundle.embeddings.at(s).dim(), config.unified_width));
  }
  FusionNet net = build_fusion_net(specs, config.head_widths, derive_seed(seed, "init"), config.train.dropout);
  TrainConfig tc = config.train;
  tc.seed = seed;
  const auto trained = train_fusion(std::move(net), make_batch(bundle.embeddings, subset.sources, fit_ids), fit_y, tc);
  const auto pred = predict_fusion(trained.net, make_batch(bundle.embeddings, subset.sources, eval_ids));
  AblationCell cell;
  cell.state = CellState::Done;
  cell.mape = mape(eval_y, pred);
  if (!std::isfinite(cell.mape)) throw Error(ErrorCode::DivergedLoss, "non-finite MAPE");
  return cell;
}

}  // namespace

AblationTable run_ablation(const DatasetBundle& bundle, std::span<const std::size_t> rows,
                           const std::vector<SubsetSpec>& subsets, const std::vector<Target>& targets,
                           const AblationConfig& config) {
  for (const auto& s : subsets) {
    for (int id : s.sources) {
      if (!bundle.embeddings.contains(id)) {
        throw Error(ErrorCode::MissingSource, "subset " + s.label + " needs source " + std::to_string(id));
      }
    }
  }
  for (auto r : rows) {
    if (r >= bundle.train.rows.size() || !bundle.train.rows[r].targets) {
      throw Error(ErrorCode::MissingTarget, "ablation rows must be labeled training rows");
    }
  }
  if (!(config.holdout_frac > 0.0 && config.holdout_frac < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "holdout_frac must be in (0, 1)");
  }

  // One held-out split shared by every cell, seeded from the run seed only.
  std::vector<std::size_t> shuffled(rows.begin(), rows.end());
  Rng split_rng(derive_seed(config.seed, "ablation/holdout"));
  split_rng.shuffle(std::span<std::size_t>(shuffled));
  const auto n_eval = static_cast<std::size_t>(std::llround(config.holdout_frac * static_cast<double>(shuffled.size())));
  std::vector<std::size_t> eval_rows(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_eval));
  std::vector<std::size_t> fit_rows(shuffled.begin() + static_cast<std::ptrdiff_t>(n_eval), shuffled.end());
  std::sort(eval_rows.begin(), eval_rows.end());
  std::sort(fit_rows.begin(), fit_rows.end());

  AblationTable table;
  table.targets = targets;
  table.seed = config.seed;
  table.config = config.snapshot();
  for (const auto& s : subsets) table.rows.push_back({s, {}});

  std::vector<CellJob> jobs;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (Target t : targets) {
      if (!config.checkpoint_dir.empty()) {
        if (auto cell = read_checkpoint(checkpoint_path(config.checkpoint_dir, table.rows[i].subset.label, t),
                                        table.config)) {
          table.rows[i][t] = *cell;
          continue;
        }
      }
      jobs.push_back({i, t});
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> started{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      if (config.max_new_cells && started.fetch_add(1) >= *config.max_new_cells) return;
      auto& row = table.rows[jobs[j].row];
      const Target t = jobs[j].target;
      AblationCell cell;
      try {
        cell = run_cell(bundle, row.subset, t, fit_rows, eval_rows, config);
      } catch (const std::exception& e) {
        cell.state = CellState::Failed;
        cell.error = e.what();
      }
      if (!config.checkpoint_dir.empty()) {
        write_checkpoint(checkpoint_path(config.checkpoint_dir, row.subset.label, t), row.subset.label, t,
                         table.config, cell);
      }
      row[t] = std::move(cell);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(config.threads, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return table;
}

std::array<std::optional<BestCell>, 4> highlight_best(const AblationTable& table) {
  std::array<std::optional<BestCell>, 4> best;
  for (const auto& row : table.rows) {
    for (Target t : kTargets) {
      const auto& cell = row[t];
      if (cell.state != CellState::Done || !std::isfinite(cell.mape)) continue;
      auto& b = best[static_cast<std::size_t>(t)];
      if (!b || cell.mape < b->mape || (cell.mape == b->mape && row.subset.label < b->label)) {
        b = BestCell{row.subset.label, cell.mape};
      }
    }
  }
  return best;
}

namespace {

constexpr std::array<Target, 4> kCsvOrder = {Target::Share, Target::Heart, Target::Comment, Target::Play};

}  // namespace

std::string format_ablation_csv(const AblationTable& table) {
  std::string out = "label,share,heart,comment,play\n";
  for (const auto& row : table.rows) {
    out += row.subset.label;
    for (Target t : kCsvOrder) {
      out += ',';
      const bool requested = std::find(table.targets.begin(), table.targets.end(), t) != table.targets.end();
      if (!requested) continue;
      const auto& cell = row[t];
      if (cell.state == CellState::Done) out += format_fixed(cell.mape, 2);
      if (cell.state == CellState::Failed) out += "ERR";
    }
    out += '\n';
  }
  return out;
}

AblationTable parse_ablation_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows.front().fields != std::vector<std::string>{"label", "share", "heart", "comment", "play"}) {
    throw Error(ErrorCode::BadHeader, "ablation table header must be label,share,heart,comment,play");
  }
  AblationTable table;
  table.targets.assign(kCsvOrder.begin(), kCsvOrder.end());
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != 5) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(rows[i].line));
    AblationRow row;
    row.subset = parse_subset(f[0]);
    if (!seen.insert(row.subset.label).second) throw Error(ErrorCode::BadLabel, row.subset.label + " listed twice");
    for (std::size_t k = 0; k < 4; ++k) {
      auto& cell = row[kCsvOrder[k]];
      const std::string& v = f[k + 1];
      if (v.empty()) continue;
      if (v == "ERR") {
        cell.state = CellState::Failed;
        cell.error = "ERR";
        continue;
      }
      const auto d = parse_double(v);
      if (!d || !std::isfinite(*d)) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(rows[i].line));
      cell.state = CellState::Done;
      cell.mape = *d;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace popcast
