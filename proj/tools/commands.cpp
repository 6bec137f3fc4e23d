// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "popcast/ablate.hpp"
#include "popcast/error.hpp"
#include "popcast/text_io.hpp"

namespace popcast::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFit = "fit";
constexpr const char* kHoldout = "holdout";
constexpr const char* kDropped = "dropped";

fs::path prep_dir(const RunConfig& c) { return c.out / "prep"; }
fs::path models_dir(const RunConfig& c) { return c.out / "models"; }
fs::path reports_dir(const RunConfig& c) { return c.out / "reports"; }

void require(const fs::path& path, const std::string& hint) {
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    throw Error(ErrorCode::MissingArtifact, path.filename().string() + " not found under " +
                                                path.parent_path().filename().string() + "/; run `popcast " + hint +
                                                "` first");
  }
}

void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, path.filename().string() + ": " + e.what());
  }
}

// run.json accumulates the resolved settings of every command run in the
// directory; reruns overwrite their own entry only.
void record_run(const RunConfig& c, const std::string& command) {
  const fs::path path = c.out / "run.json";
  Json run = Json::object();
  std::error_code ec;
  if (fs::exists(path, ec)) run = read_json(path);
  if (!run.contains("commands")) run["commands"] = Json::object();
  run["format"] = "popcast-run";
  run["commands"][command] = resolved_json(c);
  write_json(path, run);
  fs::remove(c.out / "error.json", ec);
}

DatasetBundle load_bundle(const RunConfig& c) {
  if (c.manifest.empty()) throw Error(ErrorCode::InvalidArgument, "--manifest is required for this command");
  return validate_bundle(c.manifest);
}

double raw_prediction(double z) { return std::max(std::expm1(z), 0.0); }

struct Prep {
  FeatureMatrix train;
  FeatureMatrix test;
  std::vector<std::string> split;             // per train row
  std::array<std::vector<double>, 4> targets;  // raw, per train row

  std::vector<std::size_t> rows_in(const std::string& name) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (split[i] == name) out.push_back(i);
    }
    return out;
  }
};

Prep load_prep(const RunConfig& c) {
  const fs::path dir = prep_dir(c);
  for (const char* name : {"features_train.csv", "features_test.csv", "split.csv", "targets.csv"}) {
    require(dir / name, "prepare");
  }
  Prep p;
  p.train = load_feature_matrix(dir / "features_train.csv");
  p.test = load_feature_matrix(dir / "features_test.csv");
  const auto split = parse_csv(read_file(dir / "split.csv"));
  const auto targets = parse_csv(read_file(dir / "targets.csv"));
  if (split.size() != p.train.rows() + 1 || targets.size() != p.train.rows() + 1) {
    throw Error(ErrorCode::RowIdMismatch, "prep artifacts disagree on the number of training rows");
  }
  for (std::size_t i = 0; i < p.train.rows(); ++i) {
    const auto& s = split[i + 1].fields;
    const auto& t = targets[i + 1].fields;
    if (s.size() != 2 || t.size() != 5 || s[0] != p.train.row_ids[i] || t[0] != p.train.row_ids[i]) {
      throw Error(ErrorCode::RowIdMismatch, "prep artifacts disagree at row " + std::to_string(i + 1));
    }
    p.split.push_back(s[1]);
    for (std::size_t k = 0; k < 4; ++k) {
      const auto v = parse_double(t[k + 1]);
      if (!v) throw Error(ErrorCode::MalformedRow, "targets.csv line " + std::to_string(targets[i + 1].line));
      p.targets[k].push_back(*v);
    }
  }
  return p;
}

std::vector<double> pick(const std::vector<double>& v, const std::vector<std::size_t>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

std::vector<double> log1p_all(const std::vector<double>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(log1p_checked(x));
  return out;
}

std::string model_path_name(const char* kind, Target t, const char* ext) {
  return std::string(kind) + "_" + std::string(target_name(t)) + ext;
}

void check_bundle_matches(const DatasetBundle& bundle, const Prep& prep) {
  if (bundle.train.video_ids() != prep.train.row_ids || bundle.test.video_ids() != prep.test.row_ids) {
    throw Error(ErrorCode::RowIdMismatch, "manifest does not match the prepared run directory");
  }
}

}  // namespace

fs::path cmd_synth(const RunConfig& c) {
  SyntheticOptions opt;
  opt.seed = c.seed;
  opt.n_train = c.synth.n_train;
  opt.n_test = c.synth.n_test;
  opt.dims = c.synth.dims;
  opt.missing_meta_frac = c.synth.missing_meta_frac;
  return write_bundle(generate_synthetic(opt), c.out);
}

void cmd_prepare(const RunConfig& c) {
  const DatasetBundle bundle = load_bundle(c);
  if (bundle.train.empty() || !bundle.train.has_targets()) {
    throw Error(ErrorCode::MissingTarget, "training table needs all four targets on every row");
  }
  FeatureOptions options;
  options.daypart = c.daypart.value_or(bundle.manifest.daypart);
  options.corpus = c.freq_corpus;
  const FittedFeatures fitted = fit_features(bundle.train, bundle.test, options);
  const FeatureMatrix train_x = assemble_feature_matrix(bundle.train, fitted);
  const FeatureMatrix test_x = assemble_feature_matrix(bundle.test, fitted);
  const IqrReport iqr = iqr_filter_targets(bundle.train, c.iqr_k);

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < iqr.keep.size(); ++i) {
    if (iqr.keep[i]) kept.push_back(i);
  }
  if (kept.size() < 4) throw Error(ErrorCode::TooFewRows, "fewer than four training rows survive outlier removal");
  std::vector<std::size_t> shuffled = kept;
  Rng rng(derive_seed(c.seed, "holdout"));
  rng.shuffle(std::span<std::size_t>(shuffled));
  const auto n_holdout = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(c.holdout_frac * static_cast<double>(kept.size()))));
  std::vector<std::string> split(bundle.train.size(), kDropped);
  for (std::size_t i = 0; i < shuffled.size(); ++i) split[shuffled[i]] = i < n_holdout ? kHoldout : kFit;

  const fs::path dir = prep_dir(c);
  write_file_atomic(dir / "median_stats.json", format_median_stats(fitted.medians));
  write_file_atomic(dir / "freq_table.json", format_frequency_table(fitted.frequencies));
  write_feature_matrix(train_x, dir / "features_train.csv");
  write_feature_matrix(test_x, dir / "features_test.csv");

  std::string mask = "video_id,keep";
  for (Target t : kTargets) mask += ",flag_" + std::string(target_name(t));
  mask += "\n";
  std::string split_csv = "video_id,split\n";
  std::string targets_csv = "video_id";
  for (Target t : kTargets) targets_csv += "," + std::string(target_name(t));
  targets_csv += "\n";
  for (std::size_t i = 0; i < bundle.train.size(); ++i) {
    const auto& rec = bundle.train.rows[i];
    const std::string id = csv_escape(rec.video_id);
    mask += id + "," + (iqr.keep[i] ? "1" : "0");
    targets_csv += id;
    for (Target t : kTargets) {
      mask += iqr.flagged[static_cast<std::size_t>(t)][i] ? ",1" : ",0";
      targets_csv += "," + format_double((*rec.targets)[t]);
    }
    mask += "\n";
    targets_csv += "\n";
    split_csv += id + "," + split[i] + "\n";
  }
  write_file_atomic(dir / "iqr_mask.csv", mask);
  write_file_atomic(dir / "split.csv", split_csv);
  write_file_atomic(dir / "targets.csv", targets_csv);

  Json report;
  report["n_train"] = bundle.train.size();
  report["n_test"] = bundle.test.size();
  report["n_kept"] = kept.size();
  report["n_dropped"] = bundle.train.size() - kept.size();
  report["n_fit"] = kept.size() - n_holdout;
  report["n_holdout"] = n_holdout;
  Json flagged = Json::object();
  for (Target t : kTargets) {
    const auto& f = iqr.flagged[static_cast<std::size_t>(t)];
    flagged[std::string(target_name(t))] = std::count(f.begin(), f.end(), true);
  }
  report["flagged_per_target"] = flagged;
  Json dropped = Json::array();
  for (std::size_t i = 0; i < iqr.keep.size(); ++i) {
    if (!iqr.keep[i]) dropped.push_back(bundle.train.rows[i].video_id);
  }
  report["dropped_ids"] = dropped;
  Json coverage = Json::object();
  for (const auto& [id, cov] : bundle.coverage) {
    coverage[std::to_string(id)] = {{"source", source_name(id)},
                                    {"missing_train", cov.missing_train.size()},
                                    {"missing_test", cov.missing_test.size()},
                                    {"missing_frac", cov.missing_frac}};
  }
  report["embedding_coverage"] = coverage;
  report["daypart"] = {{"sleep_end", options.daypart.sleep_end},
                       {"work_start", options.daypart.work_start},
                       {"work_end", options.daypart.work_end}};
  write_json(dir / "prep_report.json", report);
  record_run(c, "prepare");
}

void cmd_train_tabular(const RunConfig& c) {
  const Prep prep = load_prep(c);
  const auto fit_rows = prep.rows_in(kFit);
  const auto holdout_rows = prep.rows_in(kHoldout);
  const FeatureMatrix X_fit = prep.train.select_rows(fit_rows);
  const FeatureMatrix X_holdout = prep.train.select_rows(holdout_rows);

  Json metrics = Json::object();
  for (Target t : kTargets) {
    const std::string name(target_name(t));
    const auto& raw = prep.targets[static_cast<std::size_t>(t)];
    const auto y_fit = log1p_all(pick(raw, fit_rows));

    GbdtParams params = c.gbdt;
    Json entry;
    if (c.tune.budget > 0) {
      const auto tuned =
          tune_gbdt(X_fit, y_fit, c.tune.space, c.tune.budget, derive_seed(c.seed, "tune/" + name), c.gbdt,
                    c.tune.folds);
      params = tuned.best;
      entry["tuning"] = "random search";
      entry["tune_budget"] = c.tune.budget;
      entry["best_cv_mape"] = tuned.best_cv_mape;
      entry["best_trial"] = tuned.best_index;
    } else {
      entry["tuning"] = "budget 0: default parameters used";
    }
    params.seed = derive_seed(c.seed, "gbdt/" + name);
    const TreeEnsemble model = fit_gbdt(X_fit, y_fit, params);
    save_gbdt(model, models_dir(c) / model_path_name("gbdt", t, ".json"));

    std::vector<double> pred = predict_gbdt(model, X_holdout);
    for (auto& v : pred) v = raw_prediction(v);
    const auto truth = pick(raw, holdout_rows);
    entry["n_fit"] = fit_rows.size();
    entry["n_holdout"] = holdout_rows.size();
    entry["holdout_mape"] = mape(truth, pred);
    entry["holdout_mse"] = mse(truth, pred);
    entry["params"] = {{"n_rounds", params.n_rounds},
                       {"max_depth", params.max_depth},
                       {"min_child_weight", params.min_child_weight},
                       {"lambda", params.lambda},
                       {"gamma", params.gamma},
                       {"learning_rate", params.learning_rate},
                       {"subsample_rows", params.subsample_rows},
                       {"colsample", params.colsample}};
    metrics[name] = entry;
  }
  write_json(models_dir(c) / "tabular_metrics.json", metrics);
  record_run(c, "train-tabular");
}

void cmd_train_fusion(const RunConfig& c) {
  const Prep prep = load_prep(c);
  const DatasetBundle bundle = load_bundle(c);
  check_bundle_matches(bundle, prep);
  const std::vector<int> sources = bundle.source_ids();
  if (sources.empty()) throw Error(ErrorCode::MissingSource, "manifest lists no embedding sources");

  auto usable = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> out;
    for (auto r : rows) {
      if (has_all_sources(bundle.embeddings, sources, prep.train.row_ids[r])) out.push_back(r);
    }
    return out;
  };
  const auto fit_rows = usable(prep.rows_in(kFit));
  const auto holdout_rows = usable(prep.rows_in(kHoldout));
  auto ids_of = [&](const std::vector<std::size_t>& rows) {
    std::vector<std::string> ids;
    for (auto r : rows) ids.push_back(prep.train.row_ids[r]);
    return ids;
  };
  const Batch fit_batch = make_batch(bundle.embeddings, sources, ids_of(fit_rows));
  const Batch holdout_batch = make_batch(bundle.embeddings, sources, ids_of(holdout_rows));

  std::vector<BranchSpec> specs;
  for (int s : sources) specs.push_back(make_branch_spec(s, bundle.embeddings.at(s).dim(), c.fusion.unified_width));

  Json metrics = Json::object();
  for (Target t : kTargets) {
    const std::string name(target_name(t));
    const auto& raw = prep.targets[static_cast<std::size_t>(t)];
    FusionNet net =
        build_fusion_net(specs, c.fusion.head_widths, derive_seed(c.seed, "fusion/init/" + name), c.fusion.train.dropout);
    TrainConfig tc = c.fusion.train;
    tc.seed = derive_seed(c.seed, "fusion/train/" + name);
    const auto result = train_fusion(std::move(net), fit_batch, log1p_all(pick(raw, fit_rows)), tc);
    save_fusion(result.net, models_dir(c) / model_path_name("fusion", t, ".bin"));

    Json entry;
    entry["n_fit"] = fit_rows.size();
    entry["n_holdout"] = holdout_rows.size();
    entry["epochs_run"] = result.history.size();
    entry["best_epoch"] = result.best_epoch;
    entry["best_val_mse"] = result.best_val_loss;
    if (!holdout_rows.empty()) {
      const auto pred = predict_fusion(result.net, holdout_batch);
      entry["holdout_mape"] = mape(pick(raw, holdout_rows), pred);
    }
    Json history = Json::array();
    for (const auto& e : result.history) history.push_back({e.epoch, e.train_loss, e.val_loss});
    entry["history"] = history;
    metrics[name] = entry;
  }
  write_json(models_dir(c) / "fusion_metrics.json", metrics);
  record_run(c, "train-fusion");
}

bool cmd_ablate(const RunConfig& c) {
  const Prep prep = load_prep(c);
  const DatasetBundle bundle = load_bundle(c);
  check_bundle_matches(bundle, prep);

  std::vector<SubsetSpec> subsets;
  if (c.ablation.mode == "listed") {
    if (c.ablation.labels_file.empty()) throw Error(ErrorCode::InvalidArgument, "ablation.labels_file is required");
    subsets = load_subset_list(c.ablation.labels_file);
  } else {
    const auto ids = bundle.source_ids();
    subsets = enumerate_subsets(std::set<int>(ids.begin(), ids.end()));
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < prep.split.size(); ++i) {
    if (prep.split[i] != kDropped) rows.push_back(i);
  }

  AblationConfig ac;
  ac.unified_width = c.fusion.unified_width;
  ac.head_widths = c.fusion.head_widths;
  ac.train = c.fusion.train;
  ac.holdout_frac = c.holdout_frac;
  ac.seed = c.seed;
  ac.checkpoint_dir = c.out / "ablation" / "checkpoints";
  ac.max_new_cells = c.ablation.max_new_cells;
  ac.threads = c.ablation.threads;
  const AblationTable table = run_ablation(bundle, rows, subsets, c.ablation.targets, ac);

  write_file_atomic(reports_dir(c) / "ablation.csv", format_ablation_csv(table));
  Json best = Json::object();
  const auto winners = highlight_best(table);
  for (Target t : kTargets) {
    const auto& b = winners[static_cast<std::size_t>(t)];
    if (b) best[std::string(target_name(t))] = {{"label", b->label}, {"mape", b->mape}};
  }
  Json failed = Json::array();
  for (const auto& row : table.rows) {
    for (Target t : table.targets) {
      if (row[t].state == CellState::Failed) {
        failed.push_back({{"label", row.subset.label}, {"target", target_name(t)}, {"error", row[t].error}});
      }
    }
  }
  write_json(reports_dir(c) / "ablation_best.json",
             {{"complete", table.complete()}, {"rows", table.rows.size()}, {"best", best}, {"failed", failed}});
  record_run(c, "ablate");
  return table.complete();
}

void cmd_predict(const RunConfig& c) {
  const Prep prep = load_prep(c);
  const DatasetBundle bundle = load_bundle(c);
  check_bundle_matches(bundle, prep);

  std::array<TreeEnsemble, 4> gbdt;
  std::array<FusionNet, 4> fusion;
  for (Target t : kTargets) {
    const fs::path g = models_dir(c) / model_path_name("gbdt", t, ".json");
    const fs::path f = models_dir(c) / model_path_name("fusion", t, ".bin");
    require(g, "train-tabular");
    require(f, "train-fusion");
    gbdt[static_cast<std::size_t>(t)] = load_gbdt(g);
    fusion[static_cast<std::size_t>(t)] = load_fusion(f);
  }

  struct SplitRows {
    const char* name;
    const FeatureMatrix* X;
    std::vector<std::size_t> rows;
  };
  std::vector<std::size_t> all_test(prep.test.rows());
  std::iota(all_test.begin(), all_test.end(), std::size_t{0});
  const std::array<SplitRows, 3> splits = {SplitRows{"train", &prep.train, prep.rows_in(kFit)},
                                           SplitRows{"holdout", &prep.train, prep.rows_in(kHoldout)},
                                           SplitRows{"test", &prep.test, all_test}};

  for (const auto& s : splits) {
    const FeatureMatrix X = s.X->select_rows(s.rows);
    std::string csv = "video_id,target,pred_tabular,pred_fusion,pred_ensemble\n";
    std::array<std::vector<double>, 4> tab;
    std::array<std::vector<std::optional<double>>, 4> fus;
    for (Target t : kTargets) {
      const auto k = static_cast<std::size_t>(t);
      tab[k] = predict_gbdt(gbdt[k], X);
      for (auto& v : tab[k]) v = raw_prediction(v);

      std::vector<int> sources;
      for (const auto& b : fusion[k].branches()) sources.push_back(b.spec.source_id);
      std::vector<std::string> ids;
      std::vector<std::size_t> where;
      for (std::size_t i = 0; i < X.rows(); ++i) {
        if (has_all_sources(bundle.embeddings, sources, X.row_ids[i])) {
          ids.push_back(X.row_ids[i]);
          where.push_back(i);
        }
      }
      fus[k].assign(X.rows(), std::nullopt);
      if (!ids.empty()) {
        const auto pred = predict_fusion(fusion[k], make_batch(bundle.embeddings, sources, ids));
        for (std::size_t i = 0; i < where.size(); ++i) fus[k][where[i]] = pred[i];
      }
    }
    for (std::size_t i = 0; i < X.rows(); ++i) {
      for (Target t : kTargets) {
        const auto k = static_cast<std::size_t>(t);
        const double a = tab[k][i];
        csv += csv_escape(X.row_ids[i]) + "," + std::string(target_name(t)) + "," + format_double(a) + ",";
        if (fus[k][i]) {
          const std::string id = X.row_ids[i];
          const double b = *fus[k][i];
          const auto ens = average_ensemble(std::span(&id, 1), std::span(&a, 1), std::span(&id, 1),
                                            std::span(&b, 1), c.ensemble_space);
          csv += format_double(b) + "," + format_double(ens.averaged[0]) + "\n";
        } else {
          // No fusion prediction: the ensemble falls back to the tabular member.
          csv += "," + format_double(a) + "\n";
        }
      }
    }
    write_file_atomic(c.out / ("predictions_" + std::string(s.name) + ".csv"), csv);
  }
  record_run(c, "predict");
}

namespace {

struct PredictionRow {
  std::string video_id;
  Target target;
  double tabular = 0.0;
  std::optional<double> fusion;
  double ensemble = 0.0;
};

std::vector<PredictionRow> load_predictions(const fs::path& path) {
  require(path, "predict");
  const auto rows = parse_csv(read_file(path));
  if (rows.empty() ||
      rows[0].fields != std::vector<std::string>{"video_id", "target", "pred_tabular", "pred_fusion", "pred_ensemble"}) {
    throw Error(ErrorCode::BadHeader, path.filename().string());
  }
  std::vector<PredictionRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    auto fail = [&] { throw Error(ErrorCode::MalformedRow, path.filename().string() + " line " + std::to_string(rows[i].line)); };
    if (f.size() != 5) fail();
    PredictionRow r;
    r.video_id = f[0];
    r.target = parse_target(f[1]);
    const auto a = parse_double(f[2]);
    const auto e = parse_double(f[4]);
    if (!a || !e) fail();
    r.tabular = *a;
    r.ensemble = *e;
    if (!f[3].empty()) {
      const auto b = parse_double(f[3]);
      if (!b) fail();
      r.fusion = *b;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

void cmd_report(const RunConfig& c) {
  const Prep prep = load_prep(c);
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < prep.train.rows(); ++i) row_of[prep.train.row_ids[i]] = i;

  // Leaderboard and member comparison on the holdout split.
  const auto holdout = load_predictions(c.out / "predictions_holdout.csv");
  MetricReport video{"Video", 0, {}};
  MetricReport tabular{"Tabular", 0, {}};
  MetricReport final_fusion{"Final Fusion", 0, {}};
  Json summary = Json::object();
  for (Target t : kTargets) {
    std::vector<double> truth_all, tab_all, ens_all, truth_v, fus_v, tab_v, ens_v;
    for (const auto& r : holdout) {
      if (r.target != t) continue;
      auto it = row_of.find(r.video_id);
      if (it == row_of.end()) throw Error(ErrorCode::RowIdMismatch, "unknown holdout id " + r.video_id);
      const double y = prep.targets[static_cast<std::size_t>(t)][it->second];
      truth_all.push_back(y);
      tab_all.push_back(r.tabular);
      ens_all.push_back(r.ensemble);
      if (r.fusion) {
        truth_v.push_back(y);
        fus_v.push_back(*r.fusion);
        tab_v.push_back(r.tabular);
        ens_v.push_back(r.ensemble);
      }
    }
    if (truth_all.empty()) throw Error(ErrorCode::MissingTarget, "no holdout predictions for " + std::string(target_name(t)));
    tabular[t] = TargetMetric{mape(truth_all, tab_all), mse(truth_all, tab_all)};
    final_fusion[t] = TargetMetric{mape(truth_all, ens_all), mse(truth_all, ens_all)};
    tabular.n_rows = final_fusion.n_rows = truth_all.size();
    if (truth_v.empty()) throw Error(ErrorCode::MissingTarget, "no holdout fusion predictions for " + std::string(target_name(t)));
    video[t] = TargetMetric{mape(truth_v, fus_v), mse(truth_v, fus_v)};
    video.n_rows = truth_v.size();

    const double m_tab = mape(truth_v, tab_v);
    const double m_fus = mape(truth_v, fus_v);
    const double m_ens = mape(truth_v, ens_v);
    const double bound = 0.5 * (m_tab + m_fus);
    summary[std::string(target_name(t))] = {{"n_rows_both_members", truth_v.size()},
                                            {"mape_tabular", m_tab},
                                            {"mape_fusion", m_fus},
                                            {"mape_ensemble", m_ens},
                                            {"ensemble_within_member_mean", m_ens <= bound + 1e-12 * std::max(1.0, bound)},
                                            {"ensemble_beats_both", m_ens < m_tab && m_ens < m_fus}};
  }
  const std::array<MetricReport, 3> reports = {video, tabular, final_fusion};
  const auto board = leaderboard_report(reports);
  write_file_atomic(reports_dir(c) / "leaderboard.csv", board.csv);
  write_file_atomic(reports_dir(c) / "leaderboard.txt", board.text);

  const fs::path tab_metrics = models_dir(c) / "tabular_metrics.json";
  if (fs::exists(tab_metrics)) {
    const Json m = read_json(tab_metrics);
    for (Target t : kTargets) {
      const std::string name(target_name(t));
      if (m.contains(name) && m[name].contains("tuning")) summary[name]["tabular_tuning"] = m[name]["tuning"];
    }
  }
  write_json(reports_dir(c) / "summary.json", summary);

  // Prediction densities per split, model and target.
  std::vector<DensitySeries> series;
  for (const char* split : {"train", "holdout", "test"}) {
    const auto preds = split == std::string("holdout") ? holdout : load_predictions(c.out / ("predictions_" + std::string(split) + ".csv"));
    for (Target t : kTargets) {
      DensitySeries tab{split, "tabular:" + std::string(target_name(t)), {}};
      DensitySeries fus{split, "fusion:" + std::string(target_name(t)), {}};
      DensitySeries ens{split, "ensemble:" + std::string(target_name(t)), {}};
      for (const auto& r : preds) {
        if (r.target != t) continue;
        tab.values.push_back(r.tabular);
        ens.values.push_back(r.ensemble);
        if (r.fusion) fus.values.push_back(*r.fusion);
      }
      for (auto* s : {&tab, &fus, &ens}) {
        if (!s->values.empty()) series.push_back(std::move(*s));
      }
    }
  }
  write_file_atomic(reports_dir(c) / "density.csv", density_export(series));

  for (Target t : kTargets) {
    const fs::path g = models_dir(c) / model_path_name("gbdt", t, ".json");
    require(g, "train-tabular");
    write_file_atomic(reports_dir(c) / ("importance_" + std::string(target_name(t)) + ".csv"),
                      format_importance_csv(feature_importance(load_gbdt(g))));
  }
  record_run(c, "report");
}

std::string format_error_json(const std::string& command, const std::exception& error) {
  Json j;
  j["command"] = command;
  if (const auto* e = dynamic_cast<const Error*>(&error)) {
    const auto cat = category(e->code());
    j["code"] = to_string(e->code());
    j["category"] = cat == ErrorCategory::Input ? "input" : cat == ErrorCategory::State ? "state" : "numeric";
    j["exit_code"] = exit_code(e->code());
  } else {
    j["code"] = "Io";
    j["category"] = "input";
    j["exit_code"] = 2;
  }
  j["message"] = error.what();
  return j.dump(2) + "\n";
}

}  // namespace popcast::cli
