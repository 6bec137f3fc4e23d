// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <set>

#include "popcast/error.hpp"
#include "popcast/text_io.hpp"

namespace popcast::cli {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidArgument, "config: " + what); }

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) bad("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(std::string("bad value for '") + key + "'");
  }
}

std::string corpus_name(FrequencyCorpus c) { return c == FrequencyCorpus::TrainOnly ? "train_only" : "train_and_test"; }

}  // namespace

void apply_overrides(RunConfig& c, const Json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "", {"daypart", "iqr_k", "holdout_frac", "freq_corpus", "gbdt", "tune", "fusion", "ensemble_space",
                     "ablation", "synth"});
  if (j.contains("daypart")) {
    const auto& d = j["daypart"];
    check_keys(d, "daypart", {"sleep_end", "work_start", "work_end"});
    DaypartHours h = c.daypart.value_or(DaypartHours{});
    read(d, "sleep_end", h.sleep_end);
    read(d, "work_start", h.work_start);
    read(d, "work_end", h.work_end);
    h.validate();
    c.daypart = h;
  }
  read(j, "iqr_k", c.iqr_k);
  read(j, "holdout_frac", c.holdout_frac);
  if (j.contains("freq_corpus")) {
    std::string s;
    read(j, "freq_corpus", s);
    if (s == "train_and_test") {
      c.freq_corpus = FrequencyCorpus::TrainAndTest;
    } else if (s == "train_only") {
      c.freq_corpus = FrequencyCorpus::TrainOnly;
    } else {
      bad("freq_corpus must be train_and_test or train_only");
    }
  }
  if (j.contains("gbdt")) {
    const auto& g = j["gbdt"];
    check_keys(g, "gbdt", {"n_rounds", "max_depth", "min_child_weight", "lambda", "gamma", "learning_rate",
                           "subsample_rows", "colsample"});
    read(g, "n_rounds", c.gbdt.n_rounds);
    read(g, "max_depth", c.gbdt.max_depth);
    read(g, "min_child_weight", c.gbdt.min_child_weight);
    read(g, "lambda", c.gbdt.lambda);
    read(g, "gamma", c.gbdt.gamma);
    read(g, "learning_rate", c.gbdt.learning_rate);
    read(g, "subsample_rows", c.gbdt.subsample_rows);
    read(g, "colsample", c.gbdt.colsample);
    c.gbdt.validate();
  }
  if (j.contains("tune")) {
    const auto& t = j["tune"];
    check_keys(t, "tune", {"budget", "folds", "space"});
    read(t, "budget", c.tune.budget);
    read(t, "folds", c.tune.folds);
    if (t.contains("space")) {
      SearchSpace space;
      for (const auto& [name, r] : t["space"].items()) {
        check_keys(r, "tune.space." + name, {"lo", "hi", "log"});
        ParamRange pr;
        read(r, "lo", pr.lo);
        read(r, "hi", pr.hi);
        read(r, "log", pr.log_scale);
        space[name] = pr;
      }
      // Validates names and ranges.
      RandomSearchSampler probe(space, c.gbdt, 0);
      c.tune.space = std::move(space);
    }
  }
  if (j.contains("fusion")) {
    const auto& f = j["fusion"];
    check_keys(f, "fusion", {"unified_width", "head_widths", "learning_rate", "batch_size", "max_epochs", "patience",
                             "val_frac", "dropout", "bn_momentum"});
    read(f, "unified_width", c.fusion.unified_width);
    read(f, "head_widths", c.fusion.head_widths);
    read(f, "learning_rate", c.fusion.train.learning_rate);
    read(f, "batch_size", c.fusion.train.batch_size);
    read(f, "max_epochs", c.fusion.train.max_epochs);
    read(f, "patience", c.fusion.train.patience);
    read(f, "val_frac", c.fusion.train.val_frac);
    read(f, "dropout", c.fusion.train.dropout);
    read(f, "bn_momentum", c.fusion.train.bn_momentum);
    c.fusion.train.validate();
  }
  if (j.contains("ensemble_space")) {
    std::string s;
    read(j, "ensemble_space", s);
    if (s == "raw") {
      c.ensemble_space = AverageSpace::Raw;
    } else if (s == "log") {
      c.ensemble_space = AverageSpace::Log;
    } else {
      bad("ensemble_space must be raw or log");
    }
  }
  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    check_keys(a, "ablation", {"mode", "labels_file", "targets", "threads", "max_new_cells"});
    read(a, "mode", c.ablation.mode);
    if (c.ablation.mode != "all" && c.ablation.mode != "listed") bad("ablation.mode must be all or listed");
    if (a.contains("labels_file")) {
      std::string p;
      read(a, "labels_file", p);
      c.ablation.labels_file = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p;
    }
    if (a.contains("targets")) {
      std::vector<std::string> names;
      read(a, "targets", names);
      c.ablation.targets.clear();
      for (const auto& n : names) c.ablation.targets.push_back(parse_target(n));
      if (c.ablation.targets.empty()) bad("ablation.targets is empty");
    }
    read(a, "threads", c.ablation.threads);
    if (a.contains("max_new_cells")) {
      std::size_t n = 0;
      read(a, "max_new_cells", n);
      c.ablation.max_new_cells = n;
    }
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    check_keys(s, "synth", {"n_train", "n_test", "dims", "missing_meta_frac"});
    read(s, "n_train", c.synth.n_train);
    read(s, "n_test", c.synth.n_test);
    read(s, "missing_meta_frac", c.synth.missing_meta_frac);
    if (s.contains("dims")) {
      c.synth.dims.clear();
      for (const auto& [key, value] : s["dims"].items()) {
        const auto id = parse_int(key);
        if (!id || *id < 1 || *id > kNumSources || !value.is_number_unsigned()) bad("synth.dims must map 1..6 to sizes");
        c.synth.dims[static_cast<int>(*id)] = value.get<std::size_t>();
      }
    }
  }
  if (!(c.iqr_k > 0.0)) bad("iqr_k must be > 0");
  if (!(c.holdout_frac > 0.0 && c.holdout_frac < 1.0)) bad("holdout_frac must be in (0, 1)");
}

void load_overrides(RunConfig& config, const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    bad(path.filename().string() + ": " + e.what());
  }
  apply_overrides(config, j, path.parent_path());
}

Json resolved_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  if (c.daypart) {
    j["daypart"] = {{"sleep_end", c.daypart->sleep_end},
                    {"work_start", c.daypart->work_start},
                    {"work_end", c.daypart->work_end}};
  }
  j["iqr_k"] = c.iqr_k;
  j["holdout_frac"] = c.holdout_frac;
  j["freq_corpus"] = corpus_name(c.freq_corpus);
  j["gbdt"] = {{"n_rounds", c.gbdt.n_rounds},
               {"max_depth", c.gbdt.max_depth},
               {"min_child_weight", c.gbdt.min_child_weight},
               {"lambda", c.gbdt.lambda},
               {"gamma", c.gbdt.gamma},
               {"learning_rate", c.gbdt.learning_rate},
               {"subsample_rows", c.gbdt.subsample_rows},
               {"colsample", c.gbdt.colsample}};
  Json space = Json::object();
  for (const auto& [name, r] : c.tune.space) space[name] = {{"lo", r.lo}, {"hi", r.hi}, {"log", r.log_scale}};
  j["tune"] = {{"budget", c.tune.budget}, {"folds", c.tune.folds}, {"space", space}};
  const auto& t = c.fusion.train;
  j["fusion"] = {{"unified_width", c.fusion.unified_width},
                 {"head_widths", c.fusion.head_widths},
                 {"learning_rate", t.learning_rate},
                 {"batch_size", t.batch_size},
                 {"max_epochs", t.max_epochs},
                 {"patience", t.patience},
                 {"val_frac", t.val_frac},
                 {"dropout", t.dropout},
                 {"bn_momentum", t.bn_momentum}};
  j["ensemble_space"] = c.ensemble_space == AverageSpace::Raw ? "raw" : "log";
  Json targets = Json::array();
  for (Target tg : c.ablation.targets) targets.push_back(target_name(tg));
  j["ablation"] = {{"mode", c.ablation.mode},
                   {"labels_file", c.ablation.labels_file.filename().string()},
                   {"targets", targets}};
  if (c.ablation.max_new_cells) j["ablation"]["max_new_cells"] = *c.ablation.max_new_cells;
  Json dims = Json::object();
  for (const auto& [id, d] : c.synth.dims) dims[std::to_string(id)] = d;
  j["synth"] = {{"n_train", c.synth.n_train},
                {"n_test", c.synth.n_test},
                {"dims", dims},
                {"missing_meta_frac", c.synth.missing_meta_frac}};
  return j;
}

}  // namespace popcast::cli
