// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "popcast/error.hpp"
#include "popcast/gbdt.hpp"
#include "popcast/text_io.hpp"

namespace popcast {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

Json params_to_json(const GbdtParams& p) {
  return Json{{"n_rounds", p.n_rounds},
              {"max_depth", p.max_depth},
              {"min_child_weight", p.min_child_weight},
              {"lambda", p.lambda},
              {"gamma", p.gamma},
              {"learning_rate", p.learning_rate},
              {"subsample_rows", p.subsample_rows},
              {"colsample", p.colsample},
              {"seed", p.seed}};
}

GbdtParams params_from_json(const Json& j) {
  GbdtParams p;
  p.n_rounds = j.at("n_rounds").get<std::size_t>();
  p.max_depth = j.at("max_depth").get<std::size_t>();
  p.min_child_weight = j.at("min_child_weight").get<double>();
  p.lambda = j.at("lambda").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.subsample_rows = j.at("subsample_rows").get<double>();
  p.colsample = j.at("colsample").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

Json node_to_json(const RegressionTree& tree, std::size_t i) {
  const auto& n = tree.nodes[i];
  if (n.is_leaf()) return Json{{"leaf", n.weight}};
  return Json{{"feature", n.feature},
              {"threshold", n.threshold},
              {"gain", n.gain},
              {"weight", n.weight},
              {"left", node_to_json(tree, static_cast<std::size_t>(n.left))},
              {"right", node_to_json(tree, static_cast<std::size_t>(n.right))}};
}

int node_from_json(const Json& j, RegressionTree& tree, std::size_t n_features) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf")) {
    tree.nodes.back().weight = j.at("leaf").get<double>();
    return id;
  }
  TreeNode node;
  node.feature = j.at("feature").get<int>();
  if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features) {
    throw Error(ErrorCode::BadModelFile, "split feature index out of range");
  }
  node.threshold = j.at("threshold").get<double>();
  node.gain = j.at("gain").get<double>();
  node.weight = j.value("weight", 0.0);
  node.left = node_from_json(j.at("left"), tree, n_features);
  node.right = node_from_json(j.at("right"), tree, n_features);
  tree.nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace

std::string format_gbdt(const TreeEnsemble& model) {
  Json j;
  j["format"] = "popcast-gbdt";
  j["version"] = kFormatVersion;
  j["params"] = params_to_json(model.params);
  j["base_score"] = model.base_score;
  j["learning_rate"] = model.learning_rate;
  j["feature_names"] = model.feature_names;
  Json trees = Json::array();
  for (const auto& t : model.trees) trees.push_back(t.nodes.empty() ? Json{{"leaf", 0.0}} : node_to_json(t, 0));
  j["trees"] = std::move(trees);
  return j.dump() + "\n";
}

TreeEnsemble parse_gbdt(std::string_view json_text) {
  try {
    const auto j = Json::parse(json_text);
    if (j.at("format").get<std::string>() != "popcast-gbdt") throw Error(ErrorCode::BadModelFile, "not a gbdt model");
    if (j.at("version").get<int>() != kFormatVersion) throw Error(ErrorCode::BadModelFile, "unsupported version");
    TreeEnsemble model;
    model.params = params_from_json(j.at("params"));
    model.base_score = j.at("base_score").get<double>();
    model.learning_rate = j.at("learning_rate").get<double>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    for (const auto& t : j.at("trees")) {
      RegressionTree tree;
      node_from_json(t, tree, model.feature_names.size());
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadModelFile, e.what());
  }
}

void save_gbdt(const TreeEnsemble& model, const std::filesystem::path& path) {
  write_file_atomic(path, format_gbdt(model));
}

TreeEnsemble load_gbdt(const std::filesystem::path& path) { return parse_gbdt(read_file(path)); }

std::string format_importance_csv(const ImportanceReport& report) {
  std::string out = "feature,gain,splits\n";
  for (const auto& e : report.sorted()) {
    out += csv_escape(e.name) + "," + format_double(e.gain) + "," + std::to_string(e.splits) + "\n";
  }
  return out;
}

}  // namespace popcast
