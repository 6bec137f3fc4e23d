// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "commands.hpp"
#include "popcast/error.hpp"
#include "popcast/text_io.hpp"

namespace {

using popcast::cli::RunConfig;

struct Flags {
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;
  std::string config;
};

void add_common(CLI::App* cmd, Flags& f, bool needs_manifest) {
  auto* m = cmd->add_option("--manifest", f.manifest, "Bundle manifest (JSON)");
  if (needs_manifest) m->required();
  cmd->add_option("--out", f.out, "Run directory")->required();
  cmd->add_option("--seed", f.seed, "Seed for every random choice")->required();
  cmd->add_option("--config", f.config, "JSON overrides");
}

RunConfig resolve(const Flags& f) {
  RunConfig c;
  c.manifest = f.manifest;
  c.out = f.out;
  c.seed = f.seed;
  if (!f.config.empty()) popcast::cli::load_overrides(c, f.config);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"popcast: engagement forecasting from tabular metadata and video embeddings"};
  app.require_subcommand(1);

  Flags flags;
  auto* synth = app.add_subcommand("synth", "Write a synthetic bundle into --out");
  add_common(synth, flags, false);
  auto* prepare = app.add_subcommand("prepare", "Fit feature engineering and write prep/ artifacts");
  add_common(prepare, flags, true);
  auto* train_tabular = app.add_subcommand("train-tabular", "Fit one boosted-tree model per target");
  add_common(train_tabular, flags, false);
  auto* train_fusion = app.add_subcommand("train-fusion", "Fit one fusion network per target");
  add_common(train_fusion, flags, true);
  auto* ablate = app.add_subcommand("ablate", "Run the embedding-source subset grid");
  add_common(ablate, flags, true);
  auto* predict = app.add_subcommand("predict", "Write tabular, fusion and ensemble predictions");
  add_common(predict, flags, true);
  auto* report = app.add_subcommand("report", "Write leaderboard, density and importance reports");
  add_common(report, flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  RunConfig config;
  try {
    config = resolve(flags);
    if (command == "synth") {
      const auto manifest = popcast::cli::cmd_synth(config);
      std::cout << "wrote " << manifest.string() << "\n";
    } else if (command == "prepare") {
      popcast::cli::cmd_prepare(config);
    } else if (command == "train-tabular") {
      popcast::cli::cmd_train_tabular(config);
    } else if (command == "train-fusion") {
      popcast::cli::cmd_train_fusion(config);
    } else if (command == "ablate") {
      if (!popcast::cli::cmd_ablate(config)) std::cout << "ablation stopped early; rerun to resume\n";
    } else if (command == "predict") {
      popcast::cli::cmd_predict(config);
    } else if (command == "report") {
      popcast::cli::cmd_report(config);
    }
  } catch (const std::exception& e) {
    std::cerr << "popcast " << command << ": " << e.what() << "\n";
    int rc = 2;
    if (const auto* pe = dynamic_cast<const popcast::Error*>(&e)) rc = popcast::exit_code(pe->code());
    if (!flags.out.empty()) {
      try {
        popcast::write_file_atomic(std::filesystem::path(flags.out) / "error.json",
                                   popcast::cli::format_error_json(command, e));
      } catch (const std::exception& w) {
        std::cerr << "could not write error.json: " << w.what() << "\n";
      }
    }
    return rc;
  }
  return 0;
}
