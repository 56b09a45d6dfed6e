// Command-line front end: synth, train, eval, compare, export-graph.

#include <iostream>

#include <CLI11.hpp>

#include "maxcorr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multimodal patient classification with correlation-learned multigraphs"};
  app.require_subcommand(1);

  maxcorr::CommandOptions opts;
  std::uint64_t seed = 0;
  std::string out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out, "output path");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  synth->add_flag("--force", opts.force, "overwrite a non-empty output directory");

  auto* train = app.add_subcommand("train", "pretrain and train a model");
  add_common(train);

  auto* eval = app.add_subcommand("eval", "score a checkpoint and write an AUROC report");
  add_common(eval);
  eval->add_option("--checkpoint", opts.checkpoints, "checkpoint file")->required();
  eval->add_flag("--on-train", opts.on_train, "score the training split instead of the test split");

  auto* compare = app.add_subcommand("compare", "per-class DeLong test between two checkpoints");
  add_common(compare);
  compare->add_option("--checkpoint", opts.checkpoints, "checkpoint file (give twice)")
      ->required()
      ->expected(2);

  auto* graph = app.add_subcommand("export-graph", "write the learned training multigraph");
  add_common(graph);
  graph->add_option("--checkpoint", opts.checkpoints, "checkpoint file")->required();
  graph->add_option("--threshold-offset", opts.threshold_offset,
                    "added to every learned threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : maxcorr::kExitInvalid;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--out")) opts.out = out;
  return maxcorr::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
