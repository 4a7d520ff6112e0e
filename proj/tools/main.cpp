#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "chanprune/errors.h"
#include "chanprune/harness.h"

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace chanprune;
  CLI::App app{"Channel pruning experiments: train, prune, compare"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  TrainArgs train_args;
  std::optional<std::uint64_t> train_seed;
  auto* train_cmd = app.add_subcommand("train", "train a network and save a checkpoint");
  train_cmd->add_option("--config", train_args.config, "experiment config file")->required();
  train_cmd->add_option("--seed", train_seed, "training seed (overrides train_seed)");
  train_cmd->add_option("--out", train_args.out, "output directory")->required();

  PruneArgs prune_args;
  std::optional<std::size_t> prune_k;
  std::optional<double> prune_drop;
  std::optional<std::uint64_t> prune_seed;
  auto* prune_cmd = app.add_subcommand("prune", "prune a trained checkpoint one channel at a time");
  prune_cmd->add_option("--config", prune_args.config, "experiment config file")->required();
  prune_cmd->add_option("--checkpoint", prune_args.checkpoint, "trained checkpoint")->required();
  prune_cmd->add_option("--metric", prune_args.metric,
                        "mean-sq-weights, mean-activations, avg-gradients, taylor1, fisher2 or composite")
      ->required();
  prune_cmd->add_option("--k", prune_k, "oracle candidates per step (composite only)");
  prune_cmd->add_option("--max-acc-drop", prune_drop, "stop after top-1 falls this far (fraction)");
  prune_cmd->add_option("--seed", prune_seed, "single validation-sample seed; default: all replicates");
  prune_cmd->add_option("--out", prune_args.out, "output directory")->required();

  CompareArgs compare_args;
  std::optional<std::string> compare_ckpt;
  auto* compare_cmd = app.add_subcommand("compare", "summarise trajectories across seeds");
  compare_cmd->add_option("--config", compare_args.config, "experiment config file")->required();
  compare_cmd->add_option("--in", compare_args.in, "directory of trajectory CSVs")->required();
  compare_cmd->add_option("--drop", compare_args.drop, "accuracy drop for the summary")->capture_default_str();
  compare_cmd->add_option("--out", compare_args.out, "output directory")->required();
  compare_cmd->add_option("--checkpoint", compare_ckpt, "produce missing trajectories from this checkpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*train_cmd) {
      train_args.seed = train_seed;
      cmd_train(train_args, std::cout);
    } else if (*prune_cmd) {
      prune_args.k = prune_k;
      prune_args.max_acc_drop = prune_drop;
      prune_args.seed = prune_seed;
      cmd_prune(prune_args, std::cout);
    } else if (*compare_cmd) {
      if (compare_ckpt) compare_args.checkpoint = *compare_ckpt;
      cmd_compare(compare_args, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return 0;
}
