#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chanprune/dataset.h"
#include "chanprune/network.h"
#include "chanprune/pruning.h"
#include "chanprune/saliency.h"
#include "chanprune/training.h"

namespace chanprune {

inline constexpr std::string_view kVersion = "0.3.1";

// --- configuration ---------------------------------------------------------

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

// Every key the config file accepts, with its default.
std::span<const ConfigKey> config_keys();

/// Parses "key = value" lines. '#' starts a comment; blank lines are
/// ignored. Unknown keys, duplicates and lines without '=' throw
/// ConfigError naming the key or line.
std::map<std::string, std::string> parse_config_text(std::string_view text);

struct DatasetSpec {
  std::string kind = "synth";  // synth | cifar10
  std::filesystem::path dir;   // cifar10 only
  CifarOptions cifar;
  std::size_t synth_classes = 4;
  std::size_t synth_examples = 2000;
  std::size_t synth_image_size = 16;
  SynthOptions synth;
  std::uint64_t seed = 1;
};

DatasetSplits load_dataset(const DatasetSpec& spec);

struct ExperimentConfig {
  DatasetSpec data;
  std::string net = "toy-a";
  TrainConfig train;
  std::vector<std::string> metrics;  // constituent names and/or "composite"
  std::vector<std::size_t> k_values{5};
  std::vector<MetricKind> constituents;
  double max_acc_drop = 0.05;
  std::size_t val_images = 256;
  std::size_t val_batch = 32;
  std::size_t replicates = 5;  // validation-sample seeds seed_base, seed_base+1, ...
  std::uint64_t seed_base = 1;
  std::size_t threads = 1;

  // Effective value of every key, defaults included, in key-table order.
  std::map<std::string, std::string> entries;

  NetworkDef network(const DatasetSplits& splits) const;
  std::vector<std::uint64_t> seeds() const;
  PruneConfig prune_config(std::string_view metric, std::size_t k, std::uint64_t seed) const;
  Metadata metadata() const;
};

// Throws ConfigError naming the offending key.
ExperimentConfig make_experiment(const std::map<std::string, std::string>& values);
ExperimentConfig load_experiment(const std::filesystem::path& file);

/// "composite" or a constituent name; anything else throws ConfigError
/// listing the valid names.
void check_metric_name(std::string_view name);

// {net}_{metric}_{k}_{seed}.csv, k = 0 for constituents.
std::string trajectory_file_name(std::string_view net, std::string_view metric, std::size_t k,
                                 std::uint64_t seed);

// --- statistics ------------------------------------------------------------

struct Interval {
  double mean = 0.0;
  std::optional<double> half_width;  // absent for fewer than 2 samples
  std::size_t n = 0;
};

/// Mean and Student-t half-width at the given confidence level.
/// Throws std::invalid_argument for an empty sample.
Interval mean_interval(std::span<const double> values, double level = 0.95);

struct SummaryRow {
  std::string metric;
  std::size_t k = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> removed_pct;  // weights_removed_at_drop per seed
  Interval interval;
};

/// Groups trajectories by (metric, k) and orders the rows: constituents in
/// the fixed metric order, then composite by ascending k.
std::vector<SummaryRow> summarize(const std::vector<std::pair<Metadata, PruneTrajectory>>& runs,
                                  double drop);

std::string format_summary_csv(const std::vector<SummaryRow>& rows, const Metadata& meta);
std::string format_summary_text(const std::vector<SummaryRow>& rows, double drop);

// --- commands --------------------------------------------------------------

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};

struct PruneArgs {
  std::filesystem::path config;
  std::filesystem::path checkpoint;
  std::string metric;
  std::optional<std::size_t> k;
  std::optional<double> max_acc_drop;
  std::optional<std::uint64_t> seed;  // one run; otherwise every replicate seed
  std::filesystem::path out;
};

struct CompareArgs {
  std::filesystem::path config;
  std::filesystem::path in;
  double drop = 0.05;
  std::filesystem::path out;
  // When set, missing (metric, k, seed) trajectories are produced first.
  std::optional<std::filesystem::path> checkpoint;
};

// Returns the checkpoint path.
std::filesystem::path cmd_train(const TrainArgs& args, std::ostream& log);
// Returns the trajectory CSV paths, one per seed.
std::vector<std::filesystem::path> cmd_prune(const PruneArgs& args, std::ostream& log);
std::vector<SummaryRow> cmd_compare(const CompareArgs& args, std::ostream& log);

}  // namespace chanprune
