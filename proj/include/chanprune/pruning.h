#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "chanprune/dataset.h"
#include "chanprune/graph.h"
#include "chanprune/oracle.h"
#include "chanprune/saliency.h"

namespace chanprune {

struct PruneConfig {
  // A single constituent metric, or the oracle composite.
  std::variant<MetricKind, OracleConfig> metric = MetricKind::MeanSqWeights;
  double max_test_acc_drop = 0.05;  // fraction, in [0,1]
  std::uint64_t seed = 0;           // validation-sample seed
  std::size_t val_images = 256;
  std::size_t val_batch = 32;
  std::size_t threads = 1;          // concurrent sensitivity probes

  void validate() const;
  bool composite() const { return std::holds_alternative<OracleConfig>(metric); }
  std::string metric_label() const;  // CLI name, "composite" for the oracle
  std::size_t k() const;             // 0 for constituent runs
};

struct StepOutcome {
  ChannelId chosen;
  std::string winning_metric;
  double base_loss = 0.0;   // L(theta, I_val) before the step; 0 for weight-only metrics
  double chosen_score = 0.0;  // constituent mode: S_c of the chosen channel
  CandidateSet candidates;                // composite mode only
  std::vector<SensitivityRecord> records;  // composite mode only
};

/// Picks one channel and zeroes its parameter set in `graph`.
/// Constituent mode: argmin S_c over unpruned channels, ties by (layer,
/// channel). Composite mode: rank with every constituent, select k
/// candidates round-robin, measure their sensitivities, take the smallest.
/// Returns nullopt when every channel is already zero.
std::optional<StepOutcome> prune_step(Graph& graph, const PruneConfig& cfg,
                                      const ValidationSample& sample);

enum class StopReason { AccuracyDrop, Exhausted };
std::string_view stop_reason_name(StopReason r);

struct StepRecord {
  std::size_t step = 0;  // 1-based
  ChannelId pruned;
  std::string winning_metric;
  double conv_removed_pct = 0.0;
  double test_top1 = 0.0;
  double val_loss = 0.0;
};

struct PruneTrajectory {
  double initial_test_top1 = 0.0;
  std::size_t test_size = 0;
  std::vector<StepRecord> steps;
  StopReason stop = StopReason::Exhausted;
};

// acc >= initial - drop, with slack far below one test example.
bool within_drop(double acc, double initial, double drop);

using StepObserver =
    std::function<void(const StepRecord&, const StepOutcome&, const Graph& pruned)>;

/// Iterative pruning without fine-tuning: every step recomputes saliencies
/// on the current weights, zeroes one channel and measures top-1 on the full
/// test set, until accuracy falls below initial - max_test_acc_drop (that
/// step is kept) or no channel is left.
PruneTrajectory run_pruning(const Graph& trained, const PruneConfig& cfg,
                            const DatasetSplits& splits, const StepObserver& observer = {});

/// Largest conv_removed_pct among steps still within `drop` of the initial
/// accuracy; 0 when there is none. Throws on an empty trajectory.
double weights_removed_at_drop(const PruneTrajectory& traj, double drop);

using Metadata = std::vector<std::pair<std::string, std::string>>;

// "# key = value" header lines, then
// step,layer,channel,winning_metric,conv_removed_pct,test_top1,val_loss
void write_trajectory_csv(std::ostream& out, const PruneTrajectory& traj, const Metadata& meta);
PruneTrajectory read_trajectory_csv(std::istream& in, Metadata* meta = nullptr);

// One JSON object per step for the audit log.
std::string audit_line(const StepRecord& record, const StepOutcome& outcome);

}  // namespace chanprune
