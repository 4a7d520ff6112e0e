#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "chanprune/dataset.h"
#include "chanprune/graph.h"
#include "chanprune/network.h"
#include "chanprune/saliency.h"

namespace chanprune {

struct OracleConfig {
  std::size_t k = 5;  // channels the oracle measures per step
  std::vector<MetricKind> constituents{kAllMetrics.begin(), kAllMetrics.end()};

  // Throws ConfigError for k == 0, an empty list, or duplicates.
  void validate() const;
};

struct CandidateSet {
  std::vector<ChannelId> channels;  // in nomination order
  std::map<ChannelId, MetricKind> provenance;
};

/// Visits the constituents round-robin in cfg.constituents order; each visit
/// nominates that metric's lowest-ranked channel not already chosen. A
/// constituent whose ranking is used up is skipped. Stops as soon as k
/// channels are chosen or nothing is left to nominate.
CandidateSet select_candidates(const std::map<MetricKind, std::vector<ChannelId>>& rankings,
                               const OracleConfig& cfg);

struct SensitivityRecord {
  ChannelId channel;
  double delta_loss = 0.0;  // L(theta - theta_c) - L(theta)
  double base_loss = 0.0;
};

// Mean batch loss over the sample; one forward pass per batch.
double validation_loss(const Graph& graph, const ValidationSample& sample);

/// Loss change from zeroing pset on a clone of the graph. The graph itself
/// is not modified. Costs N_val forward passes.
SensitivityRecord sensitivity(const Graph& graph, const ChannelParamSet& pset,
                              const ValidationSample& sample, double base_loss);
// Computes the base loss too (2 * N_val passes).
SensitivityRecord sensitivity(const Graph& graph, const ChannelParamSet& pset,
                              const ValidationSample& sample);

/// Sensitivity of each channel, returned in input order. With threads > 1
/// the probes run concurrently on separate clones; results are identical.
std::vector<SensitivityRecord> measure_sensitivities(const Graph& graph,
                                                     std::span<const ChannelId> channels,
                                                     const ValidationSample& sample,
                                                     double base_loss, std::size_t threads = 1);

/// Candidate with the smallest delta_loss; ties by (layer, channel).
/// Throws std::invalid_argument when a candidate has no record.
ChannelId oracle_choose(const CandidateSet& candidates, std::span<const SensitivityRecord> records);

/// k * N_val: forward passes spent on candidate probes in one pruning step.
std::size_t forward_pass_budget(const OracleConfig& cfg, std::size_t n_val);

}  // namespace chanprune
