#include "chanprune/oracle.h"

#include <algorithm>
#include <atomic>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>

#include "chanprune/errors.h"

namespace chanprune {

void OracleConfig::validate() const {
  if (k == 0) throw ConfigError("oracle k must be >= 1");
  if (constituents.empty()) throw ConfigError("oracle needs at least one constituent metric");
  std::set<MetricKind> seen;
  for (MetricKind m : constituents) {
    if (!seen.insert(m).second) {
      throw ConfigError("duplicate constituent metric " + std::string(metric_name(m)));
    }
  }
}

CandidateSet select_candidates(const std::map<MetricKind, std::vector<ChannelId>>& rankings,
                               const OracleConfig& cfg) {
  cfg.validate();
  if (rankings.empty()) throw std::invalid_argument("select_candidates: no rankings");
  std::vector<const std::vector<ChannelId>*> lists;
  for (MetricKind m : cfg.constituents) {
    const auto it = rankings.find(m);
    if (it == rankings.end()) {
      throw std::invalid_argument("select_candidates: no ranking for constituent " +
                                  std::string(metric_name(m)));
    }
    lists.push_back(&it->second);
  }

  CandidateSet out;
  std::vector<std::size_t> cursor(lists.size(), 0);
  bool progressed = true;
  while (out.channels.size() < cfg.k && progressed) {
    progressed = false;
    for (std::size_t i = 0; i < lists.size() && out.channels.size() < cfg.k; ++i) {
      const std::vector<ChannelId>& list = *lists[i];
      std::size_t& pos = cursor[i];
      while (pos < list.size() && out.provenance.contains(list[pos])) ++pos;
      if (pos == list.size()) continue;  // exhausted: skip this constituent
      out.channels.push_back(list[pos]);
      out.provenance.emplace(list[pos], cfg.constituents[i]);
      ++pos;
      progressed = true;
    }
  }
  return out;
}

double validation_loss(const Graph& graph, const ValidationSample& sample) {
  if (sample.batches.empty()) throw std::invalid_argument("validation_loss: empty validation sample");
  double sum = 0.0;
  for (const Batch& b : sample.batches) sum += graph.loss(b);
  return sum / static_cast<double>(sample.batches.size());
}

SensitivityRecord sensitivity(const Graph& graph, const ChannelParamSet& pset,
                              const ValidationSample& sample, double base_loss) {
  Graph probe = graph;
  zero_channel(probe.weights(), pset);
  return {pset.owner, validation_loss(probe, sample) - base_loss, base_loss};
}

SensitivityRecord sensitivity(const Graph& graph, const ChannelParamSet& pset,
                              const ValidationSample& sample) {
  return sensitivity(graph, pset, sample, validation_loss(graph, sample));
}

std::vector<SensitivityRecord> measure_sensitivities(const Graph& graph,
                                                     std::span<const ChannelId> channels,
                                                     const ValidationSample& sample,
                                                     double base_loss, std::size_t threads) {
  std::vector<SensitivityRecord> out(channels.size());
  auto probe = [&](std::size_t i) {
    out[i] = sensitivity(graph, channel_param_set(graph.net(), channels[i]), sample, base_loss);
  };
  if (threads <= 1 || channels.size() <= 1) {
    for (std::size_t i = 0; i < channels.size(); ++i) probe(i);
    return out;
  }
  // Each probe clones the graph, so workers share nothing mutable except
  // their own slot in `out`.
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(channels.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, channels.size()); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < channels.size(); i = next++) {
          try {
            probe(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

ChannelId oracle_choose(const CandidateSet& candidates, std::span<const SensitivityRecord> records) {
  if (candidates.channels.empty()) throw std::invalid_argument("oracle_choose: no candidates");
  std::map<ChannelId, double> delta;
  for (const SensitivityRecord& r : records) delta[r.channel] = r.delta_loss;
  ChannelId best{};
  bool have = false;
  double best_delta = 0.0;
  for (ChannelId c : candidates.channels) {
    const auto it = delta.find(c);
    if (it == delta.end()) {
      throw std::invalid_argument("oracle_choose: missing sensitivity record for " + to_string(c));
    }
    if (!have || it->second < best_delta || (it->second == best_delta && c < best)) {
      best = c;
      best_delta = it->second;
      have = true;
    }
  }
  return best;
}

std::size_t forward_pass_budget(const OracleConfig& cfg, std::size_t n_val) { return cfg.k * n_val; }

}  // namespace chanprune
