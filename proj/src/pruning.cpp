#include "chanprune/pruning.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "chanprune/errors.h"
#include "chanprune/training.h"

namespace chanprune {

void PruneConfig::validate() const {
  if (!(max_test_acc_drop >= 0.0 && max_test_acc_drop <= 1.0)) {
    throw ConfigError("max_test_acc_drop must be in [0,1]");
  }
  if (val_images == 0 || val_batch == 0 || val_images % val_batch != 0) {
    throw ConfigError("val_batch must divide val_images (both >= 1)");
  }
  if (const auto* oc = std::get_if<OracleConfig>(&metric)) oc->validate();
}

std::string PruneConfig::metric_label() const {
  if (composite()) return "composite";
  return std::string(metric_name(std::get<MetricKind>(metric)));
}

std::size_t PruneConfig::k() const {
  if (const auto* oc = std::get_if<OracleConfig>(&metric)) return oc->k;
  return 0;
}

std::optional<StepOutcome> prune_step(Graph& graph, const PruneConfig& cfg,
                                      const ValidationSample& sample) {
  const std::vector<ChannelId> live = unpruned_channels(graph.net(), graph.weights());
  if (live.empty()) return std::nullopt;

  StepOutcome out;
  if (const auto* metric = std::get_if<MetricKind>(&cfg.metric)) {
    std::optional<ActivationPass> pass;
    if (needs_activations(*metric)) {
      pass = accumulate_activations(graph, sample, live);
      out.base_loss = pass->mean_loss;
    }
    const SaliencyVector sv =
        compute_saliency(*metric, graph, live, pass ? &*pass : nullptr, sample.seed);
    out.chosen = rank_channels(sv).front();
    out.chosen_score = sv.scores.at(out.chosen);
    out.winning_metric = std::string(metric_name(*metric));
  } else {
    const OracleConfig& oc = std::get<OracleConfig>(cfg.metric);
    // This pass also yields the base loss, so no separate N_val passes.
    const ActivationPass pass = accumulate_activations(graph, sample, live);
    out.base_loss = pass.mean_loss;
    std::map<MetricKind, std::vector<ChannelId>> rankings;
    for (MetricKind m : oc.constituents) {
      rankings[m] = rank_channels(compute_saliency(m, graph, live, &pass, sample.seed));
    }
    out.candidates = select_candidates(rankings, oc);
    out.records = measure_sensitivities(graph, out.candidates.channels, sample, out.base_loss, cfg.threads);
    out.chosen = oracle_choose(out.candidates, out.records);
    out.winning_metric = std::string(metric_name(out.candidates.provenance.at(out.chosen)));
  }
  zero_channel(graph.weights(), channel_param_set(graph.net(), out.chosen));
  return out;
}

std::string_view stop_reason_name(StopReason r) {
  return r == StopReason::AccuracyDrop ? "accuracy_drop" : "exhausted";
}

bool within_drop(double acc, double initial, double drop) { return acc >= initial - drop - 1e-9; }

PruneTrajectory run_pruning(const Graph& trained, const PruneConfig& cfg,
                            const DatasetSplits& splits, const StepObserver& observer) {
  cfg.validate();
  const ValidationSample sample = sample_validation(splits, cfg.val_images, cfg.val_batch, cfg.seed);
  Graph graph = trained;
  PruneTrajectory traj;
  traj.test_size = splits.test.size();
  traj.initial_test_top1 = evaluate_top1(graph, splits.test);
  for (std::size_t step = 1;; ++step) {
    const std::optional<StepOutcome> outcome = prune_step(graph, cfg, sample);
    if (!outcome) {
      traj.stop = StopReason::Exhausted;
      break;
    }
    StepRecord rec;
    rec.step = step;
    rec.pruned = outcome->chosen;
    rec.winning_metric = outcome->winning_metric;
    rec.conv_removed_pct = conv_weight_stats(graph.weights()).removed_pct;
    rec.test_top1 = evaluate_top1(graph, splits.test);
    rec.val_loss = validation_loss(graph, sample);
    traj.steps.push_back(rec);
    if (observer) observer(rec, *outcome, graph);
    if (!within_drop(rec.test_top1, traj.initial_test_top1, cfg.max_test_acc_drop)) {
      traj.stop = StopReason::AccuracyDrop;
      break;
    }
  }
  return traj;
}

double weights_removed_at_drop(const PruneTrajectory& traj, double drop) {
  if (traj.steps.empty()) throw std::invalid_argument("weights_removed_at_drop: empty trajectory");
  double best = 0.0;
  for (const StepRecord& s : traj.steps) {
    if (within_drop(s.test_top1, traj.initial_test_top1, drop)) best = std::max(best, s.conv_removed_pct);
  }
  return best;
}

namespace {

constexpr const char* kCsvHeader = "step,layer,channel,winning_metric,conv_removed_pct,test_top1,val_loss";

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Undo the 6-decimal rounding when the test-set size is known.
double snap_accuracy(double acc, std::size_t test_size) {
  if (test_size == 0) return acc;
  const double n = static_cast<double>(test_size);
  return std::round(acc * n) / n;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const PruneTrajectory& traj, const Metadata& meta) {
  out << "# chanprune trajectory\n";
  for (const auto& [k, v] : meta) out << "# " << k << " = " << v << '\n';
  out << "# initial_test_top1 = " << fixed6(traj.initial_test_top1) << '\n';
  out << "# test_size = " << traj.test_size << '\n';
  out << "# stop_reason = " << stop_reason_name(traj.stop) << '\n';
  out << kCsvHeader << '\n';
  for (const StepRecord& s : traj.steps) {
    out << s.step << ',' << s.pruned.layer << ',' << s.pruned.channel << ',' << s.winning_metric << ','
        << fixed6(s.conv_removed_pct) << ',' << fixed6(s.test_top1) << ',' << fixed6(s.val_loss) << '\n';
  }
}

PruneTrajectory read_trajectory_csv(std::istream& in, Metadata* meta) {
  PruneTrajectory traj;
  std::string line;
  bool header_seen = false;
  bool have_initial = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 3);
      if (key == "initial_test_top1") {
        traj.initial_test_top1 = std::stod(value);
        have_initial = true;
      } else if (key == "test_size") {
        traj.test_size = std::stoul(value);
      } else if (key == "stop_reason") {
        traj.stop = value == "accuracy_drop" ? StopReason::AccuracyDrop : StopReason::Exhausted;
      } else if (meta) {
        meta->emplace_back(key, value);
      }
      continue;
    }
    if (!header_seen) {
      if (line != kCsvHeader) throw FormatError("trajectory CSV: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::istringstream is(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(is, field, ',')) f.push_back(field);
    if (f.size() != 7) throw FormatError("trajectory CSV: line " + std::to_string(line_no) + " has " +
                                         std::to_string(f.size()) + " fields");
    StepRecord s;
    try {
      s.step = std::stoul(f[0]);
      s.pruned = {std::stoul(f[1]), std::stoul(f[2])};
      s.winning_metric = f[3];
      s.conv_removed_pct = std::stod(f[4]);
      s.test_top1 = std::stod(f[5]);
      s.val_loss = std::stod(f[6]);
    } catch (const std::exception&) {
      throw FormatError("trajectory CSV: bad number on line " + std::to_string(line_no));
    }
    traj.steps.push_back(s);
  }
  if (!header_seen) throw FormatError("trajectory CSV: missing column header");
  if (!have_initial) throw FormatError("trajectory CSV: missing initial_test_top1");
  traj.initial_test_top1 = snap_accuracy(traj.initial_test_top1, traj.test_size);
  for (StepRecord& s : traj.steps) s.test_top1 = snap_accuracy(s.test_top1, traj.test_size);
  return traj;
}

std::string audit_line(const StepRecord& record, const StepOutcome& outcome) {
  using nlohmann::json;
  json j;
  j["step"] = record.step;
  j["chosen"] = {{"layer", outcome.chosen.layer}, {"channel", outcome.chosen.channel}};
  j["winning_metric"] = outcome.winning_metric;
  j["base_loss"] = outcome.base_loss;
  json cands = json::array();
  for (ChannelId c : outcome.candidates.channels) {
    json e = {{"layer", c.layer}, {"channel", c.channel},
              {"metric", metric_name(outcome.candidates.provenance.at(c))}};
    for (const SensitivityRecord& r : outcome.records) {
      if (r.channel == c) e["delta_loss"] = r.delta_loss;
    }
    cands.push_back(std::move(e));
  }
  j["candidates"] = std::move(cands);
  if (outcome.candidates.channels.empty()) j["score"] = outcome.chosen_score;
  j["conv_removed_pct"] = record.conv_removed_pct;
  j["test_top1"] = record.test_top1;
  return j.dump();
}

}  // namespace chanprune
