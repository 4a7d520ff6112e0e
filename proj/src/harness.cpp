#include "chanprune/harness.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

#include "chanprune/checkpoint.h"
#include "chanprune/errors.h"
#include "chanprune/graph.h"
#include "chanprune/io_util.h"

namespace chanprune {

namespace fs = std::filesystem;

namespace {

constexpr ConfigKey kKeys[] = {
    {"dataset", "synth", "synth | cifar10"},
    {"data_dir", "", "directory holding the CIFAR-10 binary batches"},
    {"classes", "", "comma-separated CIFAR-10 class ids to keep; empty keeps all"},
    {"max_per_class", "0", "cap on training-source images per class (0 = no cap)"},
    {"max_test_per_class", "0", "cap on test images per class (0 = no cap)"},
    {"val_fraction", "0.1", "share of CIFAR-10 training images held out for pruning decisions"},
    {"synth_classes", "4", "number of synthetic classes"},
    {"synth_examples", "2000", "synthetic examples in total, before splitting"},
    {"synth_image_size", "16", "synthetic image height and width"},
    {"synth_channels", "3", "synthetic image channels"},
    {"synth_noise", "0.2", "std-dev of synthetic pixel noise"},
    {"synth_train_fraction", "0.6", "synthetic share used for training"},
    {"synth_val_fraction", "0.2", "synthetic share in the validation pool"},
    {"data_seed", "1", "seed for dataset generation and splits"},
    {"net", "toy-a", "architecture id"},
    {"lr", "0.05", "initial learning rate"},
    {"momentum", "0.9", "SGD momentum"},
    {"weight_decay", "0.0005", "L2 weight decay on weights"},
    {"batch_size", "32", "training batch size"},
    {"epochs", "20", "training epochs"},
    {"train_seed", "1", "weight-init and shuffling seed"},
    {"lr_decay_every", "10", "epochs between learning-rate decays (0 = never)"},
    {"lr_decay_factor", "0.1", "learning-rate multiplier at each decay"},
    {"metrics", "mean-sq-weights,mean-activations,avg-gradients,taylor1,fisher2,composite",
     "metrics compared by the compare command"},
    {"k_values", "5", "oracle candidate counts for composite runs"},
    {"constituents", "mean-sq-weights,mean-activations,avg-gradients,taylor1,fisher2",
     "metrics the oracle draws candidates from, in round-robin order"},
    {"max_acc_drop", "0.05", "stop once test top-1 falls more than this below the start"},
    {"val_images", "256", "images in the pruning validation sample"},
    {"val_batch", "32", "validation batch size"},
    {"replicates", "5", "validation-sample seeds per (metric, k)"},
    {"seed_base", "1", "first validation-sample seed"},
    {"threads", "1", "concurrent oracle probes per step"},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as a number");
  }
  return out;
}

std::string valid_metric_names() {
  std::string s;
  for (MetricKind m : kAllMetrics) s += std::string(metric_name(m)) + ", ";
  return s + "composite";
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void write_metadata(std::ostream& out, const Metadata& meta) {
  for (const auto& [k, v] : meta) out << "# " << k << " = " << v << '\n';
}

}  // namespace

std::span<const ConfigKey> config_keys() { return kKeys; }

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::set<std::string_view> known;
  for (const ConfigKey& k : kKeys) known.insert(k.name);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    if (!out.emplace(key, value).second) throw ConfigError("config key '" + key + "' given twice");
  }
  return out;
}

DatasetSplits load_dataset(const DatasetSpec& spec) {
  if (spec.kind == "synth") {
    return synth_dataset(spec.synth_classes, spec.synth_examples, spec.synth_image_size, spec.seed,
                         spec.synth);
  }
  if (spec.kind == "cifar10") {
    if (spec.dir.empty()) throw ConfigError("dataset = cifar10 needs config key 'data_dir'");
    if (!fs::is_directory(spec.dir)) {
      throw ConfigError("config key 'data_dir': '" + spec.dir.string() + "' is not a directory");
    }
    CifarOptions opts = spec.cifar;
    opts.seed = spec.seed;
    return load_cifar10(spec.dir, opts);
  }
  throw ConfigError("config key 'dataset': unknown dataset '" + spec.kind + "' (synth, cifar10)");
}

void check_metric_name(std::string_view name) {
  if (name == "composite" || parse_metric(name)) return;
  throw ConfigError("unknown metric '" + std::string(name) + "'; valid names: " + valid_metric_names());
}

ExperimentConfig make_experiment(const std::map<std::string, std::string>& values) {
  ExperimentConfig cfg;
  for (const ConfigKey& k : kKeys) cfg.entries[std::string(k.name)] = std::string(k.default_value);
  for (const auto& [k, v] : values) {
    if (!cfg.entries.contains(k)) throw ConfigError("unknown config key '" + k + "'");
    cfg.entries[k] = v;
  }
  const auto& e = cfg.entries;
  auto str = [&](const char* key) { return e.at(key); };
  auto size = [&](const char* key) { return parse_number<std::size_t>(key, e.at(key)); };
  auto u64 = [&](const char* key) { return parse_number<std::uint64_t>(key, e.at(key)); };
  auto real = [&](const char* key) { return parse_number<double>(key, e.at(key)); };

  DatasetSpec& d = cfg.data;
  d.kind = str("dataset");
  d.dir = str("data_dir");
  for (const std::string& c : split_list(str("classes"))) d.cifar.class_subset.push_back(parse_number<int>("classes", c));
  d.cifar.max_per_class = size("max_per_class");
  d.cifar.max_test_per_class = size("max_test_per_class");
  d.cifar.val_fraction = real("val_fraction");
  d.synth_classes = size("synth_classes");
  d.synth_examples = size("synth_examples");
  d.synth_image_size = size("synth_image_size");
  d.synth.channels = size("synth_channels");
  d.synth.noise = static_cast<float>(real("synth_noise"));
  d.synth.train_fraction = real("synth_train_fraction");
  d.synth.val_fraction = real("synth_val_fraction");
  d.seed = u64("data_seed");
  if (d.kind != "synth" && d.kind != "cifar10") {
    throw ConfigError("config key 'dataset': unknown dataset '" + d.kind + "' (synth, cifar10)");
  }

  cfg.net = str("net");
  const std::vector<std::string> ids = architecture_ids();
  if (std::find(ids.begin(), ids.end(), cfg.net) == ids.end()) {
    std::string known;
    for (const std::string& id : ids) known += (known.empty() ? "" : ", ") + id;
    throw ConfigError("config key 'net': unknown architecture '" + cfg.net + "' (" + known + ")");
  }

  TrainConfig& t = cfg.train;
  t.learning_rate = real("lr");
  t.momentum = real("momentum");
  t.weight_decay = real("weight_decay");
  t.batch_size = size("batch_size");
  t.epochs = size("epochs");
  t.seed = u64("train_seed");
  t.lr_decay_every = size("lr_decay_every");
  t.lr_decay_factor = real("lr_decay_factor");
  t.validate();

  cfg.metrics = split_list(str("metrics"));
  if (cfg.metrics.empty()) throw ConfigError("config key 'metrics' is empty");
  for (const std::string& m : cfg.metrics) check_metric_name(m);
  cfg.k_values.clear();
  for (const std::string& k : split_list(str("k_values"))) {
    cfg.k_values.push_back(parse_number<std::size_t>("k_values", k));
    if (cfg.k_values.back() == 0) throw ConfigError("config key 'k_values': k must be >= 1");
  }
  if (cfg.k_values.empty()) throw ConfigError("config key 'k_values' is empty");
  for (const std::string& m : split_list(str("constituents"))) {
    const auto kind = parse_metric(m);
    if (!kind) throw ConfigError("config key 'constituents': unknown metric '" + m + "'");
    cfg.constituents.push_back(*kind);
  }
  OracleConfig{cfg.k_values.front(), cfg.constituents}.validate();

  cfg.max_acc_drop = real("max_acc_drop");
  cfg.val_images = size("val_images");
  cfg.val_batch = size("val_batch");
  cfg.replicates = size("replicates");
  if (cfg.replicates == 0) throw ConfigError("config key 'replicates' must be >= 1");
  cfg.seed_base = u64("seed_base");
  cfg.threads = size("threads");
  cfg.prune_config("composite", cfg.k_values.front(), cfg.seed_base).validate();
  return cfg;
}

ExperimentConfig load_experiment(const fs::path& file) {
  if (!fs::exists(file)) throw ConfigError("config file '" + file.string() + "' not found");
  return make_experiment(parse_config_text(read_file(file)));
}

NetworkDef ExperimentConfig::network(const DatasetSplits& splits) const {
  return make_architecture(net, splits.train.image_shape, splits.num_classes);
}

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < replicates; ++i) out.push_back(seed_base + i);
  return out;
}

PruneConfig ExperimentConfig::prune_config(std::string_view metric, std::size_t k,
                                           std::uint64_t seed) const {
  check_metric_name(metric);
  PruneConfig p;
  if (metric == "composite") {
    p.metric = OracleConfig{k, constituents};
  } else {
    p.metric = *parse_metric(metric);
  }
  p.max_test_acc_drop = max_acc_drop;
  p.seed = seed;
  p.val_images = val_images;
  p.val_batch = val_batch;
  p.threads = threads;
  return p;
}

Metadata ExperimentConfig::metadata() const {
  Metadata meta{{"version", std::string(kVersion)}};
  for (const ConfigKey& k : kKeys) meta.emplace_back("config." + std::string(k.name), entries.at(std::string(k.name)));
  return meta;
}

std::string trajectory_file_name(std::string_view net, std::string_view metric, std::size_t k,
                                 std::uint64_t seed) {
  return std::string(net) + "_" + std::string(metric) + "_" + std::to_string(k) + "_" +
         std::to_string(seed) + ".csv";
}

Interval mean_interval(std::span<const double> values, double level) {
  if (values.empty()) throw std::invalid_argument("mean_interval: no values");
  Interval out;
  out.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(out.n - 1));
  const boost::math::students_t dist(static_cast<double>(out.n - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - level) / 2.0));
  out.half_width = t * sd / std::sqrt(static_cast<double>(out.n));
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<std::pair<Metadata, PruneTrajectory>>& runs,
                                  double drop) {
  auto lookup = [](const Metadata& meta, std::string_view key) -> std::string {
    for (const auto& [k, v] : meta) {
      if (k == key) return v;
    }
    throw FormatError("trajectory metadata lacks '" + std::string(key) + "'");
  };
  // Sort key: constituent position in the fixed order, composite after them by k.
  std::map<std::pair<std::size_t, std::size_t>, SummaryRow> groups;
  for (const auto& [meta, traj] : runs) {
    const std::string metric = lookup(meta, "metric");
    const std::size_t k = std::stoul(lookup(meta, "k"));
    std::size_t order = kAllMetrics.size();
    if (const auto m = parse_metric(metric)) {
      order = static_cast<std::size_t>(std::find(kAllMetrics.begin(), kAllMetrics.end(), *m) - kAllMetrics.begin());
    } else if (metric != "composite") {
      throw FormatError("trajectory has unknown metric '" + metric + "'");
    }
    SummaryRow& row = groups[{order, k}];
    row.metric = metric;
    row.k = k;
    row.seeds.push_back(std::stoull(lookup(meta, "seed")));
    row.removed_pct.push_back(traj.steps.empty() ? 0.0 : weights_removed_at_drop(traj, drop));
  }
  std::vector<SummaryRow> rows;
  for (auto& [key, row] : groups) {
    // keep per-seed values in seed order so the output does not depend on directory order
    std::vector<std::size_t> idx(row.seeds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return row.seeds[a] < row.seeds[b]; });
    SummaryRow sorted{row.metric, row.k, {}, {}, {}};
    for (std::size_t i : idx) {
      sorted.seeds.push_back(row.seeds[i]);
      sorted.removed_pct.push_back(row.removed_pct[i]);
    }
    sorted.interval = mean_interval(sorted.removed_pct);
    rows.push_back(std::move(sorted));
  }
  return rows;
}

std::string format_summary_csv(const std::vector<SummaryRow>& rows, const Metadata& meta) {
  std::ostringstream out;
  out << "# chanprune summary\n";
  write_metadata(out, meta);
  for (const SummaryRow& r : rows) {
    if (!r.interval.half_width) {
      out << "# notice: " << r.metric << " k=" << r.k << " has fewer than 2 seeds; interval omitted\n";
    }
  }
  out << "metric,k,seeds,mean_removed_pct,ci95_half_width,values\n";
  for (const SummaryRow& r : rows) {
    out << r.metric << ',' << r.k << ',' << r.interval.n << ',' << fixed(r.interval.mean, 6) << ','
        << (r.interval.half_width ? fixed(*r.interval.half_width, 6) : "") << ',';
    for (std::size_t i = 0; i < r.removed_pct.size(); ++i) {
      out << (i ? ";" : "") << fixed(r.removed_pct[i], 6);
    }
    out << '\n';
  }
  return out.str();
}

std::string format_summary_text(const std::vector<SummaryRow>& rows, double drop) {
  std::ostringstream out;
  out << "Conv weights removed (%) at a " << fixed(drop * 100.0, 1) << "% top-1 drop\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %4s %6s %10s %10s\n", "metric", "k", "seeds", "mean", "ci95");
  out << buf;
  for (const SummaryRow& r : rows) {
    const std::string hw = r.interval.half_width ? "+/- " + fixed(*r.interval.half_width, 2) : "n/a";
    std::snprintf(buf, sizeof buf, "%-18s %4zu %6zu %10.2f %10s\n", r.metric.c_str(), r.k, r.interval.n,
                  r.interval.mean, hw.c_str());
    out << buf;
  }
  for (const SummaryRow& r : rows) {
    if (!r.interval.half_width) {
      out << "notice: " << r.metric << " k=" << r.k << " has fewer than 2 seeds; interval omitted\n";
    }
  }
  return out.str();
}

// --- commands --------------------------------------------------------------

fs::path cmd_train(const TrainArgs& args, std::ostream& log) {
  ExperimentConfig cfg = load_experiment(args.config);
  if (args.seed) {
    cfg.train.seed = *args.seed;
    cfg.entries["train_seed"] = std::to_string(*args.seed);
  }
  const DatasetSplits splits = load_dataset(cfg.data);
  const NetworkDef net = cfg.network(splits);
  log << "training " << net.name << " on " << splits.train.size() << " images, seed " << cfg.train.seed << '\n';
  const TrainResult result = train(net, splits, cfg.train, [&](const EpochLog& e) {
    log << "epoch " << e.epoch << " loss " << fixed(e.train_loss, 4) << " test_top1 " << fixed(e.test_acc, 4)
        << '\n';
  });
  const std::string stem = net.name + "_train" + std::to_string(cfg.train.seed);
  const fs::path ckpt = args.out / (stem + ".ckpt");
  save_checkpoint(ckpt, net, result.weights);

  std::ostringstream text;
  text << "# chanprune training log\n";
  write_metadata(text, cfg.metadata());
  text << "# plateaued = " << (result.plateaued ? "yes" : "no") << '\n';
  text << format_training_log(result.history);
  write_file_atomic(args.out / (stem + ".log"), text.str());

  const double acc = result.history.empty() ? 0.0 : result.history.back().test_acc;
  log << "final test top-1 " << fixed(acc, 4) << " (chance " << fixed(1.0 / static_cast<double>(splits.num_classes), 4)
      << ")\n";
  if (!result.plateaued) log << "warning: training loss had not plateaued\n";
  log << "checkpoint " << ckpt.string() << '\n';
  return ckpt;
}

namespace {

Graph load_trained(const ExperimentConfig& cfg, const DatasetSplits& splits, const fs::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const NetworkDef expected = cfg.network(splits);
  if (ck.net.name != expected.name || ck.net.input != expected.input ||
      ck.net.num_classes != expected.num_classes) {
    throw ConfigError("checkpoint '" + checkpoint.string() + "' holds " + ck.net.name +
                      ", which does not match the configured net/dataset (" + expected.name + ")");
  }
  if (cfg.val_images > splits.val_pool.size()) {
    throw ConfigError("config key 'val_images': " + std::to_string(cfg.val_images) +
                      " exceeds the validation pool of " + std::to_string(splits.val_pool.size()) + " images");
  }
  return Graph(std::move(ck.net), std::move(ck.weights));
}

fs::path run_one(const ExperimentConfig& cfg, const DatasetSplits& splits, const Graph& trained,
                 const std::string& metric, std::size_t k, std::uint64_t seed, const fs::path& checkpoint,
                 const fs::path& out_dir, std::ostream& log) {
  const PruneConfig pc = cfg.prune_config(metric, metric == "composite" ? k : 0, seed);
  const std::size_t file_k = pc.k();
  std::string audit;
  const PruneTrajectory traj =
      run_pruning(trained, pc, splits, [&](const StepRecord& rec, const StepOutcome& outcome, const Graph&) {
        audit += audit_line(rec, outcome);
        audit += '\n';
      });

  Metadata meta = cfg.metadata();
  meta.emplace_back("net", trained.net().name);
  meta.emplace_back("metric", metric);
  meta.emplace_back("k", std::to_string(file_k));
  meta.emplace_back("seed", std::to_string(seed));
  meta.emplace_back("max_acc_drop", fixed(pc.max_test_acc_drop, 6));
  meta.emplace_back("checkpoint", checkpoint.filename().string());
  std::ostringstream csv;
  write_trajectory_csv(csv, traj, meta);

  const std::string name = trajectory_file_name(trained.net().name, metric, file_k, seed);
  const fs::path path = out_dir / name;
  write_file_atomic(path, csv.str());
  // JSON lines cannot carry comments, so the metadata is the first record.
  nlohmann::json header;
  for (const auto& [key, value] : meta) header["metadata"][key] = value;
  write_file_atomic(out_dir / (path.stem().string() + ".audit.jsonl"), header.dump() + "\n" + audit);
  log << name << ": " << traj.steps.size() << " steps, initial top-1 " << fixed(traj.initial_test_top1, 4)
      << ", stop " << stop_reason_name(traj.stop) << '\n';
  return path;
}

}  // namespace

std::vector<fs::path> cmd_prune(const PruneArgs& args, std::ostream& log) {
  check_metric_name(args.metric);
  ExperimentConfig cfg = load_experiment(args.config);
  if (args.max_acc_drop) {
    cfg.max_acc_drop = *args.max_acc_drop;
    cfg.entries["max_acc_drop"] = fixed(*args.max_acc_drop, 6);
  }
  const std::size_t k = args.k.value_or(cfg.k_values.front());
  const std::vector<std::uint64_t> seeds = args.seed ? std::vector<std::uint64_t>{*args.seed} : cfg.seeds();
  cfg.prune_config(args.metric, k, seeds.front()).validate();

  const DatasetSplits splits = load_dataset(cfg.data);
  const Graph trained = load_trained(cfg, splits, args.checkpoint);
  std::vector<fs::path> out;
  for (std::uint64_t seed : seeds) {
    out.push_back(run_one(cfg, splits, trained, args.metric, k, seed, args.checkpoint, args.out, log));
  }
  return out;
}

std::vector<SummaryRow> cmd_compare(const CompareArgs& args, std::ostream& log) {
  if (!(args.drop >= 0.0 && args.drop <= 1.0)) throw ConfigError("--drop must be in [0,1]");
  const ExperimentConfig cfg = load_experiment(args.config);

  if (args.checkpoint) {
    const DatasetSplits splits = load_dataset(cfg.data);
    const Graph trained = load_trained(cfg, splits, *args.checkpoint);
    for (const std::string& metric : cfg.metrics) {
      const std::vector<std::size_t> ks = metric == "composite" ? cfg.k_values : std::vector<std::size_t>{0};
      for (std::size_t k : ks) {
        for (std::uint64_t seed : cfg.seeds()) {
          if (fs::exists(args.in / trajectory_file_name(cfg.net, metric, k, seed))) continue;
          run_one(cfg, splits, trained, metric, k, seed, *args.checkpoint, args.in, log);
        }
      }
    }
  }

  if (!fs::is_directory(args.in)) throw ConfigError("--in '" + args.in.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(args.in)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<Metadata, PruneTrajectory>> runs;
  for (const fs::path& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::string first;
    std::getline(in, first);
    if (first != "# chanprune trajectory") continue;
    in.seekg(0);
    Metadata meta;
    PruneTrajectory traj = read_trajectory_csv(in, &meta);
    const auto net = std::find_if(meta.begin(), meta.end(), [](const auto& kv) { return kv.first == "net"; });
    if (net == meta.end() || net->second != cfg.net) continue;
    const auto run_drop =
        std::find_if(meta.begin(), meta.end(), [](const auto& kv) { return kv.first == "max_acc_drop"; });
    if (run_drop != meta.end() && std::stod(run_drop->second) + 1e-9 < args.drop &&
        traj.stop == StopReason::AccuracyDrop) {
      log << "notice: " << f.filename().string() << " stopped at a " << run_drop->second
          << " drop, smaller than --drop; its value is a lower bound\n";
    }
    runs.emplace_back(std::move(meta), std::move(traj));
  }
  if (runs.empty()) {
    throw std::runtime_error("no trajectories for net '" + cfg.net + "' in " + args.in.string());
  }
  std::vector<SummaryRow> rows = summarize(runs, args.drop);

  Metadata meta = cfg.metadata();
  meta.emplace_back("net", cfg.net);
  meta.emplace_back("drop", fixed(args.drop, 6));
  meta.emplace_back("trajectories", std::to_string(runs.size()));
  const std::string text = format_summary_text(rows, args.drop);
  std::ostringstream text_file;
  text_file << "# chanprune summary\n";
  write_metadata(text_file, meta);
  text_file << text;
  write_file_atomic(args.out / (cfg.net + "_summary.csv"), format_summary_csv(rows, meta));
  write_file_atomic(args.out / (cfg.net + "_summary.txt"), text_file.str());
  log << text;
  return rows;
}

}  // namespace chanprune
