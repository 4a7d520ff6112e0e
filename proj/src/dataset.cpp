#include "chanprune/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "chanprune/errors.h"

namespace chanprune {

std::span<const float> Dataset::image(std::size_t i) const {
  const std::size_t n = image_size();
  return std::span<const float>(pixels).subspan(i * n, n);
}

void Dataset::append(const Dataset& other, std::size_t i) {
  const auto img = other.image(i);
  pixels.insert(pixels.end(), img.begin(), img.end());
  labels.push_back(other.labels[i]);
  source_index.push_back(other.source_index[i]);
}

namespace {

Dataset empty_like(const Dataset& d) {
  Dataset out;
  out.image_shape = d.image_shape;
  out.num_classes = d.num_classes;
  return out;
}

}  // namespace

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
  Shape shape{indices.size()};
  shape.insert(shape.end(), data.image_shape.begin(), data.image_shape.end());
  Batch b{Tensor(shape), {}};
  const std::size_t n = data.image_size();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto img = data.image(indices[k]);
    std::copy(img.begin(), img.end(), b.images.data() + k * n);
    b.labels.push_back(data.labels[indices[k]]);
  }
  return b;
}

std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<Batch> out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    out.push_back(make_batch(data, idx));
  }
  return out;
}

// --- CIFAR-10 ---------------------------------------------------------------

Dataset parse_cifar10(std::span<const std::uint8_t> bytes, const std::string& what) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("malformed CIFAR-10 file " + what + ": length " + std::to_string(bytes.size()) +
                      " is not a multiple of " + std::to_string(kCifarRecordBytes));
  }
  Dataset d;
  d.image_shape = {3, 32, 32};
  d.num_classes = 10;
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  d.pixels.resize(n * kCifarImageBytes);
  for (std::size_t r = 0; r < n; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw FormatError("malformed CIFAR-10 file " + what + ": record " + std::to_string(r) +
                        " has label " + std::to_string(rec[0]));
    }
    d.labels.push_back(rec[0]);
    d.source_index.push_back(r);
    float* dst = d.pixels.data() + r * kCifarImageBytes;
    for (std::size_t i = 0; i < kCifarImageBytes; ++i) dst[i] = rec[1 + i] / 255.0f;
  }
  return d;
}

Dataset read_cifar10_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open CIFAR-10 file " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_cifar10(bytes, file.string());
}

DatasetSplits load_cifar10(const std::filesystem::path& dir, const CifarOptions& options) {
  std::vector<int> subset = options.class_subset;
  if (subset.empty()) {
    for (int c = 0; c < 10; ++c) subset.push_back(c);
  }
  std::vector<int> remap(10, -1);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const int c = subset[i];
    if (c < 0 || c > 9) throw ConfigError("unknown CIFAR-10 class id " + std::to_string(c));
    if (remap[c] >= 0) throw ConfigError("duplicate CIFAR-10 class id " + std::to_string(c));
    remap[c] = static_cast<int>(i);
  }
  if (subset.size() < 2) throw ConfigError("class subset needs at least 2 classes");
  if (options.val_fraction < 0.0 || options.val_fraction >= 1.0) {
    throw ConfigError("val_fraction must be in [0,1)");
  }

  Dataset source;
  source.image_shape = {3, 32, 32};
  source.num_classes = 10;
  for (int b = 1; b <= 5; ++b) {
    const auto path = dir / ("data_batch_" + std::to_string(b) + ".bin");
    if (!std::filesystem::exists(path)) continue;
    Dataset part = read_cifar10_file(path);
    const std::size_t offset = source.size();
    for (std::size_t i = 0; i < part.size(); ++i) {
      part.source_index[i] += offset;
      source.append(part, i);
    }
  }
  if (source.size() == 0) throw FormatError("no data_batch_*.bin files in " + dir.string());
  const Dataset test_source = read_cifar10_file(dir / "test_batch.bin");

  std::mt19937_64 rng(options.seed);
  DatasetSplits splits;
  splits.num_classes = subset.size();
  auto relabel = [&](Dataset& d) {
    d.num_classes = subset.size();
    for (int& y : d.labels) y = remap[y];
  };

  // Per class: shuffle, cap, first val_fraction go to val_pool.
  std::vector<char> role(source.size(), 0);  // 0 unused, 1 train, 2 val
  for (int c : subset) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (source.labels[i] == c) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    if (options.max_per_class > 0 && idx.size() > options.max_per_class) idx.resize(options.max_per_class);
    const auto n_val = static_cast<std::size_t>(std::llround(options.val_fraction * idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) role[idx[k]] = k < n_val ? 2 : 1;
  }
  splits.train = empty_like(source);
  splits.val_pool = empty_like(source);
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (role[i] == 1) splits.train.append(source, i);
    if (role[i] == 2) splits.val_pool.append(source, i);
  }

  std::vector<std::size_t> per_class(10, 0);
  splits.test = empty_like(test_source);
  for (std::size_t i = 0; i < test_source.size(); ++i) {
    const int y = test_source.labels[i];
    if (remap[y] < 0) continue;
    if (options.max_test_per_class > 0 && per_class[y] >= options.max_test_per_class) continue;
    ++per_class[y];
    splits.test.append(test_source, i);
  }
  relabel(splits.train);
  relabel(splits.val_pool);
  relabel(splits.test);
  return splits;
}

// --- synthetic data ---------------------------------------------------------

Dataset synth_examples(std::size_t num_classes, std::size_t size, std::size_t image_hw,
                       std::uint64_t seed, const SynthOptions& options) {
  if (num_classes < 2) throw std::invalid_argument("synth_dataset: num_classes must be >= 2");
  if (size < num_classes) {
    throw std::invalid_argument("synth_dataset: size " + std::to_string(size) +
                                " is smaller than num_classes " + std::to_string(num_classes));
  }
  if (image_hw < 4) throw std::invalid_argument("synth_dataset: image_hw must be >= 4");
  if (options.channels == 0) throw std::invalid_argument("synth_dataset: channels must be >= 1");

  const std::size_t ch = options.channels;
  const double hw = static_cast<double>(image_hw);
  Dataset d;
  d.image_shape = {ch, image_hw, image_hw};
  d.num_classes = num_classes;
  d.pixels.resize(size * ch * image_hw * image_hw);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<float> noise(0.0f, options.noise);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::vector<double> fg(ch), bg(ch), blob(ch);
  for (std::size_t i = 0; i < size; ++i) {
    const int label = static_cast<int>(i % num_classes);
    const double theta = std::numbers::pi * label / static_cast<double>(num_classes) +
                         uniform(-0.12, 0.12);
    const double cx = hw / 2.0 + uniform(-hw / 5.0, hw / 5.0);
    const double cy = hw / 2.0 + uniform(-hw / 5.0, hw / 5.0);
    const double half_len = uniform(0.3, 0.5) * hw;
    const double width = uniform(0.8, 1.6);
    const double bx = uniform(0.0, hw), by = uniform(0.0, hw);
    const double blob_r = uniform(1.0, 2.0);
    for (std::size_t c = 0; c < ch; ++c) {
      bg[c] = uniform(0.0, 0.35);
      fg[c] = uniform(0.55, 1.0);
      blob[c] = uniform(0.3, 1.0);
    }
    const double ct = std::cos(theta), st = std::sin(theta);
    float* img = d.pixels.data() + i * ch * image_hw * image_hw;
    for (std::size_t y = 0; y < image_hw; ++y) {
      for (std::size_t x = 0; x < image_hw; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double across = -dx * st + dy * ct;
        const double along = std::abs(dx * ct + dy * st);
        double bar = std::exp(-across * across / (2.0 * width * width));
        if (along > half_len) bar *= std::exp(-(along - half_len) * (along - half_len) / 2.0);
        const double rx = x + 0.5 - bx, ry = y + 0.5 - by;
        const double spot = std::exp(-(rx * rx + ry * ry) / (2.0 * blob_r * blob_r));
        for (std::size_t c = 0; c < ch; ++c) {
          double v = bg[c] + (fg[c] - bg[c]) * bar;
          v = v + (blob[c] - v) * spot * 0.8;
          v += noise(rng);
          img[(c * image_hw + y) * image_hw + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    d.labels.push_back(label);
    d.source_index.push_back(i);
  }
  return d;
}

DatasetSplits synth_dataset(std::size_t num_classes, std::size_t size, std::size_t image_hw,
                            std::uint64_t seed, const SynthOptions& options) {
  if (options.train_fraction <= 0.0 || options.val_fraction < 0.0 ||
      options.train_fraction + options.val_fraction > 1.0) {
    throw std::invalid_argument("synth_dataset: split fractions must satisfy 0 < train, train + val <= 1");
  }
  const Dataset all = synth_examples(num_classes, size, image_hw, seed, options);
  DatasetSplits splits;
  splits.num_classes = num_classes;
  splits.train = empty_like(all);
  splits.val_pool = empty_like(all);
  splits.test = empty_like(all);

  std::vector<std::size_t> count(num_classes, 0), total(num_classes, 0);
  for (int y : all.labels) ++total[y];
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int y = all.labels[i];
    const std::size_t k = count[y]++;
    const auto n_train = static_cast<std::size_t>(std::llround(options.train_fraction * total[y]));
    const auto n_val = static_cast<std::size_t>(std::llround(options.val_fraction * total[y]));
    if (k < n_train) {
      splits.train.append(all, i);
    } else if (k < n_train + n_val) {
      splits.val_pool.append(all, i);
    } else {
      splits.test.append(all, i);
    }
  }
  return splits;
}

ValidationSample sample_validation(const DatasetSplits& splits, std::size_t total_images,
                                   std::size_t batch_size, std::uint64_t seed) {
  if (total_images == 0 || batch_size == 0) {
    throw std::invalid_argument("sample_validation: total_images and batch_size must be >= 1");
  }
  if (total_images % batch_size != 0) {
    throw std::invalid_argument("sample_validation: batch_size " + std::to_string(batch_size) +
                                " does not divide total_images " + std::to_string(total_images));
  }
  if (total_images > splits.val_pool.size()) {
    throw std::invalid_argument("sample_validation: requested " + std::to_string(total_images) +
                                " images but val_pool holds " + std::to_string(splits.val_pool.size()));
  }
  std::vector<std::size_t> order(splits.val_pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(total_images);

  ValidationSample s;
  s.seed = seed;
  s.total_images = total_images;
  s.indices = order;
  for (std::size_t start = 0; start < total_images; start += batch_size) {
    s.batches.push_back(make_batch(
        splits.val_pool, std::span<const std::size_t>(order).subspan(start, batch_size)));
  }
  return s;
}

}  // namespace chanprune
