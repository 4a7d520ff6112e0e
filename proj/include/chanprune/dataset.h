#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "chanprune/tensor.h"

namespace chanprune {

/// In-memory labelled image set. Pixels are [0,1] floats in CHW order, one
/// image after another. source_index identifies each example within the
/// source it was drawn from, so splits can be checked for disjointness.
struct Dataset {
  Shape image_shape;  // {C,H,W}
  std::size_t num_classes = 0;
  std::vector<float> pixels;
  std::vector<int> labels;
  std::vector<std::size_t> source_index;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return shape_numel(image_shape); }
  std::span<const float> image(std::size_t i) const;
  void append(const Dataset& other, std::size_t i);
};

struct Batch {
  Tensor images;  // [N,C,H,W]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);
// Consecutive batches in dataset order; the last may be short.
std::vector<Batch> make_batches(const Dataset& data, std::size_t batch_size);

struct DatasetSplits {
  Dataset train;
  Dataset val_pool;  // carved from training-source images, disjoint from train
  Dataset test;
  std::size_t num_classes = 0;
};

/// Fixed set of validation batches used for every pruning decision of a run.
struct ValidationSample {
  std::vector<Batch> batches;
  std::vector<std::size_t> indices;  // positions in val_pool, in batch order
  std::uint64_t seed = 0;
  std::size_t total_images = 0;

  std::size_t n_val() const { return batches.size(); }
};

// --- CIFAR-10 binary format -------------------------------------------------

inline constexpr std::size_t kCifarImageBytes = 3072;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;

/// Parses one CIFAR-10 binary batch file: records of 1 label byte then
/// 1024 red, 1024 green and 1024 blue bytes (32x32 row-major).
Dataset read_cifar10_file(const std::filesystem::path& file);
Dataset parse_cifar10(std::span<const std::uint8_t> bytes, const std::string& what = "buffer");

struct CifarOptions {
  std::vector<int> class_subset;  // empty = all ten
  std::size_t max_per_class = 0;  // training-source cap; 0 = unlimited
  std::size_t max_test_per_class = 0;
  double val_fraction = 0.1;      // share of each class's training images in val_pool
  std::uint64_t seed = 0;
};

/// Loads data_batch_*.bin (training source) and test_batch.bin from `dir`,
/// keeps class_subset and remaps labels densely in subset order.
DatasetSplits load_cifar10(const std::filesystem::path& dir, const CifarOptions& options);

// --- synthetic oriented-bar images ----------------------------------------

struct SynthOptions {
  std::size_t channels = 3;
  float noise = 0.2f;
  double train_fraction = 0.6;
  double val_fraction = 0.2;  // remainder is test
};

/// All `size` examples, class-balanced (example i has label i % num_classes).
/// Each class is a bar at its own orientation, with random position, length,
/// width, colours, a clutter blob and Gaussian noise.
Dataset synth_examples(std::size_t num_classes, std::size_t size, std::size_t image_hw,
                       std::uint64_t seed, const SynthOptions& options = {});

/// Stratified train / val_pool / test split of synth_examples.
DatasetSplits synth_dataset(std::size_t num_classes, std::size_t size, std::size_t image_hw,
                            std::uint64_t seed, const SynthOptions& options = {});

/// Uniform sample of val_pool without replacement, cut into equal batches.
ValidationSample sample_validation(const DatasetSplits& splits, std::size_t total_images,
                                   std::size_t batch_size, std::uint64_t seed);

}  // namespace chanprune
