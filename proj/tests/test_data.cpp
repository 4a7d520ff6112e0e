#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"

#include "chanprune/dataset.h"
#include "chanprune/errors.h"

using namespace chanprune;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> cifar_record(std::uint8_t label, std::uint8_t fill) {
  std::vector<std::uint8_t> r(kCifarRecordBytes, fill);
  r[0] = label;
  return r;
}

// Writes `per_class` records for each of the ten classes, pixel bytes
// encoding the record number so images are distinguishable.
void write_fake_batch(const fs::path& path, std::size_t per_class, std::uint8_t salt) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t i = 0; i < per_class * 10; ++i) {
    auto rec = cifar_record(static_cast<std::uint8_t>(i % 10), static_cast<std::uint8_t>((i * 7 + salt) % 256));
    out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("chanprune_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("a single 3073-byte record parses to one example") {
  const auto bytes = cifar_record(7, 0);
  const Dataset d = parse_cifar10(bytes);
  CHECK(d.size() == 1);
  CHECK(d.labels[0] == 7);
  CHECK(d.image_shape == Shape{3, 32, 32});
}

TEST_CASE("byte 255 scales to pixel 1.0 and planes stay in channel order") {
  auto bytes = cifar_record(0, 0);
  bytes[1] = 255;              // red (0,0)
  bytes[1 + 1024 + 33] = 51;   // green (1,1)
  bytes[1 + 2048 + 1023] = 255;  // blue (31,31)
  const Dataset d = parse_cifar10(bytes);
  const auto img = d.image(0);
  CHECK(img[0] == 1.0f);
  CHECK(img[1024 + 33] == doctest::Approx(0.2f));
  CHECK(img[2048 + 1023] == 1.0f);
  CHECK(img[5] == 0.0f);
}

TEST_CASE("file length that is not a multiple of 3073 is malformed") {
  auto bytes = cifar_record(1, 0);
  bytes.push_back(0);
  CHECK_THROWS_AS(parse_cifar10(bytes), FormatError);
  auto bad_label = cifar_record(10, 0);
  CHECK_THROWS_AS(parse_cifar10(bad_label), FormatError);
}

TEST_CASE("a full-size data batch with every class yields 10000 examples") {
  const fs::path dir = scratch_dir("cifar_full");
  write_fake_batch(dir / "data_batch_1.bin", 1000, 1);
  write_fake_batch(dir / "test_batch.bin", 10, 2);
  const DatasetSplits s = load_cifar10(dir, {});
  CHECK(s.train.size() + s.val_pool.size() == 10000);
  CHECK(s.val_pool.size() == 1000);
  CHECK(s.test.size() == 100);
  CHECK(s.num_classes == 10);
}

TEST_CASE("class subset is filtered, capped and remapped densely") {
  const fs::path dir = scratch_dir("cifar_subset");
  write_fake_batch(dir / "data_batch_1.bin", 20, 3);
  write_fake_batch(dir / "data_batch_2.bin", 20, 4);
  write_fake_batch(dir / "test_batch.bin", 10, 5);
  CifarOptions opt;
  opt.class_subset = {7, 2, 5};
  opt.max_per_class = 30;
  opt.max_test_per_class = 4;
  opt.val_fraction = 0.2;
  opt.seed = 9;
  const DatasetSplits s = load_cifar10(dir, opt);
  CHECK(s.num_classes == 3);
  CHECK(s.train.size() == 3 * 24);
  CHECK(s.val_pool.size() == 3 * 6);
  CHECK(s.test.size() == 3 * 4);
  for (const Dataset* d : {&s.train, &s.val_pool, &s.test}) {
    for (int y : d->labels) CHECK((y >= 0 && y < 3));
  }
  std::set<std::size_t> train_idx(s.train.source_index.begin(), s.train.source_index.end());
  for (std::size_t i : s.val_pool.source_index) CHECK(!train_idx.contains(i));

  const DatasetSplits again = load_cifar10(dir, opt);
  CHECK(again.train.pixels == s.train.pixels);
  CHECK(again.val_pool.source_index == s.val_pool.source_index);

  opt.class_subset = {1, 11};
  CHECK_THROWS_AS(load_cifar10(dir, opt), ConfigError);
}

TEST_CASE("synthetic data is deterministic, balanced and in range") {
  const DatasetSplits a = synth_dataset(4, 400, 12, 77);
  const DatasetSplits b = synth_dataset(4, 400, 12, 77);
  CHECK(a.train.pixels == b.train.pixels);
  CHECK(a.test.labels == b.test.labels);
  for (float v : a.train.pixels) CHECK((v >= 0.0f && v <= 1.0f));

  const Dataset two = synth_examples(2, 200, 8, 3);
  CHECK(std::count(two.labels.begin(), two.labels.end(), 0) == 100);
  CHECK(std::count(two.labels.begin(), two.labels.end(), 1) == 100);

  std::set<std::size_t> seen;
  for (const Dataset* d : {&a.train, &a.val_pool, &a.test}) {
    for (std::size_t i : d->source_index) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 400);
  CHECK(synth_dataset(4, 400, 12, 78).train.pixels != a.train.pixels);
}

TEST_CASE("synthetic generator rejects degenerate requests") {
  CHECK_THROWS_AS(synth_dataset(1, 100, 8, 0), std::invalid_argument);
  CHECK_THROWS_AS(synth_dataset(5, 4, 8, 0), std::invalid_argument);
}

TEST_CASE("validation sample batch count and determinism") {
  const DatasetSplits s = synth_dataset(4, 2000, 8, 1);
  const ValidationSample v = sample_validation(s, 256, 32, 5);
  CHECK(v.n_val() == 8);
  CHECK(v.total_images == 256);
  CHECK(std::set<std::size_t>(v.indices.begin(), v.indices.end()).size() == 256);
  CHECK(sample_validation(s, 32, 32, 5).n_val() == 1);
  CHECK(sample_validation(s, 256, 32, 5).indices == v.indices);
  CHECK(sample_validation(s, 256, 32, 6).indices != v.indices);
  CHECK_THROWS_AS(sample_validation(s, 100, 32, 5), std::invalid_argument);
  CHECK_THROWS_AS(sample_validation(s, s.val_pool.size() + 32, 32, 5), std::invalid_argument);
}

}  // TEST_SUITE
