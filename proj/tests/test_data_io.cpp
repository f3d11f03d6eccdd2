#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <doctest.h>

#include "gatednet/data.hpp"
#include "gatednet/error.hpp"
#include "helpers.hpp"

using namespace gatednet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gatednet_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("idx write-then-read round trip is exact") {
  TempDir dir;
  const std::size_t count = 7, rows = 3, cols = 4;
  std::vector<std::uint8_t> pixels(count * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 5);
  std::vector<std::uint8_t> labels = {0, 1, 2, 3, 4, 1, 0};

  for (bool gz : {false, true}) {
    const std::string suffix = gz ? ".gz" : "";
    write_idx_images(dir.file("imgs" + suffix), pixels, count, rows, cols, gz);
    write_idx_labels(dir.file("labs" + suffix), labels, gz);
    const Dataset ds = load_idx(dir.file("imgs" + suffix), dir.file("labs" + suffix));
    CHECK(ds.size() == count);
    CHECK(ds.dim() == rows * cols);
    CHECK(ds.class_count == 5);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      CHECK(ds.features.data[i] == pixels[i] / 255.0);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(ds.labels[i] == labels[i]);
  }
}

TEST_CASE("idx parser names the expected magic and byte offsets") {
  TempDir dir;
  std::vector<std::uint8_t> labels = {0, 1};
  write_idx_labels(dir.file("labs"), labels);
  // Labels file offered as an images file: wrong magic.
  CHECK_THROWS_WITH_AS(load_idx(dir.file("labs"), dir.file("labs")),
                       doctest::Contains("0x00000803"), ParseError);

  // Truncated image payload.
  std::vector<std::uint8_t> pixels(4 * 4, 9);
  write_idx_images(dir.file("imgs"), pixels, 1, 4, 4);
  {
    std::ifstream in(dir.file("imgs"), std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 6);
    std::ofstream out(dir.file("trunc"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  write_idx_labels(dir.file("lab1"), {3});
  CHECK_THROWS_WITH_AS(load_idx(dir.file("trunc"), dir.file("lab1")),
                       doctest::Contains("byte offset"), ParseError);

  // Image/label count disagreement.
  write_idx_labels(dir.file("lab2"), {3, 4});
  CHECK_THROWS_AS(load_idx(dir.file("imgs"), dir.file("lab2")), ParseError);

  CHECK_THROWS_AS(load_idx(dir.file("missing"), dir.file("lab1")), ParseError);
}

TEST_CASE("synth_blobs is deterministic and class-balanced") {
  Rng a(42), b(42), c(43);
  const Dataset d1 = synth_blobs(100, 2, 2, 0.5, a);
  const Dataset d2 = synth_blobs(100, 2, 2, 0.5, b);
  const Dataset d3 = synth_blobs(100, 2, 2, 0.5, c);
  CHECK(d1.size() == 200);
  CHECK(d1.features == d2.features);
  CHECK(d1.labels == d2.labels);
  CHECK_FALSE(d1.features == d3.features);

  CHECK_THROWS_AS(synth_blobs(10, 1, 4, 0.5, a), ValidationError);
  CHECK_THROWS_AS(synth_blobs(10, 3, 1, 0.5, a), ValidationError);
}

TEST_CASE("near-zero spread makes blobs linearly separable") {
  Rng rng(4);
  const Dataset all = synth_blobs(60, 4, 8, 1e-6, rng);
  auto [train, test] = split_per_class(all, 40);
  CHECK(train.size() == 160);
  CHECK(test.size() == 80);

  // Nearest-centroid classifier (a linear rule) from train centroids.
  Matrix centroids(4, 8, 0.0);
  std::vector<double> counts(4, 0.0);
  for (std::size_t s = 0; s < train.size(); ++s) {
    const int cls = train.labels[s];
    counts[cls] += 1.0;
    for (std::size_t j = 0; j < 8; ++j) centroids(cls, j) += train.features(s, j);
  }
  for (int cls = 0; cls < 4; ++cls) {
    for (std::size_t j = 0; j < 8; ++j) centroids(cls, j) /= counts[cls];
  }
  std::size_t correct = 0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    double best = 1e300;
    int arg = -1;
    for (int cls = 0; cls < 4; ++cls) {
      double dist = 0;
      for (std::size_t j = 0; j < 8; ++j) {
        const double d = test.features(s, j) - centroids(cls, j);
        dist += d * d;
      }
      if (dist < best) {
        best = dist;
        arg = cls;
      }
    }
    correct += arg == test.labels[s];
  }
  CHECK(correct == test.size());
}

TEST_CASE("batch partitioning keeps the tail and is determined by seed and epoch") {
  const auto batches = make_batches(10, 4, 99, 1);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);

  CHECK(make_batches(10, 4, 99, 1) == batches);
  CHECK(make_batches(10, 4, 99, 2) != batches);
  CHECK(make_batches(10, 4, 98, 1) != batches);

  CHECK(make_batches(5, 100, 1, 1).size() == 1);

  // Every sample appears exactly once per epoch.
  for (std::size_t epoch = 1; epoch <= 5; ++epoch) {
    std::vector<std::size_t> seen;
    for (const auto& b : make_batches(23, 7, 5, epoch)) {
      seen.insert(seen.end(), b.begin(), b.end());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> want(23);
    std::iota(want.begin(), want.end(), std::size_t{0});
    CHECK(seen == want);
  }

  CHECK_THROWS_AS(make_batches(10, 0, 1, 1), ValidationError);
}

TEST_CASE("standardization uses train statistics only") {
  Rng rng(11);
  Dataset train = synth_blobs(50, 2, 3, 1.0, rng);
  Dataset test = synth_blobs(20, 2, 3, 1.0, rng);
  const Matrix train_orig = train.features;
  const Matrix test_orig = test.features;

  standardize(train, test);

  // Recompute the statistics from the ORIGINAL train split and transform the
  // test split independently.
  const std::size_t d = 3;
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t s = 0; s < train_orig.rows; ++s) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += train_orig(s, j);
  }
  for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(train_orig.rows);
  for (std::size_t s = 0; s < train_orig.rows; ++s) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = train_orig(s, j) - mean[j];
      sd[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j)
    sd[j] = std::sqrt(sd[j] / static_cast<double>(train_orig.rows));

  for (std::size_t s = 0; s < test_orig.rows; ++s) {
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(std::abs(test.features(s, j) - (test_orig(s, j) - mean[j]) / sd[j]) <= 1e-12);
    }
  }

  // Standardized train split has mean ~0 and unit variance.
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t s = 0; s < train.size(); ++s) m += train.features(s, j);
    m /= static_cast<double>(train.size());
    for (std::size_t s = 0; s < train.size(); ++s) {
      const double dev = train.features(s, j) - m;
      v += dev * dev;
    }
    v /= static_cast<double>(train.size());
    CHECK(std::abs(m) <= 1e-10);
    CHECK(std::abs(v - 1.0) <= 1e-10);
  }
  CHECK(train.norm.kind == Normalization::Kind::kStandardize);
}
