#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gatednet/matrix.hpp"
#include "gatednet/rng.hpp"

namespace gatednet {

struct Normalization {
  enum class Kind { kNone, kScale255, kStandardize };
  Kind kind = Kind::kNone;
  // Populated for kStandardize; computed on the train split only.
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  Matrix features;          // N x D
  std::vector<int> labels;  // N, each in [0, class_count)
  int class_count = 0;
  std::string name;
  Normalization norm;

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

// Parses a big-endian IDX image/label pair (magics 0x00000803 / 0x00000801).
// Pixels are scaled to [0,1] by /255 and images flattened row-major. Gzip
// envelopes (magic 1f 8b) are inflated transparently. Parse failures throw
// ParseError naming the expected magic and byte offset.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Test/tooling writers for synthetic IDX files.
void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::size_t count, std::size_t rows, std::size_t cols,
                      bool gzip = false);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels,
                      bool gzip = false);

// Gaussian clusters at rng-drawn centers (uniform in [-3,3]^D); label =
// cluster id, n_per_class samples each, deterministic from the rng seed.
Dataset synth_blobs(std::size_t n_per_class, int classes, std::size_t dims,
                    double spread, Rng& rng);

// Splits a class-ordered blobs dataset into train/test with
// n_train_per_class going to train. Both halves come from the same centers.
std::pair<Dataset, Dataset> split_per_class(const Dataset& ds,
                                            std::size_t n_train_per_class);

// Epoch batching: a seeded shuffle fully determined by (seed, epoch); the
// last partial batch is kept. Returns index lists into the dataset.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch);

// In-place per-feature standardization using statistics of `train` only;
// the same statistics are applied to `test`.
void standardize(Dataset& train, Dataset& test);

// Extracts the rows of ds named by idx.
Matrix gather_rows(const Matrix& features, const std::vector<std::size_t>& idx);
std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& idx);

}  // namespace gatednet
