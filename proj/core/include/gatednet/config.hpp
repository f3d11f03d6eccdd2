#pragma once

#include <optional>
#include <string>

#include "gatednet/trainer.hpp"

namespace gatednet {

// Data section of a run configuration.
struct DataSpec {
  enum class Kind { kMnist, kBlobs };
  Kind kind = Kind::kBlobs;
  std::string dir;  // MNIST IDX directory; empty falls back to GATEDNET_DATA_DIR
  bool standardize = false;
  // blobs parameters
  std::size_t blobs_train_per_class = 500;
  std::size_t blobs_test_per_class = 100;
  int blobs_classes = 4;
  std::size_t blobs_dims = 32;
  double blobs_spread = 1.0;
  std::uint64_t blobs_seed = 9;
};

// A full run configuration file: sections model / variant / optimizer /
// train / schedule / rigl / dropout / prune / data / output. Unknown keys are
// rejected; everything has an overridable default.
struct RunConfig {
  TrainConfig train;
  DataSpec data;
  std::string out_dir = "runs/out";

  bool schedule_explicit = false;  // schedule section present in the file
};

RunConfig default_run_config();

// Parse + validate. Throws ConfigError with a field-level message on unknown
// keys, wrong types, or invalid values; ParseError on malformed JSON.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Canonical serialization (sorted keys, round-trip-exact numbers);
// parse(serialize(parse(x))) is a fixed point.
std::string serialize_run_config(const RunConfig& cfg);

// Loads data per spec: MNIST IDX from cfg.dir / GATEDNET_DATA_DIR, or
// deterministic blobs. Returns {train, test}. Missing MNIST files throw
// ConfigError naming the path.
std::pair<Dataset, Dataset> load_data(const DataSpec& spec);

// True when the four MNIST IDX files (optionally .gz) exist under dir.
bool mnist_available(const std::string& dir);

}  // namespace gatednet
