#include <unistd.h>

#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "gatednet/checkpoint.hpp"
#include "gatednet/error.hpp"
#include "gatednet/rigl.hpp"
#include "helpers.hpp"

using namespace gatednet;
namespace fs = std::filesystem;

namespace {

std::string temp_file(const std::string& name) {
  return (fs::temp_directory_path() /
          ("gatednet_ckpt_" + std::to_string(::getpid()) + "_" + name))
      .string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint round trip preserves every field bit-exactly") {
  Rng rng(101);
  GatedMlp model = testutil::random_dense_model({9, 7, 5}, rng);

  GateParams input_gate;
  input_gate.mode = GateMode::kStatic;
  input_gate.static_logits = {0.1, -0.2, 0.3, 0.7, -1.5, 0.0, 2.25, -0.125, 0.5};
  input_gate.tau = 1.31;
  input_gate.theta = 0.66;
  model.input_gate = input_gate;

  GateParams hidden_gate;
  hidden_gate.mode = GateMode::kDynamic;
  hidden_gate.gate_W = testutil::random_matrix(7, 9, rng);
  hidden_gate.gate_b = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  hidden_gate.tau = 0.93;
  hidden_gate.theta = 0.72;
  hidden_gate.topk_k = 3;
  model.layers[0].gate = hidden_gate;

  model.layers[0].mask = init_sparse_mask(7, 9, 0.4, rng);
  model.layers[0].W = apply_mask(model.layers[0].W, *model.layers[0].mask);

  const std::string path = temp_file("roundtrip.bin");
  save_checkpoint(model, path);
  const GatedMlp loaded = load_checkpoint(path);

  REQUIRE(loaded.layer_count() == model.layer_count());
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    CHECK(loaded.layers[l].W == model.layers[l].W);
    CHECK(loaded.layers[l].b == model.layers[l].b);
    CHECK(loaded.layers[l].mask.has_value() == model.layers[l].mask.has_value());
    if (model.layers[l].mask) {
      CHECK(loaded.layers[l].mask->bits == model.layers[l].mask->bits);
      CHECK(loaded.layers[l].mask->budget == model.layers[l].mask->budget);
    }
  }
  REQUIRE(loaded.input_gate.has_value());
  CHECK(loaded.input_gate->static_logits == input_gate.static_logits);
  CHECK(loaded.input_gate->tau == input_gate.tau);
  CHECK(loaded.input_gate->theta == input_gate.theta);
  REQUIRE(loaded.layers[0].gate.has_value());
  CHECK(loaded.layers[0].gate->gate_W == hidden_gate.gate_W);
  CHECK(loaded.layers[0].gate->gate_b == hidden_gate.gate_b);
  CHECK(loaded.layers[0].gate->topk_k == hidden_gate.topk_k);

  // Save -> load -> save is byte-stable.
  const std::string path2 = temp_file("roundtrip2.bin");
  save_checkpoint(loaded, path2);
  CHECK(slurp(path) == slurp(path2));

  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("checkpoint loader rejects foreign and truncated files") {
  const std::string path = temp_file("garbage.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);

  Rng rng(7);
  GatedMlp model = testutil::random_dense_model({4, 3, 2}, rng);
  save_checkpoint(model, path);
  const std::string full = slurp(path);
  {
    std::ofstream out(path, std::ios::binary);
    out.write(full.data(), static_cast<std::streamsize>(full.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.bin")), IoError);
  fs::remove(path);
}
