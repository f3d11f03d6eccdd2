// Microbenchmarks for the training hot path at the reference 784-256-10
// scale. Throughput here bounds the desk-scale MNIST runtime.

#include <benchmark/benchmark.h>

#include "gatednet/gates.hpp"
#include "gatednet/nn.hpp"
#include "gatednet/rigl.hpp"
#include "gatednet/rng.hpp"

using namespace gatednet;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

GatedMlp reference_model(bool gated) {
  Rng rng(1);
  GatedMlp model;
  model.layers.resize(2);
  model.layers[0].W = Matrix(256, 784);
  he_uniform_init(model.layers[0].W, rng);
  model.layers[0].b.assign(256, 0.0);
  model.layers[1].W = Matrix(10, 256);
  he_uniform_init(model.layers[1].W, rng);
  model.layers[1].b.assign(10, 0.0);
  if (gated) {
    GateParams in_gate;
    in_gate.mode = GateMode::kStatic;
    in_gate.static_logits.assign(784, 0.9);
    model.input_gate = in_gate;
    GateParams hid;
    hid.mode = GateMode::kStatic;
    hid.static_logits.assign(256, 0.9);
    model.layers[0].gate = hid;
  }
  return model;
}

void BM_AffineForward784x256(benchmark::State& state) {
  Rng rng(2);
  const Matrix W = random_matrix(256, 784, rng);
  const Matrix h = random_matrix(128, 784, rng);
  const std::vector<double> b(256, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(affine_forward(W, b, h));
  }
  state.SetItemsProcessed(state.iterations() * 128 * 256 * 784);
}
BENCHMARK(BM_AffineForward784x256);

void BM_DenseForwardBatch128(benchmark::State& state) {
  const GatedMlp model = reference_model(false);
  Rng rng(3);
  const Matrix x = random_matrix(128, 784, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gated_forward(model, x, GatePolicy{}));
  }
}
BENCHMARK(BM_DenseForwardBatch128);

void BM_GatedForwardBatch128(benchmark::State& state) {
  const GatedMlp model = reference_model(true);
  Rng rng(3);
  const Matrix x = random_matrix(128, 784, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gated_forward(model, x, GatePolicy{}));
  }
}
BENCHMARK(BM_GatedForwardBatch128);

void BM_SteBackwardBatch128(benchmark::State& state) {
  const GatedMlp model = reference_model(true);
  Rng rng(4);
  const Matrix x = random_matrix(128, 784, rng);
  const GateTrace trace = gated_forward(model, x, GatePolicy{});
  std::vector<int> labels(128);
  for (int& l : labels) l = static_cast<int>(rng.below(10));
  const auto xent = softmax_cross_entropy(trace.logits(), labels);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ste_backward(model, trace, xent.dlogits));
  }
}
BENCHMARK(BM_SteBackwardBatch128);

void BM_RiglUpdate784x256(benchmark::State& state) {
  Rng rng(5);
  const Matrix W = random_matrix(256, 784, rng);
  const Matrix grad = random_matrix(256, 784, rng);
  const SparseMask mask = init_sparse_mask(256, 784, 0.5, rng);
  const std::size_t k = mask.budget / 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rigl_update(W, grad, mask, k));
  }
}
BENCHMARK(BM_RiglUpdate784x256);

void BM_SoftmaxXentBatch128(benchmark::State& state) {
  Rng rng(6);
  const Matrix logits = random_matrix(128, 10, rng);
  std::vector<int> labels(128);
  for (int& l : labels) l = static_cast<int>(rng.below(10));
  for (auto _ : state) {
    benchmark::DoNotOptimize(softmax_cross_entropy(logits, labels));
  }
}
BENCHMARK(BM_SoftmaxXentBatch128);

}  // namespace

BENCHMARK_MAIN();
