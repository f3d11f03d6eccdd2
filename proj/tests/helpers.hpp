#pragma once

// Shared test utilities: parameter packing for finite-difference checks and
// an independent dense-forward reference.

#include <vector>

#include "gatednet/gates.hpp"
#include "gatednet/matrix.hpp"
#include "gatednet/nn.hpp"
#include "gatednet/rng.hpp"

namespace testutil {

using namespace gatednet;

// Flattens every trainable parameter (W, b, gate logits/net) in a fixed
// order.
inline std::vector<double> pack_params(const GatedMlp& model) {
  std::vector<double> out;
  for (const auto& layer : model.layers) {
    out.insert(out.end(), layer.W.data.begin(), layer.W.data.end());
    out.insert(out.end(), layer.b.begin(), layer.b.end());
  }
  for (std::size_t v = 0; v < model.layer_count(); ++v) {
    const GateParams* g = model.gate_at(v);
    if (!g) continue;
    if (g->mode == GateMode::kStatic) {
      out.insert(out.end(), g->static_logits.begin(), g->static_logits.end());
    } else {
      out.insert(out.end(), g->gate_W.data.begin(), g->gate_W.data.end());
      out.insert(out.end(), g->gate_b.begin(), g->gate_b.end());
    }
  }
  return out;
}

inline void unpack_params(GatedMlp& model, const std::vector<double>& flat) {
  std::size_t k = 0;
  for (auto& layer : model.layers) {
    for (double& v : layer.W.data) v = flat[k++];
    for (double& v : layer.b) v = flat[k++];
  }
  for (std::size_t v = 0; v < model.layer_count(); ++v) {
    GateParams* g = model.gate_at(v);
    if (!g) continue;
    if (g->mode == GateMode::kStatic) {
      for (double& x : g->static_logits) x = flat[k++];
    } else {
      for (double& x : g->gate_W.data) x = flat[k++];
      for (double& x : g->gate_b) x = flat[k++];
    }
  }
}

// Same flattening order as pack_params, over a gradient struct.
inline std::vector<double> pack_grads(const GatedMlp& model, const ModelGrads& grads) {
  std::vector<double> out;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    out.insert(out.end(), grads.dW[l].data.begin(), grads.dW[l].data.end());
    out.insert(out.end(), grads.db[l].begin(), grads.db[l].end());
  }
  for (std::size_t v = 0; v < model.layer_count(); ++v) {
    if (!model.gate_at(v)) continue;
    const GateGrads& gg = *grads.gates[v];
    if (model.gate_at(v)->mode == GateMode::kStatic) {
      out.insert(out.end(), gg.dstatic.begin(), gg.dstatic.end());
    } else {
      out.insert(out.end(), gg.dgate_W.data.begin(), gg.dgate_W.data.end());
      out.insert(out.end(), gg.dgate_b.begin(), gg.dgate_b.end());
    }
  }
  return out;
}

// Independent dense MLP forward: a plain affine/relu chain with no gating
// machinery.
inline Matrix dense_reference_forward(const GatedMlp& model, const Matrix& x) {
  Matrix h = x;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    h = affine_forward(model.layers[l].W, model.layers[l].b, h);
    if (l + 1 < model.layer_count()) h = relu(h);
  }
  return h;
}

// Random small model without gates.
inline GatedMlp random_dense_model(const std::vector<std::size_t>& dims, Rng& rng) {
  GatedMlp model;
  model.layers.resize(dims.size() - 1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    model.layers[l].W = Matrix(dims[l + 1], dims[l]);
    he_uniform_init(model.layers[l].W, rng);
    model.layers[l].b.resize(dims[l + 1]);
    for (double& v : model.layers[l].b) v = rng.uniform(-0.1, 0.1);
  }
  return model;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// Combined abs/rel closeness for gradient comparisons.
inline bool close_rel(double a, double b, double tol) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

}  // namespace testutil
