#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "gatednet/matrix.hpp"
#include "gatednet/rigl.hpp"

namespace gatednet {

enum class GateMode { kStatic, kDynamic };

// How gates are applied in a forward pass: soft multiplies by p, hard by
// 1[p > theta], topk by an exact per-row budget mask.
enum class ExecMode { kSoft, kHard, kTopK };

// Gate parameters for one activation vector of width n. Static mode holds one
// learnable logit per unit; dynamic mode computes logits from the previous
// activation through a single affine map.
struct GateParams {
  GateMode mode = GateMode::kStatic;
  std::vector<double> static_logits;       // static: size n
  Matrix gate_W;                           // dynamic: n x n_prev
  std::vector<double> gate_b;              // dynamic: size n
  double tau = 1.0;                        // temperature, > 0
  double theta = 0.5;                      // hard threshold, in (0,1)
  std::optional<std::size_t> topk_k;       // per-layer budget for ExecMode::kTopK

  std::size_t width() const {
    return mode == GateMode::kStatic ? static_logits.size() : gate_b.size();
  }
};

// One affine layer. The optional gate applies to this layer's OUTPUT
// activation; the optional mask constrains W's connectivity.
struct GatedLayer {
  Matrix W;                       // n_out x n_in
  std::vector<double> b;          // n_out
  std::optional<GateParams> gate;
  std::optional<SparseMask> mask;
};

// An MLP whose activation vectors may each carry a gate. Vector 0 is the
// input x (gated by input_gate); vector v >= 1 is the output of layers[v-1].
// The final activation (the logits) is never gated: layers.back().gate must
// be absent.
struct GatedMlp {
  std::optional<GateParams> input_gate;
  std::vector<GatedLayer> layers;

  std::size_t layer_count() const { return layers.size(); }
  std::vector<std::size_t> dims() const;

  // Gate attached to activation vector v (0 = input), or nullptr.
  const GateParams* gate_at(std::size_t v) const;
  GateParams* gate_at(std::size_t v);

  // Sets tau/theta on every gate (the schedule drives these globally).
  void set_gate_temperature(double tau);
  void set_gate_threshold(double theta);

  void check_consistent() const;  // throws on shape-chain or gate-dim breaks
};

class Rng;

// Execution policy for gated_forward.
struct GatePolicy {
  ExecMode mode = ExecMode::kHard;
  double r_min = 0.0;                      // minimum per-row open rate, 0 disables
  std::optional<std::size_t> topk_floor;   // always keep this many units on
  std::optional<double> theta_override;    // deployment threshold; gates' own theta otherwise
  // Inverted dropout on hidden activations (train-time only). rate == 0
  // draws nothing and leaves the forward untouched.
  double dropout_rate = 0.0;
  Rng* dropout_rng = nullptr;
};

// Per-gate forward cache.
struct GateCache {
  std::size_t vec = 0;       // activation vector index
  Matrix z_g;                // raw gate logits
  Matrix p;                  // sigmoid(z_g / tau)
  Matrix mult;               // multiplier actually applied to the raw activation
  std::size_t floor_forced = 0;  // entries switched on by the activity floor
  bool topk_used = false;
};

// Everything gated_forward caches for ste_backward. z[l] is layer l+1's
// pre-activation; effective[v] is the (possibly gated) activation consumed
// by layer v+1; logits() is the ungated final pre-activation.
struct GateTrace {
  ExecMode mode = ExecMode::kHard;
  Matrix input;
  std::vector<Matrix> z;
  std::vector<Matrix> effective;
  std::vector<std::optional<GateCache>> gates;  // indexed by activation vector
  std::vector<Matrix> dropout;  // scaled keep masks per vector; empty when off

  const Matrix& logits() const { return z.back(); }
};

// --- gate primitives ---------------------------------------------------

// Static mode broadcasts the logit vector to every row; dynamic mode returns
// h_prev * gate_W^T + gate_b per sample.
Matrix gate_logits(const GateParams& gate, const Matrix& h_prev);
// Same, for a layer's own gate; throws ContractError when the gate is absent.
Matrix gate_logits(const GatedLayer& layer, const Matrix& h_prev);

// Elementwise sigmoid(z / tau); tau must be positive.
Matrix gate_probs(const Matrix& z_g, double tau);

// 1 iff p > theta, strict: the p == theta boundary maps to 0.
Matrix hard_gate(const Matrix& p, double theta);

// Exactly k ones per row at the k largest entries; ties break toward the
// lowest index.
Matrix topk_gate(const Matrix& p, std::size_t k);

// tau * logit(p0): the bias that opens a fresh gate at probability p0.
double init_gate_bias(double p0, double tau);

// Inverted dropout on one activation matrix: kept entries scale by
// 1/(1-rate); rate == 0 returns h unchanged without consuming rng draws.
Matrix apply_dropout(const Matrix& h, double rate, Rng& rng);

// --- model-level passes ------------------------------------------------

GateTrace gated_forward(const GatedMlp& model, const Matrix& x, const GatePolicy& policy);

struct GateGrads {
  std::vector<double> dstatic;   // static mode
  Matrix dgate_W;                // dynamic mode
  std::vector<double> dgate_b;
};

struct ModelGrads {
  // Dense layer gradients: dW includes entries under a mask so RigL can read
  // grow scores at inactive coordinates.
  std::vector<Matrix> dW;
  std::vector<std::vector<double>> db;
  std::vector<std::optional<GateGrads>> gates;  // indexed by activation vector
};

// Expected-usage penalty folded into the backward pass. With costs absent the
// per-entry term is lambda_g / (n * batch); with costs it is
// lambda_g * c_i / (sum(c) * batch).
struct PenaltySpec {
  double lambda_g = 0.0;
  // When set: one cost vector per activation vector (index 0 = input gate);
  // an empty inner vector means uniform weighting for that gate.
  const std::vector<std::vector<double>>* costs = nullptr;
};

// Backward pass matching a gated_forward trace. Forward used the discrete
// multiplier; gate-logit gradients take the straight-through surrogate
// dJ/dz_g = (dJ/dg + penalty) * p*(1-p)/tau. Weight gradients use the gated
// activations exactly as propagated.
ModelGrads ste_backward(const GatedMlp& model, const GateTrace& trace,
                        const Matrix& dlogits, const PenaltySpec& penalty = {});

}  // namespace gatednet
