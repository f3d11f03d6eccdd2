#pragma once

#include <cstdint>
#include <vector>

#include "gatednet/gates.hpp"
#include "gatednet/matrix.hpp"

namespace gatednet {

// Per-affine-layer usage snapshot. alpha_* come from the gate on the
// activation vector this layer CONSUMES (1 when that vector is ungated);
// rho is the connection-mask density (1 when unmasked).
struct LayerUsage {
  double alpha_p = 1.0;
  double alpha_g = 1.0;
  double rho = 1.0;
  double fanin_fanout_product = 0.0;  // n_{l-1} * n_l
};

enum class AlphaKind { kP, kG };

// sum over gates of mean_i(batch-mean p_i). Throws ValidationError on an
// empty batch.
double usage_penalty(const std::vector<Matrix>& p_per_gate);

// sum over gates of sum_i(c_i * pbar_i) / sum_i(c_i). Costs must be positive
// and match widths.
double cost_weighted_penalty(const std::vector<Matrix>& p_per_gate,
                             const std::vector<std::vector<double>>& costs);

// Usage rows recomputed from a forward trace at the given threshold:
// alpha_p = mean(p), alpha_g = mean(1[p > theta]). One row per affine layer.
std::vector<LayerUsage> activation_ratios(const GatedMlp& model, const GateTrace& trace,
                                          double theta);

// Usage rows reflecting what the forward actually executed (floors included):
// alpha_g = mean of the applied multiplier in hard/topk mode.
std::vector<LayerUsage> executed_ratios(const GatedMlp& model, const GateTrace& trace);

// Unweighted mean of alpha over the layer list.
double compute_proxy(const std::vector<LayerUsage>& usages, AlphaKind kind);

// MAC-weighted mean: sum(alpha * n_{l-1} n_l) / sum(n_{l-1} n_l).
double relmac(const std::vector<LayerUsage>& usages, AlphaKind kind);

// sum(n_{l-1} n_l * rho * alpha) / sum(n_{l-1} n_l); reduces to relmac when
// rho == 1 everywhere and to the structural density when alpha == 1.
double relmac_fuse(const std::vector<LayerUsage>& usages, AlphaKind kind);

struct ParamFlopCounts {
  std::int64_t params = 0;       // sum(n_{l-1}*n_l + n_l)
  std::int64_t flops = 0;        // 2 * sum(n_{l-1}*n_l): 2x MACs, biases excluded
  std::int64_t gate_params = 0;  // sum of gated widths (static gate logits)
};

// Parameter/FLOP counting. The FLOPs convention is fixed to 2x MACs with
// biases excluded; that is the convention under which a 784-256-10 stack
// counts 203,530 params and 406,528 FLOPs.
ParamFlopCounts count_params_flops(const std::vector<std::size_t>& dims,
                                   const std::vector<std::size_t>& gated_widths);

}  // namespace gatednet
