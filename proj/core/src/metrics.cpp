#include "gatednet/metrics.hpp"

#include <numeric>

#include "gatednet/error.hpp"

namespace gatednet {

namespace {

// Batch-mean then unit-mean of one gate's p matrix.
double mean_of_batch_means(const Matrix& p) {
  if (p.rows == 0 || p.cols == 0) {
    throw ValidationError("usage penalty: empty batch");
  }
  double total = 0.0;
  for (double v : p.data) total += v;
  return total / static_cast<double>(p.rows * p.cols);
}

double pick_alpha(const LayerUsage& u, AlphaKind kind) {
  return kind == AlphaKind::kP ? u.alpha_p : u.alpha_g;
}

}  // namespace

double usage_penalty(const std::vector<Matrix>& p_per_gate) {
  if (p_per_gate.empty()) throw ValidationError("usage_penalty: no gated layers");
  double sum = 0.0;
  for (const Matrix& p : p_per_gate) sum += mean_of_batch_means(p);
  return sum;
}

double cost_weighted_penalty(const std::vector<Matrix>& p_per_gate,
                             const std::vector<std::vector<double>>& costs) {
  if (p_per_gate.empty()) throw ValidationError("cost_weighted_penalty: no gated layers");
  if (costs.size() != p_per_gate.size()) {
    throw ValidationError("cost_weighted_penalty: " + std::to_string(costs.size()) +
                          " cost vectors for " + std::to_string(p_per_gate.size()) +
                          " gates");
  }
  double sum = 0.0;
  for (std::size_t l = 0; l < p_per_gate.size(); ++l) {
    const Matrix& p = p_per_gate[l];
    const auto& c = costs[l];
    if (p.rows == 0) throw ValidationError("cost_weighted_penalty: empty batch");
    if (c.size() != p.cols) {
      throw ValidationError("cost_weighted_penalty: cost length " +
                            std::to_string(c.size()) + " vs layer width " +
                            std::to_string(p.cols));
    }
    double cost_sum = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!(c[i] > 0.0)) {
        throw ValidationError("cost_weighted_penalty: nonpositive cost at index " +
                              std::to_string(i));
      }
      double pbar = 0.0;
      for (std::size_t s = 0; s < p.rows; ++s) pbar += p(s, i);
      pbar /= static_cast<double>(p.rows);
      weighted += c[i] * pbar;
      cost_sum += c[i];
    }
    sum += weighted / cost_sum;
  }
  return sum;
}

namespace {

std::vector<LayerUsage> ratios_impl(const GatedMlp& model, const GateTrace& trace,
                                    double theta, bool executed) {
  const auto widths = model.dims();
  std::vector<LayerUsage> usages(model.layer_count());
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    LayerUsage& u = usages[l];
    u.fanin_fanout_product =
        static_cast<double>(widths[l]) * static_cast<double>(widths[l + 1]);
    if (model.layers[l].mask) u.rho = mask_density(*model.layers[l].mask);
    // The gate on the activation this layer consumes (vector l).
    if (l < trace.gates.size() && trace.gates[l]) {
      const GateCache& cache = *trace.gates[l];
      u.alpha_p = mean_of_batch_means(cache.p);
      if (executed) {
        u.alpha_g = mean_of_batch_means(cache.mult);
      } else {
        double open = 0.0;
        for (double v : cache.p.data) open += v > theta ? 1.0 : 0.0;
        u.alpha_g = open / static_cast<double>(cache.p.data.size());
      }
    }
  }
  return usages;
}

}  // namespace

std::vector<LayerUsage> activation_ratios(const GatedMlp& model, const GateTrace& trace,
                                          double theta) {
  return ratios_impl(model, trace, theta, /*executed=*/false);
}

std::vector<LayerUsage> executed_ratios(const GatedMlp& model, const GateTrace& trace) {
  return ratios_impl(model, trace, /*theta=*/0.0, /*executed=*/true);
}

double compute_proxy(const std::vector<LayerUsage>& usages, AlphaKind kind) {
  if (usages.empty()) throw ValidationError("compute_proxy: empty usage list");
  double sum = 0.0;
  for (const auto& u : usages) sum += pick_alpha(u, kind);
  return sum / static_cast<double>(usages.size());
}

double relmac(const std::vector<LayerUsage>& usages, AlphaKind kind) {
  if (usages.empty()) throw ValidationError("relmac: empty usage list");
  double num = 0.0, den = 0.0;
  for (const auto& u : usages) {
    if (!(u.fanin_fanout_product > 0.0)) {
      throw ValidationError("relmac: fanin_fanout_product must be > 0");
    }
    num += pick_alpha(u, kind) * u.fanin_fanout_product;
    den += u.fanin_fanout_product;
  }
  return num / den;
}

double relmac_fuse(const std::vector<LayerUsage>& usages, AlphaKind kind) {
  if (usages.empty()) throw ValidationError("relmac_fuse: empty usage list");
  double num = 0.0, den = 0.0;
  for (const auto& u : usages) {
    if (!(u.fanin_fanout_product > 0.0)) {
      throw ValidationError("relmac_fuse: fanin_fanout_product must be > 0");
    }
    num += pick_alpha(u, kind) * u.rho * u.fanin_fanout_product;
    den += u.fanin_fanout_product;
  }
  return num / den;
}

ParamFlopCounts count_params_flops(const std::vector<std::size_t>& dims,
                                   const std::vector<std::size_t>& gated_widths) {
  if (dims.size() < 2) throw ValidationError("count_params_flops: need >= 2 widths");
  ParamFlopCounts c;
  std::int64_t macs = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto fan = static_cast<std::int64_t>(dims[l]) * static_cast<std::int64_t>(dims[l + 1]);
    macs += fan;
    c.params += fan + static_cast<std::int64_t>(dims[l + 1]);
  }
  c.flops = 2 * macs;
  for (std::size_t w : gated_widths) c.gate_params += static_cast<std::int64_t>(w);
  return c;
}

}  // namespace gatednet
