#include "gatednet/gates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gatednet/error.hpp"
#include "gatednet/nn.hpp"
#include "gatednet/schedule.hpp"

namespace gatednet {

std::vector<std::size_t> GatedMlp::dims() const {
  std::vector<std::size_t> d;
  d.reserve(layers.size() + 1);
  if (!layers.empty()) d.push_back(layers.front().W.cols);
  for (const auto& l : layers) d.push_back(l.W.rows);
  return d;
}

const GateParams* GatedMlp::gate_at(std::size_t v) const {
  if (v == 0) return input_gate ? &*input_gate : nullptr;
  const auto& g = layers[v - 1].gate;
  return g ? &*g : nullptr;
}

GateParams* GatedMlp::gate_at(std::size_t v) {
  return const_cast<GateParams*>(std::as_const(*this).gate_at(v));
}

void GatedMlp::set_gate_temperature(double tau) {
  for (std::size_t v = 0; v < layer_count(); ++v) {
    if (GateParams* g = gate_at(v)) g->tau = tau;
  }
}

void GatedMlp::set_gate_threshold(double theta) {
  for (std::size_t v = 0; v < layer_count(); ++v) {
    if (GateParams* g = gate_at(v)) g->theta = theta;
  }
}

void GatedMlp::check_consistent() const {
  if (layers.empty()) throw ContractError("GatedMlp: no layers");
  if (layers.back().gate) throw ContractError("GatedMlp: the output layer is never gated");
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    if (layers[l].W.rows != layers[l + 1].W.cols) {
      throw DimensionError("GatedMlp: layer " + std::to_string(l) + " outputs " +
                           std::to_string(layers[l].W.rows) + " but layer " +
                           std::to_string(l + 1) + " expects " +
                           std::to_string(layers[l + 1].W.cols));
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.b.size() != layer.W.rows) {
      throw DimensionError("GatedMlp: layer " + std::to_string(l) + " bias size " +
                           std::to_string(layer.b.size()) + " vs W " + shape_str(layer.W));
    }
    if (layer.mask &&
        (layer.mask->rows != layer.W.rows || layer.mask->cols != layer.W.cols)) {
      throw DimensionError("GatedMlp: layer " + std::to_string(l) + " mask " +
                           std::to_string(layer.mask->rows) + "x" +
                           std::to_string(layer.mask->cols) + " vs W " + shape_str(layer.W));
    }
  }
  const auto widths = dims();
  for (std::size_t v = 0; v < layer_count(); ++v) {
    const GateParams* g = gate_at(v);
    if (!g) continue;
    if (g->width() != widths[v]) {
      throw DimensionError("GatedMlp: gate on vector " + std::to_string(v) + " has width " +
                           std::to_string(g->width()) + " vs activation width " +
                           std::to_string(widths[v]));
    }
    if (g->mode == GateMode::kDynamic) {
      const std::size_t prev = v == 0 ? widths[0] : widths[v - 1];
      if (g->gate_W.rows != g->width() || g->gate_W.cols != prev) {
        throw DimensionError("GatedMlp: dynamic gate on vector " + std::to_string(v) +
                             " gate_W " + shape_str(g->gate_W) + " vs expected " +
                             std::to_string(g->width()) + "x" + std::to_string(prev));
      }
    }
  }
}

Matrix gate_logits(const GateParams& gate, const Matrix& h_prev) {
  if (gate.mode == GateMode::kStatic) {
    Matrix out(h_prev.rows, gate.static_logits.size());
    for (std::size_t s = 0; s < out.rows; ++s) {
      std::copy(gate.static_logits.begin(), gate.static_logits.end(), out.row(s));
    }
    return out;
  }
  return affine_forward(gate.gate_W, gate.gate_b, h_prev);
}

Matrix gate_logits(const GatedLayer& layer, const Matrix& h_prev) {
  if (!layer.gate) throw ContractError("gate_logits: layer has no gate");
  return gate_logits(*layer.gate, h_prev);
}

Matrix gate_probs(const Matrix& z_g, double tau) {
  if (tau <= 0.0) throw ValidationError("gate_probs: tau must be > 0, got " +
                                        std::to_string(tau));
  Matrix out(z_g.rows, z_g.cols);
  for (std::size_t i = 0; i < z_g.data.size(); ++i) {
    out.data[i] = 1.0 / (1.0 + std::exp(-z_g.data[i] / tau));
  }
  return out;
}

Matrix hard_gate(const Matrix& p, double theta) {
  Matrix out(p.rows, p.cols);
  for (std::size_t i = 0; i < p.data.size(); ++i)
    out.data[i] = p.data[i] > theta ? 1.0 : 0.0;
  return out;
}

Matrix topk_gate(const Matrix& p, std::size_t k) {
  if (k < 1 || k > p.cols) {
    throw ValidationError("topk_gate: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(p.cols) + "]");
  }
  Matrix out(p.rows, p.cols, 0.0);
  std::vector<std::size_t> order(p.cols);
  for (std::size_t s = 0; s < p.rows; ++s) {
    const double* row = p.row(s);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [row](std::size_t a, std::size_t b) {
      if (row[a] != row[b]) return row[a] > row[b];
      return a < b;  // ties: lowest index wins
    });
    for (std::size_t i = 0; i < k; ++i) out(s, order[i]) = 1.0;
  }
  return out;
}

double init_gate_bias(double p0, double tau) {
  if (!(p0 > 0.0 && p0 < 1.0)) {
    throw ValidationError("init_gate_bias: p0 must be in (0,1), got " + std::to_string(p0));
  }
  if (tau <= 0.0) throw ValidationError("init_gate_bias: tau must be > 0");
  return tau * std::log(p0 / (1.0 - p0));
}

namespace {

// Scaled inverted-dropout keep mask: entries are 0 (dropped) or 1/(1-rate).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  const double scale = 1.0 / (1.0 - rate);
  Matrix mask(rows, cols);
  for (double& v : mask.data) v = rng.uniform() < rate ? 0.0 : scale;
  return mask;
}

}  // namespace

Matrix apply_dropout(const Matrix& h, double rate, Rng& rng) {
  if (rate == 0.0) return h;
  if (rate < 0.0 || rate >= 1.0) {
    throw ValidationError("apply_dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  return hadamard(dropout_mask(h.rows, h.cols, rate, rng), h);
}

namespace {

// Applies one gate to a raw activation under the policy; fills the cache.
Matrix apply_gate(const GateParams& gate, const Matrix& raw, const Matrix& gate_input,
                  const GatePolicy& policy, std::size_t vec, GateCache& cache) {
  cache.vec = vec;
  cache.z_g = gate_logits(gate, gate_input);
  cache.p = gate_probs(cache.z_g, gate.tau);
  switch (policy.mode) {
    case ExecMode::kSoft:
      cache.mult = cache.p;
      break;
    case ExecMode::kHard:
      cache.mult = hard_gate(cache.p, policy.theta_override.value_or(gate.theta));
      break;
    case ExecMode::kTopK: {
      if (!gate.topk_k) throw ContractError("gated_forward: topk mode without topk_k");
      cache.mult = topk_gate(cache.p, *gate.topk_k);
      cache.topk_used = true;
      break;
    }
  }
  if (policy.mode != ExecMode::kSoft && (policy.r_min > 0.0 || policy.topk_floor)) {
    FloorResult fr = enforce_min_open(cache.mult, cache.p, policy.r_min, policy.topk_floor);
    cache.floor_forced = fr.forced;
    cache.mult = std::move(fr.g);
  }
  return hadamard(cache.mult, raw);
}

}  // namespace

GateTrace gated_forward(const GatedMlp& model, const Matrix& x, const GatePolicy& policy) {
  const std::size_t L = model.layer_count();
  if (L == 0) throw ContractError("gated_forward: empty model");
  if (x.cols != model.layers.front().W.cols) {
    throw DimensionError("gated_forward: x " + shape_str(x) + " vs first layer W " +
                         shape_str(model.layers.front().W));
  }
  if (policy.dropout_rate > 0.0 && policy.dropout_rng == nullptr) {
    throw ContractError("gated_forward: dropout_rate > 0 requires a dropout rng");
  }
  GateTrace trace;
  trace.mode = policy.mode;
  trace.input = x;
  trace.z.resize(L);
  trace.effective.resize(L);
  trace.gates.resize(L);
  trace.dropout.resize(L);

  Matrix current = x;  // raw activation of vector v
  for (std::size_t v = 0; v < L; ++v) {
    if (const GateParams* g = model.gate_at(v)) {
      GateCache cache;
      // The input gate's logits come from the raw input itself; deeper gates
      // see the previous effective activation.
      const Matrix& gate_input = v == 0 ? trace.input : trace.effective[v - 1];
      current = apply_gate(*g, current, gate_input, policy, v, cache);
      trace.gates[v] = std::move(cache);
    }
    if (policy.dropout_rate > 0.0 && v >= 1) {
      trace.dropout[v] =
          dropout_mask(current.rows, current.cols, policy.dropout_rate, *policy.dropout_rng);
      current = hadamard(trace.dropout[v], current);
    }
    trace.effective[v] = std::move(current);

    const GatedLayer& layer = model.layers[v];
    const Matrix* weights = &layer.W;
    Matrix masked;
    if (layer.mask) {
      masked = apply_mask(layer.W, *layer.mask);
      weights = &masked;
    }
    trace.z[v] = affine_forward(*weights, layer.b, trace.effective[v]);
    if (v + 1 < L) current = relu(trace.z[v]);
  }
  return trace;
}

ModelGrads ste_backward(const GatedMlp& model, const GateTrace& trace,
                        const Matrix& dlogits, const PenaltySpec& penalty) {
  const std::size_t L = model.layer_count();
  if (trace.z.size() != L || trace.effective.size() != L) {
    throw ContractError("ste_backward: trace does not match model");
  }
  require_same_shape(dlogits, trace.z.back(), "ste_backward");
  const double batch = static_cast<double>(dlogits.rows);

  ModelGrads grads;
  grads.dW.resize(L);
  grads.db.resize(L);
  grads.gates.resize(L);

  // Extra gradient flowing into effective[v] from gate nets fed by it.
  std::vector<Matrix> pending(L);

  Matrix dz = dlogits;
  for (std::size_t l = L; l-- > 0;) {
    const GatedLayer& layer = model.layers[l];
    const Matrix* weights = &layer.W;
    Matrix masked;
    if (layer.mask) {
      masked = apply_mask(layer.W, *layer.mask);
      weights = &masked;
    }
    // Dense dW on purpose: RigL reads grow scores at masked coordinates.
    AffineGrads ag = affine_backward(*weights, trace.effective[l], dz);
    grads.dW[l] = std::move(ag.dW);
    grads.db[l] = std::move(ag.db);

    Matrix deff = std::move(ag.dinput);
    if (pending[l].rows != 0) {
      for (std::size_t i = 0; i < deff.data.size(); ++i)
        deff.data[i] += pending[l].data[i];
    }
    // Dropout was the last multiplier applied in the forward.
    if (l < trace.dropout.size() && trace.dropout[l].rows != 0) {
      deff = hadamard(deff, trace.dropout[l]);
    }

    const std::size_t v = l;  // activation vector feeding layer l
    Matrix draw;              // gradient w.r.t. the RAW (pre-gate) activation
    if (trace.gates[v]) {
      const GateCache& cache = *trace.gates[v];
      const GateParams& gate = *model.gate_at(v);
      // Reconstruct the raw activation: effective = mult .* raw.
      const Matrix raw = v == 0 ? trace.input : relu(trace.z[v - 1]);

      // dJ/dg from the path that actually executed, plus the expected-usage
      // penalty's direct dJ/dp term.
      Matrix dgate(deff.rows, deff.cols);
      double pen_uniform = 0.0;
      const std::vector<double>* cost_row = nullptr;
      double cost_sum = 0.0;
      if (penalty.lambda_g != 0.0) {
        if (penalty.costs && v < penalty.costs->size() && !(*penalty.costs)[v].empty()) {
          cost_row = &(*penalty.costs)[v];
          cost_sum = std::accumulate(cost_row->begin(), cost_row->end(), 0.0);
        } else {
          pen_uniform = penalty.lambda_g / (static_cast<double>(deff.cols) * batch);
        }
      }
      for (std::size_t s = 0; s < deff.rows; ++s) {
        const double* de = deff.row(s);
        const double* rw = raw.row(s);
        const double* pp = cache.p.row(s);
        double* dg = dgate.row(s);
        for (std::size_t i = 0; i < deff.cols; ++i) {
          double term = de[i] * rw[i];
          if (cost_row) {
            term += penalty.lambda_g * (*cost_row)[i] / (cost_sum * batch);
          } else {
            term += pen_uniform;
          }
          // Straight-through surrogate dg/dz_g ~ dp/dz_g = p(1-p)/tau.
          dg[i] = term * pp[i] * (1.0 - pp[i]) / gate.tau;
        }
      }

      GateGrads gg;
      if (gate.mode == GateMode::kStatic) {
        gg.dstatic.assign(deff.cols, 0.0);
        for (std::size_t s = 0; s < dgate.rows; ++s) {
          const double* dg = dgate.row(s);
          for (std::size_t i = 0; i < dgate.cols; ++i) gg.dstatic[i] += dg[i];
        }
      } else {
        const Matrix& gate_input = v == 0 ? trace.input : trace.effective[v - 1];
        AffineGrads ga = affine_backward(gate.gate_W, gate_input, dgate);
        gg.dgate_W = std::move(ga.dW);
        gg.dgate_b = std::move(ga.db);
        if (v >= 1) {
          // The gate net's input path feeds back into effective[v-1].
          if (pending[v - 1].rows == 0) {
            pending[v - 1] = std::move(ga.dinput);
          } else {
            for (std::size_t i = 0; i < ga.dinput.data.size(); ++i)
              pending[v - 1].data[i] += ga.dinput.data[i];
          }
        }
      }
      grads.gates[v] = std::move(gg);

      draw = hadamard(deff, cache.mult);
    } else {
      draw = std::move(deff);
    }

    if (v == 0) break;  // input gradients are not needed
    dz = relu_backward(trace.z[v - 1], draw);
  }
  return grads;
}

}  // namespace gatednet
