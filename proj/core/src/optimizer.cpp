#include "gatednet/optimizer.hpp"

#include <cmath>

#include "gatednet/error.hpp"

namespace gatednet {

AdamW::AdamW(const GatedMlp& model, AdamWConfig cfg) : cfg_(cfg) {
  const std::size_t L = model.layer_count();
  w_.resize(L);
  b_.resize(L);
  gates_.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    w_[l].m.assign(model.layers[l].W.size(), 0.0);
    w_[l].v.assign(model.layers[l].W.size(), 0.0);
    b_[l].m.assign(model.layers[l].b.size(), 0.0);
    b_[l].v.assign(model.layers[l].b.size(), 0.0);
  }
  for (std::size_t v = 0; v < L; ++v) {
    const GateParams* g = model.gate_at(v);
    if (!g) continue;
    const std::size_t n = g->width();
    gates_[v].logits.m.assign(n, 0.0);
    gates_[v].logits.v.assign(n, 0.0);
    if (g->mode == GateMode::kDynamic) {
      gates_[v].gw.m.assign(g->gate_W.size(), 0.0);
      gates_[v].gw.v.assign(g->gate_W.size(), 0.0);
    }
  }
}

void AdamW::apply(Moments& mom, std::vector<double>& param,
                  const std::vector<double>& grad, double decay,
                  const std::uint8_t* mask_bits, double bc1, double bc2) {
  if (grad.size() != param.size()) {
    throw ContractError("AdamW: gradient size does not match parameter size");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    if (mask_bits && !mask_bits[i]) continue;  // masked coords stay untouched
    mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * grad[i];
    mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double mhat = mom.m[i] / bc1;
    const double vhat = mom.v[i] / bc2;
    param[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + decay * param[i]);
  }
}

void AdamW::step(GatedMlp& model, const ModelGrads& grads) {
  const std::size_t L = model.layer_count();
  if (grads.dW.size() != L || grads.db.size() != L) {
    throw ContractError("AdamW::step: gradient/model layer count mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (std::size_t l = 0; l < L; ++l) {
    GatedLayer& layer = model.layers[l];
    const std::uint8_t* mask_bits =
        layer.mask ? layer.mask->bits.data() : nullptr;
    apply(w_[l], layer.W.data, grads.dW[l].data, cfg_.weight_decay, mask_bits, bc1, bc2);
    apply(b_[l], layer.b, grads.db[l], 0.0, nullptr, bc1, bc2);
  }
  for (std::size_t v = 0; v < L; ++v) {
    GateParams* g = model.gate_at(v);
    if (!g || !grads.gates[v]) continue;
    const GateGrads& gg = *grads.gates[v];
    if (g->mode == GateMode::kStatic) {
      apply(gates_[v].logits, g->static_logits, gg.dstatic, 0.0, nullptr, bc1, bc2);
    } else {
      apply(gates_[v].gw, g->gate_W.data, gg.dgate_W.data, cfg_.weight_decay, nullptr,
            bc1, bc2);
      apply(gates_[v].logits, g->gate_b, gg.dgate_b, 0.0, nullptr, bc1, bc2);
    }
  }
}

void AdamW::reset_weight_moment(std::size_t layer, std::size_t flat_index) {
  w_[layer].m[flat_index] = 0.0;
  w_[layer].v[flat_index] = 0.0;
}

}  // namespace gatednet
