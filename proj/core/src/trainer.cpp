#include "gatednet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gatednet/error.hpp"
#include "gatednet/nn.hpp"

namespace gatednet {

namespace {

// Substream tags so weights, masks, and dropout never share draws.
constexpr std::uint64_t kWeightStream = 0x57454947;
constexpr std::uint64_t kMaskStream = 0x4d41534b;
constexpr std::uint64_t kDropStream = 0x44524f50;

bool is_gated(Variant v) { return v == Variant::kDynamic || v == Variant::kFused; }
bool is_masked_dynamic(Variant v) { return v == Variant::kRigl || v == Variant::kFused; }

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kDropout: return "dropout";
    case Variant::kPruned: return "pruned";
    case Variant::kDynamic: return "dynamic";
    case Variant::kRigl: return "rigl";
    case Variant::kFused: return "fused";
  }
  return "unknown";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  if (name == "baseline") return Variant::kBaseline;
  if (name == "dropout") return Variant::kDropout;
  if (name == "pruned") return Variant::kPruned;
  if (name == "dynamic") return Variant::kDynamic;
  if (name == "rigl") return Variant::kRigl;
  if (name == "fused") return Variant::kFused;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (dims.size() < 2) throw ConfigError("model: need >= 2 layer widths");
  for (std::size_t w : dims) {
    if (w == 0) throw ConfigError("model: zero-width layer");
  }
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0,1)");
  }
  if (prune_fraction < 0.0 || prune_fraction >= 1.0) {
    throw ConfigError("prune: fraction must be in [0,1)");
  }
  if (variant == Variant::kPruned && prune_finetune_epochs >= epochs) {
    throw ConfigError("prune: finetune epochs must be < total epochs");
  }
  if (is_masked_dynamic(variant)) {
    if (rigl.sparsity < 0.0 || rigl.sparsity >= 1.0) {
      throw ConfigError("rigl: sparsity must be in [0,1)");
    }
    if (rigl.update_period < 1) throw ConfigError("rigl: update_period must be >= 1");
    if (rigl.rewire_fraction < 0.0 || rigl.rewire_fraction > 1.0) {
      throw ConfigError("rigl: rewire_fraction must be in [0,1]");
    }
  }
  if (is_gated(variant)) {
    if (schedule.total_epochs != epochs) {
      throw ConfigError("schedule: total_epochs (" + std::to_string(schedule.total_epochs) +
                        ") must equal train epochs (" + std::to_string(epochs) + ")");
    }
    schedule.validate();
    if (!(gate.p0 > 0.0 && gate.p0 < 1.0)) throw ConfigError("gate: p0 must be in (0,1)");
    const std::size_t n_vectors = dims.size() - 1;  // gateable activation vectors
    for (std::size_t v : gate.gated_vectors) {
      if (v >= n_vectors) {
        throw ConfigError("gate: gated vector " + std::to_string(v) +
                          " out of range [0, " + std::to_string(n_vectors) + ")");
      }
    }
    if (gate.topk_k) {
      for (std::size_t v : gate.gated_vectors) {
        if (*gate.topk_k < 1 || *gate.topk_k > dims[v]) {
          throw ConfigError("gate: topk_k out of range for vector " + std::to_string(v));
        }
      }
    }
    if (gate_costs) {
      if (gate_costs->size() != n_vectors) {
        throw ConfigError("gate costs: need one entry per activation vector");
      }
      for (std::size_t v : gate.gated_vectors) {
        const auto& c = (*gate_costs)[v];
        if (!c.empty() && c.size() != dims[v]) {
          throw ConfigError("gate costs: vector " + std::to_string(v) + " has " +
                            std::to_string(c.size()) + " costs for width " +
                            std::to_string(dims[v]));
        }
        for (double x : c) {
          if (!(x > 0.0)) throw ConfigError("gate costs: entries must be > 0");
        }
      }
    }
  }
}

GatedMlp build_model(const TrainConfig& cfg) {
  GatedMlp model;
  Rng weight_rng(Rng::mix(cfg.seed, kWeightStream));
  const auto& d = cfg.dims;
  model.layers.resize(d.size() - 1);
  for (std::size_t l = 0; l + 1 < d.size(); ++l) {
    GatedLayer& layer = model.layers[l];
    layer.W = Matrix(d[l + 1], d[l]);
    he_uniform_init(layer.W, weight_rng);
    layer.b.assign(d[l + 1], 0.0);
  }

  if (is_gated(cfg.variant)) {
    const double bias0 = init_gate_bias(cfg.gate.p0, cfg.schedule.tau_start);
    for (std::size_t v : cfg.gate.gated_vectors) {
      GateParams g;
      g.mode = cfg.gate.mode;
      g.tau = cfg.schedule.tau_start;
      g.theta = cfg.schedule.phases.front().theta;
      g.topk_k = cfg.gate.topk_k;
      const std::size_t width = d[v];
      if (g.mode == GateMode::kStatic) {
        g.static_logits.assign(width, bias0);
      } else {
        // Zero gate weights open every gate at exactly p0; task gradients
        // break the symmetry per unit.
        const std::size_t prev = v == 0 ? d[0] : d[v - 1];
        g.gate_W = Matrix(width, prev, 0.0);
        g.gate_b.assign(width, bias0);
      }
      if (v == 0) {
        model.input_gate = std::move(g);
      } else {
        model.layers[v - 1].gate = std::move(g);
      }
    }
  }

  if (is_masked_dynamic(cfg.variant)) {
    Rng mask_rng(Rng::mix(cfg.seed, kMaskStream));
    const std::size_t last = model.layer_count() - 1;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
      if (l == last && !cfg.rigl.mask_output_layer) continue;
      GatedLayer& layer = model.layers[l];
      layer.mask = init_sparse_mask(layer.W.rows, layer.W.cols, cfg.rigl.sparsity, mask_rng);
      layer.W = apply_mask(layer.W, *layer.mask);  // masked coords start at exactly 0
    }
  }

  model.check_consistent();
  return model;
}

void magnitude_prune(GatedMlp& model, double fraction) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw ValidationError("magnitude_prune: fraction must be in [0,1)");
  }
  if (fraction == 0.0) return;  // model unchanged, no masks installed

  struct Entry {
    double mag;
    std::size_t layer;
    std::size_t idx;
  };
  std::vector<Entry> entries;
  std::size_t total = 0;
  for (std::size_t l = 0; l < model.layer_count(); ++l) total += model.layers[l].W.size();
  entries.reserve(total);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto& W = model.layers[l].W;
    for (std::size_t i = 0; i < W.size(); ++i) entries.push_back({std::fabs(W.data[i]), l, i});
  }
  const auto drop =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.mag != b.mag) return a.mag < b.mag;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.idx < b.idx;
  });

  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    GatedLayer& layer = model.layers[l];
    SparseMask m;
    m.rows = layer.W.rows;
    m.cols = layer.W.cols;
    m.bits.assign(layer.W.size(), 1);
    layer.mask = std::move(m);
  }
  for (std::size_t i = 0; i < drop; ++i) {
    const Entry& e = entries[i];
    model.layers[e.layer].mask->bits[e.idx] = 0;
    model.layers[e.layer].W.data[e.idx] = 0.0;
  }
  for (auto& layer : model.layers) layer.mask->budget = layer.mask->popcount();
}

EvalResult evaluate(const GatedMlp& model, const Dataset& ds, double theta, double r_min,
                    std::optional<std::size_t> topk_floor) {
  GatePolicy policy;
  policy.mode = ExecMode::kHard;
  policy.theta_override = theta;
  policy.r_min = r_min;
  policy.topk_floor = topk_floor;

  const std::size_t L = model.layer_count();
  EvalResult res;
  res.usages.resize(L);
  const auto widths = model.dims();
  for (std::size_t l = 0; l < L; ++l) {
    res.usages[l].fanin_fanout_product =
        static_cast<double>(widths[l]) * static_cast<double>(widths[l + 1]);
    if (model.layers[l].mask) res.usages[l].rho = mask_density(*model.layers[l].mask);
  }

  std::vector<double> p_sum(L, 0.0), g_sum(L, 0.0);
  std::vector<std::size_t> entry_count(L, 0);
  std::size_t correct = 0;
  constexpr std::size_t kChunk = 1024;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    const std::size_t end = std::min(ds.size(), start + kChunk);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix x = gather_rows(ds.features, idx);
    GateTrace trace = gated_forward(model, x, policy);

    const Matrix& logits = trace.logits();
    for (std::size_t s = 0; s < logits.rows; ++s) {
      const double* row = logits.row(s);
      std::size_t arg = 0;
      for (std::size_t c = 1; c < logits.cols; ++c) {
        if (row[c] > row[arg]) arg = c;
      }
      if (static_cast<int>(arg) == ds.labels[idx[s]]) ++correct;
    }
    for (std::size_t v = 0; v < L; ++v) {
      if (!trace.gates[v]) continue;
      const GateCache& cache = *trace.gates[v];
      for (double val : cache.p.data) p_sum[v] += val;
      for (double val : cache.mult.data) g_sum[v] += val != 0.0 ? 1.0 : 0.0;
      entry_count[v] += cache.p.data.size();
    }
  }
  for (std::size_t v = 0; v < L; ++v) {
    if (entry_count[v] == 0) continue;  // ungated: alphas stay 1
    res.usages[v].alpha_p = p_sum[v] / static_cast<double>(entry_count[v]);
    res.usages[v].alpha_g = g_sum[v] / static_cast<double>(entry_count[v]);
  }
  res.accuracy = ds.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(ds.size());
  return res;
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set) {
  cfg.validate();
  if (train_set.dim() != cfg.dims.front()) {
    throw ConfigError("data: feature dim " + std::to_string(train_set.dim()) +
                      " vs model input width " + std::to_string(cfg.dims.front()));
  }
  if (static_cast<std::size_t>(train_set.class_count) > cfg.dims.back()) {
    throw ConfigError("data: " + std::to_string(train_set.class_count) +
                      " classes vs model output width " + std::to_string(cfg.dims.back()));
  }

  TrainResult result;
  result.model = build_model(cfg);
  GatedMlp& model = result.model;
  AdamW opt(model, cfg.optimizer);
  Rng dropout_rng(Rng::mix(cfg.seed, kDropStream));

  const bool gated = is_gated(cfg.variant);
  const bool rewiring = is_masked_dynamic(cfg.variant);
  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  const std::size_t prune_after_epoch = cfg.variant == Variant::kPruned
                                            ? cfg.epochs - cfg.prune_finetune_epochs
                                            : std::size_t(-1);

  PenaltySpec penalty_spec;
  penalty_spec.costs = cfg.gate_costs ? &*cfg.gate_costs : nullptr;

  std::size_t global_step = 0;
  std::size_t flag_b_streak = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double lambda = 0.0, tau = 0.0, theta = 0.0;
    GatePolicy policy;
    policy.mode = cfg.gate.topk_k && gated ? ExecMode::kTopK : ExecMode::kHard;
    if (gated) {
      lambda = lambda_at(epoch, cfg.schedule);
      tau = tau_at(epoch, cfg.schedule);
      theta = phase_at(epoch, cfg.schedule).theta;
      model.set_gate_temperature(tau);
      model.set_gate_threshold(theta);
      policy.r_min = cfg.schedule.r_min;
      policy.topk_floor = cfg.schedule.topk_floor;
    }
    if (cfg.variant == Variant::kDropout && cfg.dropout_rate > 0.0) {
      policy.dropout_rate = cfg.dropout_rate;
      policy.dropout_rng = &dropout_rng;
    }
    penalty_spec.lambda_g = lambda;

    double loss_sum = 0.0, penalty_sum = 0.0, objective_sum = 0.0;
    std::size_t rewire_events = 0;

    for (const auto& batch_idx : make_batches(n, cfg.batch_size, cfg.seed, epoch)) {
      ++global_step;
      const Matrix x = gather_rows(train_set.features, batch_idx);
      const std::vector<int> y = gather_labels(train_set.labels, batch_idx);

      GateTrace trace = gated_forward(model, x, policy);
      XentResult xent = softmax_cross_entropy(trace.logits(), y);

      double batch_penalty = 0.0;
      if (gated) {
        std::vector<Matrix> p_mats;
        std::vector<std::vector<double>> costs;
        for (std::size_t v = 0; v < model.layer_count(); ++v) {
          if (!trace.gates[v]) continue;
          p_mats.push_back(trace.gates[v]->p);
          if (penalty_spec.costs) {
            costs.push_back((*penalty_spec.costs)[v].empty()
                                ? std::vector<double>(trace.gates[v]->p.cols, 1.0)
                                : (*penalty_spec.costs)[v]);
          }
        }
        if (!p_mats.empty()) {
          batch_penalty = penalty_spec.costs ? cost_weighted_penalty(p_mats, costs)
                                             : usage_penalty(p_mats);
        }
      }
      loss_sum += xent.loss;
      penalty_sum += batch_penalty;
      objective_sum += xent.loss + lambda * batch_penalty;

      ModelGrads grads = ste_backward(model, trace, xent.dlogits, penalty_spec);

      // Grow scores rank by the task-loss gradient alone. With dynamic gates
      // the J-gradient also carries the penalty through the gate-net input
      // path, so recompute against the pre-step weights when it could differ.
      const bool rewire_now = rewiring && global_step % cfg.rigl.update_period == 0;
      ModelGrads task_grads;
      const ModelGrads* scores = &grads;
      if (rewire_now && lambda != 0.0 && cfg.gate.mode == GateMode::kDynamic) {
        task_grads = ste_backward(model, trace, xent.dlogits);
        scores = &task_grads;
      }

      opt.step(model, grads);

      if (rewire_now) {
        bool any = false;
        for (std::size_t l = 0; l < model.layer_count(); ++l) {
          GatedLayer& layer = model.layers[l];
          if (!layer.mask) continue;
          const std::size_t k =
              cfg.rigl.rewire_count(layer.mask->budget, global_step, total_steps);
          if (k == 0) continue;
          RewireResult rw = rigl_update(layer.W, scores->dW[l], *layer.mask, k);
          for (std::size_t idx : rw.pruned) layer.W.data[idx] = 0.0;
          for (std::size_t idx : rw.grown) {
            layer.W.data[idx] = 0.0;  // fresh connections start flat
            opt.reset_weight_moment(l, idx);
          }
          layer.mask = std::move(rw.mask);
          any = true;
        }
        if (any) ++rewire_events;
      }
    }

    if (cfg.variant == Variant::kPruned && epoch == prune_after_epoch) {
      magnitude_prune(model, cfg.prune_fraction);
    }

    // Epoch-end recompute: every proxy from the epoch's final parameters.
    const double eval_theta = gated ? theta : 0.5;
    EvalResult train_eval = evaluate(model, train_set, eval_theta, policy.r_min,
                                     policy.topk_floor);
    EvalResult val_eval = evaluate(model, val_set, eval_theta, policy.r_min,
                                   policy.topk_floor);

    RunRecord rec;
    rec.epoch = epoch;
    const double batches_d = static_cast<double>(steps_per_epoch);
    rec.task_loss = loss_sum / batches_d;
    rec.gate_penalty = penalty_sum / batches_d;
    rec.objective = objective_sum / batches_d;
    rec.lambda_g = lambda;
    rec.tau = tau;
    rec.theta = eval_theta;
    for (const LayerUsage& u : train_eval.usages) {
      rec.alpha_p.push_back(u.alpha_p);
      rec.alpha_g.push_back(u.alpha_g);
      rec.rho.push_back(u.rho);
    }
    rec.relmac_p = relmac(train_eval.usages, AlphaKind::kP);
    rec.relmac_g = relmac(train_eval.usages, AlphaKind::kG);
    rec.relmac_fuse_g = relmac_fuse(train_eval.usages, AlphaKind::kG);
    rec.train_accuracy = train_eval.accuracy;
    rec.val_accuracy = val_eval.accuracy;
    rec.rewire_events = rewire_events;

    std::vector<double> mean_p, mean_g;
    for (std::size_t v = 0; v < model.layer_count(); ++v) {
      if (!model.gate_at(v)) continue;
      mean_p.push_back(train_eval.usages[v].alpha_p);
      mean_g.push_back(train_eval.usages[v].alpha_g);
    }
    const CollapseFlags flags = collapse_flags(mean_p, mean_g, eval_theta);
    rec.collapse_flag_a = flags.flag_a;
    rec.collapse_flag_b = flags.flag_b;
    result.records.push_back(std::move(rec));

    flag_b_streak = flags.flag_b ? flag_b_streak + 1 : 0;
    if (cfg.abort_on_collapse && flag_b_streak >= cfg.collapse_patience) {
      result.aborted = true;
      result.abort_reason = "gate collapse: mean p below 0.01 for " +
                            std::to_string(flag_b_streak) + " consecutive epochs (epoch " +
                            std::to_string(epoch) + ")";
      break;
    }
  }
  return result;
}

}  // namespace gatednet
