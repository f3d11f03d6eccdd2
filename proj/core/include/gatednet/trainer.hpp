#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gatednet/data.hpp"
#include "gatednet/gates.hpp"
#include "gatednet/metrics.hpp"
#include "gatednet/optimizer.hpp"
#include "gatednet/rigl.hpp"
#include "gatednet/schedule.hpp"

namespace gatednet {

enum class Variant { kBaseline, kDropout, kPruned, kDynamic, kRigl, kFused };

std::string variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

// Which activation vectors carry gates and how they are parameterized.
// Vector 0 is the input; the final activation is never gateable.
struct GateArch {
  GateMode mode = GateMode::kStatic;
  std::vector<std::size_t> gated_vectors = {0, 1};
  double p0 = 0.85;  // initial open probability via bias init
  std::optional<std::size_t> topk_k;
};

struct TrainConfig {
  std::vector<std::size_t> dims = {784, 256, 10};
  Variant variant = Variant::kBaseline;
  AdamWConfig optimizer;
  std::size_t batch_size = 128;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  ScheduleConfig schedule;         // dynamic/fused; defaulted from epochs when unset
  RiglConfig rigl;                 // rigl/fused
  double dropout_rate = 0.2;       // dropout variant, hidden activations only
  double prune_fraction = 0.3;     // pruned variant
  std::size_t prune_finetune_epochs = 2;
  GateArch gate;                   // dynamic/fused
  // Optional per-gate compute costs (cost-weighted penalty); outer index =
  // activation vector, empty inner vector = uniform.
  std::optional<std::vector<std::vector<double>>> gate_costs;
  bool abort_on_collapse = true;
  std::size_t collapse_patience = 3;  // consecutive flag-B epochs before aborting

  void validate() const;  // throws ConfigError
};

// One row per epoch. Every proxy field is recomputed from the epoch's final
// parameters by a deterministic pass over the training split.
struct RunRecord {
  std::size_t epoch = 0;
  double task_loss = 0.0;     // epoch mean over batches
  double gate_penalty = 0.0;  // epoch mean of the raw usage penalty
  double objective = 0.0;     // epoch mean of J = L_task + lambda_g * penalty
  double lambda_g = 0.0;
  double tau = 0.0;
  double theta = 0.0;
  std::vector<double> alpha_p;  // per affine layer
  std::vector<double> alpha_g;
  std::vector<double> rho;
  double relmac_p = 1.0;
  double relmac_g = 1.0;
  double relmac_fuse_g = 1.0;  // rho folded in; equals relmac_g when dense
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  bool collapse_flag_a = false;
  bool collapse_flag_b = false;
  std::size_t rewire_events = 0;  // RigL rewires performed this epoch
};

struct TrainResult {
  GatedMlp model;
  std::vector<RunRecord> records;
  bool aborted = false;           // collapse abort (CLI exit 3)
  std::string abort_reason;
};

// Builds the variant's model (dense weights He-uniform from the seed's
// weight substream; gate logits bias-initialized, no rng draws).
GatedMlp build_model(const TrainConfig& cfg);

// Runs the configured variant. All variants share one inner loop so the
// dense limits reduce bitwise to the baseline trainer.
TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& val_set);

struct EvalResult {
  double accuracy = 0.0;
  std::vector<LayerUsage> usages;  // deployment ratios, floors included
};

// Hard-gate inference at the given threshold.
EvalResult evaluate(const GatedMlp& model, const Dataset& ds, double theta,
                    double r_min = 0.0, std::optional<std::size_t> topk_floor = {});

// One-shot global magnitude pruning: installs static masks keeping the
// largest (1 - fraction) of all weight entries pooled across layers, and
// zeroes the pruned coordinates.
void magnitude_prune(GatedMlp& model, double fraction);

}  // namespace gatednet
