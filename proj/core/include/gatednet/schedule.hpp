#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "gatednet/matrix.hpp"

namespace gatednet {

enum class AnnealKind { kLinear, kCosine };

// One phase of the 3-phase gate schedule: active for epochs in
// (previous until, until_epoch].
struct PhaseSpec {
  std::size_t until_epoch = 0;
  double theta = 0.5;
  double keep_target = 0.9;  // advisory: logged and used by collapse flags, not enforced
};

struct ScheduleConfig {
  std::size_t total_epochs = 10;
  std::size_t warmup_epochs = 3;   // E_w: lambda_g == 0 through these epochs
  double lambda_max = 1.0;
  double tau_start = 1.5;
  double tau_end = 0.7;
  AnnealKind tau_anneal = AnnealKind::kLinear;
  std::vector<PhaseSpec> phases;
  double r_min = 0.0;                     // enforced minimum open rate
  std::optional<std::size_t> topk_floor;  // always-on top-k floor

  // Three phases at the recommended operating points: theta 0.55/0.72/0.80
  // with keep targets 0.90/0.55/0.30, phase boundaries at thirds, warmup =
  // end of phase 1.
  static ScheduleConfig defaults(std::size_t total_epochs);

  void validate() const;  // throws ConfigError
};

// 0 through warmup, then lambda_max * min(1, (t - E_w)/max(1, T - E_w)).
double lambda_at(std::size_t epoch, const ScheduleConfig& cfg);

// Monotone non-increasing anneal from tau_start (epoch 1) to tau_end
// (epoch T); never drops below tau_end.
double tau_at(std::size_t epoch, const ScheduleConfig& cfg);

struct PhasePoint {
  std::size_t phase_index = 0;  // 0-based
  double theta = 0.5;
  double keep_target = 1.0;
};

PhasePoint phase_at(std::size_t epoch, const ScheduleConfig& cfg);

// Per row: if fewer than max(ceil(r_min * n), topk_floor) units are open,
// force on the highest-p closed units until the floor is met. Never turns a
// unit off. Returns the adjusted gate matrix and the number of forced
// entries.
struct FloorResult {
  Matrix g;
  std::size_t forced = 0;
};
FloorResult enforce_min_open(const Matrix& g, const Matrix& p, double r_min,
                             std::optional<std::size_t> topk_floor);

// Log-based collapse diagnosis over per-gate epoch means.
//   flag_a: some gate has mean g < 0.01 while mean p > theta - 0.05
//           (threshold too aggressive: p alive, g dead).
//   flag_b: some gate has mean p < 0.01 (p itself collapsed).
struct CollapseFlags {
  bool flag_a = false;
  bool flag_b = false;
};
CollapseFlags collapse_flags(const std::vector<double>& mean_p_per_gate,
                             const std::vector<double>& mean_g_per_gate, double theta);

}  // namespace gatednet
