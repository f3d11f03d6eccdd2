#include "gatednet/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gatednet/error.hpp"

namespace gatednet {

ScheduleConfig ScheduleConfig::defaults(std::size_t total_epochs) {
  ScheduleConfig cfg;
  cfg.total_epochs = std::max<std::size_t>(total_epochs, 1);
  const std::size_t T = cfg.total_epochs;
  const std::size_t t1 = std::max<std::size_t>(1, (T + 2) / 3);
  if (t1 >= T) {
    cfg.phases = {{T, 0.55, 0.90}};
  } else {
    const std::size_t t2 = std::max(t1 + 1, (2 * T + 2) / 3);
    if (t2 >= T) {
      cfg.phases = {{t1, 0.55, 0.90}, {T, 0.72, 0.55}};
    } else {
      cfg.phases = {{t1, 0.55, 0.90}, {t2, 0.72, 0.55}, {T, 0.80, 0.30}};
    }
  }
  cfg.warmup_epochs = std::min(t1, T - 1);  // phase 1 trains with lambda_g = 0
  return cfg;
}

void ScheduleConfig::validate() const {
  if (total_epochs < 1) throw ConfigError("schedule: total_epochs must be >= 1");
  if (warmup_epochs >= total_epochs) {
    throw ConfigError("schedule: warmup_epochs (" + std::to_string(warmup_epochs) +
                      ") must be < total_epochs (" + std::to_string(total_epochs) + ")");
  }
  if (lambda_max < 0.0) throw ConfigError("schedule: lambda_max must be >= 0");
  if (!(tau_end > 0.0) || tau_start < tau_end) {
    throw ConfigError("schedule: need tau_start >= tau_end > 0");
  }
  if (r_min < 0.0 || r_min > 1.0) throw ConfigError("schedule: r_min must be in [0,1]");
  if (phases.empty()) throw ConfigError("schedule: at least one phase required");
  std::size_t prev_until = 0;
  double prev_theta = 0.0;
  double prev_keep = 1.0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto& ph = phases[i];
    if (ph.until_epoch <= prev_until) {
      throw ConfigError("schedule: phase " + std::to_string(i) +
                        " until_epoch must increase");
    }
    if (!(ph.theta > 0.0) || ph.theta > 0.90) {
      throw ConfigError("schedule: phase " + std::to_string(i) +
                        " theta must lie in (0, 0.90]");
    }
    if (ph.keep_target < 0.0 || ph.keep_target > 1.0) {
      throw ConfigError("schedule: phase " + std::to_string(i) + " keep_target in [0,1]");
    }
    if (ph.keep_target > prev_keep) {
      throw ConfigError("schedule: keep targets must be non-increasing across phases");
    }
    if (i > 0 && ph.theta - prev_theta > 0.20) {
      throw ConfigError("schedule: phase " + std::to_string(i) +
                        " raises theta by more than 0.20");
    }
    prev_until = ph.until_epoch;
    prev_theta = ph.theta;
    prev_keep = ph.keep_target;
  }
  if (prev_until != total_epochs) {
    throw ConfigError("schedule: phases must cover epochs up to total_epochs exactly");
  }
}

double lambda_at(std::size_t epoch, const ScheduleConfig& cfg) {
  if (epoch <= cfg.warmup_epochs) return 0.0;
  const double num = static_cast<double>(epoch - cfg.warmup_epochs);
  const double den =
      std::max<double>(1.0, static_cast<double>(cfg.total_epochs - cfg.warmup_epochs));
  return cfg.lambda_max * std::min(1.0, num / den);
}

double tau_at(std::size_t epoch, const ScheduleConfig& cfg) {
  if (cfg.total_epochs <= 1) return cfg.tau_end;
  const double u = std::clamp(static_cast<double>(epoch - 1) /
                                  static_cast<double>(cfg.total_epochs - 1),
                              0.0, 1.0);
  double tau;
  if (cfg.tau_anneal == AnnealKind::kLinear) {
    tau = cfg.tau_start + (cfg.tau_end - cfg.tau_start) * u;
  } else {
    tau = cfg.tau_end +
          (cfg.tau_start - cfg.tau_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
  }
  return std::max(tau, cfg.tau_end);
}

PhasePoint phase_at(std::size_t epoch, const ScheduleConfig& cfg) {
  for (std::size_t i = 0; i < cfg.phases.size(); ++i) {
    if (epoch <= cfg.phases[i].until_epoch) {
      return {i, cfg.phases[i].theta, cfg.phases[i].keep_target};
    }
  }
  throw ConfigError("phase_at: epoch " + std::to_string(epoch) +
                    " not covered by any phase");
}

FloorResult enforce_min_open(const Matrix& g, const Matrix& p, double r_min,
                             std::optional<std::size_t> topk_floor) {
  require_same_shape(g, p, "enforce_min_open");
  FloorResult res;
  res.g = g;
  const std::size_t n = g.cols;
  std::size_t need = topk_floor.value_or(0);
  if (r_min > 0.0) {
    need = std::max(need, static_cast<std::size_t>(
                              std::ceil(r_min * static_cast<double>(n) - 1e-12)));
  }
  need = std::min(need, n);
  if (need == 0) return res;

  std::vector<std::size_t> closed;
  for (std::size_t s = 0; s < g.rows; ++s) {
    double* grow = res.g.row(s);
    const double* prow = p.row(s);
    std::size_t open = 0;
    for (std::size_t i = 0; i < n; ++i) open += grow[i] != 0.0;
    if (open >= need) continue;
    closed.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (grow[i] == 0.0) closed.push_back(i);
    }
    std::sort(closed.begin(), closed.end(), [prow](std::size_t a, std::size_t b) {
      if (prow[a] != prow[b]) return prow[a] > prow[b];
      return a < b;
    });
    const std::size_t to_force = need - open;
    for (std::size_t i = 0; i < to_force; ++i) grow[closed[i]] = 1.0;
    res.forced += to_force;
  }
  return res;
}

CollapseFlags collapse_flags(const std::vector<double>& mean_p_per_gate,
                             const std::vector<double>& mean_g_per_gate, double theta) {
  CollapseFlags flags;
  for (std::size_t i = 0; i < mean_p_per_gate.size(); ++i) {
    if (mean_p_per_gate[i] < 0.01) flags.flag_b = true;
    if (i < mean_g_per_gate.size() && mean_g_per_gate[i] < 0.01 &&
        mean_p_per_gate[i] > theta - 0.05) {
      flags.flag_a = true;
    }
  }
  return flags;
}

}  // namespace gatednet
