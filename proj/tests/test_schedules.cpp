#include <cmath>

#include <doctest.h>

#include "gatednet/error.hpp"
#include "gatednet/gates.hpp"
#include "gatednet/schedule.hpp"
#include "helpers.hpp"

using namespace gatednet;

TEST_CASE("lambda ramp: zero through warmup, linear to the max") {
  ScheduleConfig cfg = ScheduleConfig::defaults(10);
  cfg.warmup_epochs = 4;
  cfg.lambda_max = 1.0;
  for (std::size_t t = 1; t <= 4; ++t) CHECK(lambda_at(t, cfg) == 0.0);
  CHECK(lambda_at(10, cfg) == 1.0);
  CHECK(lambda_at(7, cfg) == 0.5);  // (7-4)/(10-4)

  double prev = -1.0;
  for (std::size_t t = 1; t <= 10; ++t) {
    const double v = lambda_at(t, cfg);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("tau anneal hits both endpoints and never undershoots") {
  ScheduleConfig cfg = ScheduleConfig::defaults(11);
  cfg.tau_start = 2.0;
  cfg.tau_end = 0.5;
  CHECK(tau_at(1, cfg) == 2.0);
  CHECK(tau_at(11, cfg) == 0.5);
  CHECK(std::abs(tau_at(6, cfg) - 1.25) <= 1e-12);  // linear midpoint

  for (AnnealKind kind : {AnnealKind::kLinear, AnnealKind::kCosine}) {
    cfg.tau_anneal = kind;
    double prev = 1e9;
    for (std::size_t t = 1; t <= 11; ++t) {
      const double tau = tau_at(t, cfg);
      CHECK(tau <= prev + 1e-15);
      CHECK(tau >= cfg.tau_end);
      prev = tau;
    }
  }
}

TEST_CASE("falling tau sharpens the gate probability for positive logits") {
  ScheduleConfig cfg = ScheduleConfig::defaults(8);
  const Matrix z = Matrix::from_rows({{1.3}});
  double prev = 0.0;
  for (std::size_t t = 1; t <= 8; ++t) {
    const double p = gate_probs(z, tau_at(t, cfg))(0, 0);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("default 3-phase schedule matches the documented operating points") {
  const ScheduleConfig cfg = ScheduleConfig::defaults(10);
  cfg.validate();
  CHECK(cfg.warmup_epochs == 4);

  const PhasePoint p1 = phase_at(1, cfg);
  CHECK(p1.phase_index == 0);
  CHECK(p1.theta == 0.55);
  CHECK(p1.keep_target == 0.90);

  const PhasePoint p2 = phase_at(5, cfg);
  CHECK(p2.phase_index == 1);
  CHECK(p2.theta == 0.72);
  CHECK(p2.keep_target == 0.55);

  const PhasePoint p3 = phase_at(9, cfg);
  CHECK(p3.phase_index == 2);
  CHECK(p3.theta == 0.80);
  CHECK(p3.keep_target == 0.30);

  // Defaults never push theta beyond 0.90, for any horizon.
  for (std::size_t T : {1, 2, 3, 5, 8, 20, 100}) {
    const ScheduleConfig c = ScheduleConfig::defaults(T);
    c.validate();
    for (std::size_t t = 1; t <= T; ++t) CHECK(phase_at(t, c).theta <= 0.90);
  }
}

TEST_CASE("schedule validation rejects bad configurations") {
  ScheduleConfig cfg = ScheduleConfig::defaults(10);
  cfg.warmup_epochs = 10;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = ScheduleConfig::defaults(10);
  cfg.phases.back().theta = 0.95;  // above the safe ceiling
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = ScheduleConfig::defaults(10);
  cfg.phases.back().keep_target = 0.99;  // keep target increased
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = ScheduleConfig::defaults(10);
  cfg.phases[1].theta = cfg.phases[0].theta + 0.5;  // theta jump too large
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = ScheduleConfig::defaults(10);
  cfg.phases.back().until_epoch = 9;  // epoch 10 uncovered
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = ScheduleConfig::defaults(10);
  cfg.tau_end = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("enforce_min_open forces the highest-p units up to the floor") {
  SUBCASE("all-closed row gets exactly the argmax unit at r_min 0.1") {
    Matrix g(1, 10, 0.0);
    Matrix p(1, 10, 0.0);
    for (std::size_t i = 0; i < 10; ++i) p(0, i) = 0.01 * static_cast<double>(i);
    p(0, 6) = 0.9;
    const FloorResult res = enforce_min_open(g, p, 0.1, {});
    CHECK(res.forced == 1);
    for (std::size_t i = 0; i < 10; ++i) CHECK(res.g(0, i) == (i == 6 ? 1.0 : 0.0));
  }
  SUBCASE("rows already above the floor are untouched") {
    Matrix g(2, 4, 1.0);
    const Matrix p(2, 4, 0.5);
    const FloorResult res = enforce_min_open(g, p, 0.25, {});
    CHECK(res.forced == 0);
    CHECK(res.g == g);
  }
  SUBCASE("no floor means identity") {
    Matrix g(2, 4, 0.0);
    const FloorResult res = enforce_min_open(g, Matrix(2, 4, 0.9), 0.0, {});
    CHECK(res.forced == 0);
    CHECK(res.g == g);
  }
  SUBCASE("topk floor dominates r_min when larger") {
    Matrix g(1, 6, 0.0);
    Matrix p(1, 6, 0.0);
    for (std::size_t i = 0; i < 6; ++i) p(0, i) = 0.1 * static_cast<double>(i);
    const FloorResult res = enforce_min_open(g, p, 0.1, 3);
    CHECK(res.forced == 3);
    CHECK(res.g(0, 5) == 1.0);
    CHECK(res.g(0, 4) == 1.0);
    CHECK(res.g(0, 3) == 1.0);
  }
  SUBCASE("output dominates input and meets the floor exactly") {
    Rng rng(6);
    for (int rep = 0; rep < 40; ++rep) {
      const std::size_t n = 2 + rng.below(9);
      Matrix p = testutil::random_matrix(3, n, rng, 0.0, 1.0);
      Matrix g = hard_gate(p, 0.7);
      const double r_min = rng.uniform();
      const FloorResult res = enforce_min_open(g, p, r_min, {});
      const auto need = static_cast<std::size_t>(
          std::ceil(r_min * static_cast<double>(n) - 1e-12));
      for (std::size_t s = 0; s < 3; ++s) {
        std::size_t open = 0, was_open = 0;
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(res.g(s, i) >= g(s, i));  // never turns a unit off
          open += res.g(s, i) != 0.0;
          was_open += g(s, i) != 0.0;
        }
        CHECK(open == std::max(was_open, std::min(need, n)));
      }
    }
  }
}

TEST_CASE("collapse flags classify the two failure patterns") {
  // Pattern A: p healthy but hard gate dead (theta too aggressive).
  CollapseFlags a = collapse_flags({0.82}, {0.005}, 0.8);
  CHECK(a.flag_a);
  CHECK_FALSE(a.flag_b);

  // Pattern B: p itself collapsed.
  CollapseFlags b = collapse_flags({0.004}, {0.0}, 0.8);
  CHECK(b.flag_b);

  // Healthy run: neither.
  CollapseFlags ok = collapse_flags({0.6, 0.7}, {0.5, 0.65}, 0.72);
  CHECK_FALSE(ok.flag_a);
  CHECK_FALSE(ok.flag_b);

  // Low g with low p is pattern B territory, not A.
  CollapseFlags low = collapse_flags({0.3}, {0.001}, 0.8);
  CHECK_FALSE(low.flag_a);
  CHECK_FALSE(low.flag_b);
}
