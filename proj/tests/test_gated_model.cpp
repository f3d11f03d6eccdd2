#include <cmath>

#include <doctest.h>

#include "gatednet/error.hpp"
#include "gatednet/gates.hpp"
#include "gatednet/metrics.hpp"
#include "gatednet/nn.hpp"
#include "helpers.hpp"

using namespace gatednet;
using testutil::close_rel;

namespace {

GateParams static_gate(std::vector<double> logits, double tau = 1.0, double theta = 0.5) {
  GateParams g;
  g.mode = GateMode::kStatic;
  g.static_logits = std::move(logits);
  g.tau = tau;
  g.theta = theta;
  return g;
}

}  // namespace

TEST_CASE("gate_logits broadcasts static logits and applies the dynamic affine map") {
  const Matrix h2 = Matrix(2, 3, 0.0);
  const Matrix out = gate_logits(static_gate({0.3, -0.3}), h2);
  REQUIRE(out.rows == 2);
  for (std::size_t s = 0; s < 2; ++s) {
    CHECK(out(s, 0) == 0.3);
    CHECK(out(s, 1) == -0.3);
  }

  GateParams dyn;
  dyn.mode = GateMode::kDynamic;
  dyn.gate_W = Matrix::from_rows({{1, 0}});
  dyn.gate_b = {0};
  CHECK(gate_logits(dyn, Matrix::from_rows({{2, 9}}))(0, 0) == 2.0);

  dyn.gate_W = Matrix(1, 2, 0.0);
  dyn.gate_b = {3.25};
  const Matrix all_c = gate_logits(dyn, Matrix::from_rows({{2, 9}, {-1, 4}}));
  for (double v : all_c.data) CHECK(v == 3.25);

  GatedLayer no_gate;
  no_gate.W = Matrix(1, 2);
  no_gate.b = {0};
  CHECK_THROWS_AS(gate_logits(no_gate, h2), ContractError);
}

TEST_CASE("gate_probs sigmoid values and temperature scaling") {
  CHECK(gate_probs(Matrix::from_rows({{0}}), 1.0)(0, 0) == 0.5);
  CHECK(std::abs(gate_probs(Matrix::from_rows({{std::log(3.0)}}), 1.0)(0, 0) - 0.75) <= 1e-15);
  // z/tau identity: (1, tau=2) == (0.5, tau=1) bitwise.
  CHECK(gate_probs(Matrix::from_rows({{1}}), 2.0)(0, 0) ==
        gate_probs(Matrix::from_rows({{0.5}}), 1.0)(0, 0));
  CHECK_THROWS_AS(gate_probs(Matrix(1, 1), 0.0), ValidationError);
  CHECK_THROWS_AS(gate_probs(Matrix(1, 1), -1.0), ValidationError);
}

TEST_CASE("hard_gate uses a strict threshold") {
  CHECK(hard_gate(Matrix::from_rows({{0.5}}), 0.5)(0, 0) == 0.0);
  CHECK(hard_gate(Matrix::from_rows({{0.51}}), 0.5)(0, 0) == 1.0);
  const Matrix p = Matrix::from_rows({{0.01, 0.99, 0.4}});
  const Matrix all_open = hard_gate(p, 0.0);
  for (double v : all_open.data) CHECK(v == 1.0);

  // Monotone: raising theta never opens a gate.
  Rng rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix probs = testutil::random_matrix(3, 6, rng, 0.0, 1.0);
    const double t1 = rng.uniform();
    const double t2 = t1 + (1.0 - t1) * rng.uniform();
    const Matrix g1 = hard_gate(probs, t1);
    const Matrix g2 = hard_gate(probs, t2);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2.data[i] <= g1.data[i]);
  }
}

TEST_CASE("topk_gate picks the k largest with lowest-index ties") {
  CHECK(topk_gate(Matrix::from_rows({{0.9, 0.1, 0.5}}), 2) ==
        Matrix::from_rows({{1, 0, 1}}));
  CHECK(topk_gate(Matrix::from_rows({{0.5, 0.5, 0.1}}), 1) ==
        Matrix::from_rows({{1, 0, 0}}));
  const Matrix full = topk_gate(Matrix::from_rows({{0.2, 0.8, 0.5}}), 3);
  for (double v : full.data) CHECK(v == 1.0);
  CHECK_THROWS_AS(topk_gate(Matrix(1, 3), 0), ValidationError);
  CHECK_THROWS_AS(topk_gate(Matrix(1, 3), 4), ValidationError);

  Rng rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const Matrix p = testutil::random_matrix(4, 7, rng, 0.0, 1.0);
    const std::size_t k = 1 + rng.below(7);
    const Matrix g = topk_gate(p, k);
    for (std::size_t s = 0; s < g.rows; ++s) {
      double sum = 0;
      for (std::size_t i = 0; i < g.cols; ++i) sum += g(s, i);
      CHECK(sum == static_cast<double>(k));
    }
  }
}

TEST_CASE("init_gate_bias inverts the sigmoid at p0") {
  CHECK(init_gate_bias(0.5, 1.0) == 0.0);
  CHECK(init_gate_bias(0.5, 7.3) == 0.0);
  CHECK(std::abs(init_gate_bias(0.8, 1.0) - std::log(4.0)) <= 1e-12);
  CHECK(std::abs(init_gate_bias(0.8, 2.0) - 2.0 * std::log(4.0)) <= 1e-12);
  CHECK_THROWS_AS(init_gate_bias(0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(init_gate_bias(1.0, 1.0), ValidationError);
  // Round trip: sigmoid(bias/tau) == p0.
  const double bias = init_gate_bias(0.8, 1.7);
  CHECK(std::abs(1.0 / (1.0 + std::exp(-bias / 1.7)) - 0.8) <= 1e-12);
}

TEST_CASE("gated_forward without gates reduces to the dense forward bit-for-bit") {
  Rng rng(21);
  GatedMlp model = testutil::random_dense_model({6, 5, 3}, rng);
  const Matrix x = testutil::random_matrix(4, 6, rng);
  GateTrace trace = gated_forward(model, x, GatePolicy{});
  CHECK(trace.logits() == testutil::dense_reference_forward(model, x));
}

TEST_CASE("gated_forward with theta 0 and open gates reduces to the dense forward") {
  Rng rng(22);
  GatedMlp model = testutil::random_dense_model({6, 5, 3}, rng);
  model.input_gate = static_gate(std::vector<double>(6, 0.4));
  model.layers[0].gate = static_gate(std::vector<double>(5, -0.2));
  const Matrix x = testutil::random_matrix(4, 6, rng);

  GatePolicy policy;
  policy.mode = ExecMode::kHard;
  policy.theta_override = 0.0;  // sigmoid output is always > 0
  GateTrace trace = gated_forward(model, x, policy);
  CHECK(trace.logits() == testutil::dense_reference_forward(model, x));
  REQUIRE(trace.gates[0].has_value());
  for (double v : trace.gates[0]->mult.data) CHECK(v == 1.0);
}

TEST_CASE("a closed single hidden unit leaves only the bias path") {
  GatedMlp model;
  model.layers.resize(2);
  model.layers[0].W = Matrix::from_rows({{1.0, -2.0}});
  model.layers[0].b = {0.5};
  model.layers[0].gate = static_gate({-40.0});  // p ~ 0 < theta -> g = 0
  model.layers[1].W = Matrix::from_rows({{3.0}, {-1.0}});
  model.layers[1].b = {0.25, -0.75};

  GateTrace trace = gated_forward(model, Matrix::from_rows({{1.0, 0.5}}), GatePolicy{});
  CHECK(trace.logits()(0, 0) == 0.25);
  CHECK(trace.logits()(0, 1) == -0.75);
  CHECK(trace.gates[1]->mult(0, 0) == 0.0);
}

TEST_CASE("ste surrogate evaluates to p(1-p)/tau times the upstream gradient") {
  // 1-1-1 net rigged so dJ/dg == 1 exactly: W2 = [[1]], raw hidden == 1.
  auto build = [](double tau) {
    GatedMlp model;
    model.layers.resize(2);
    model.layers[0].W = Matrix::from_rows({{1.0}});
    model.layers[0].b = {0.0};
    model.layers[0].gate = static_gate({0.0}, tau, 0.4);  // z=0 -> p=0.5 -> g=1
    model.layers[1].W = Matrix::from_rows({{1.0}});
    model.layers[1].b = {0.0};
    return model;
  };
  const Matrix x = Matrix::from_rows({{1.0}});
  const Matrix upstream = Matrix::from_rows({{1.0}});

  for (double tau : {1.0, 2.0}) {
    GatedMlp model = build(tau);
    GateTrace trace = gated_forward(model, x, GatePolicy{});
    ModelGrads grads = ste_backward(model, trace, upstream);
    CHECK(grads.gates[1]->dstatic[0] == 0.25 / tau);
  }

  // Saturated gate: p ~ 1 kills the surrogate.
  GatedMlp sat = build(1.0);
  sat.layers[0].gate->static_logits = {40.0};
  GateTrace trace = gated_forward(sat, x, GatePolicy{});
  ModelGrads grads = ste_backward(sat, trace, upstream);
  CHECK(std::abs(grads.gates[1]->dstatic[0]) < 1e-12);
}

TEST_CASE("ste gate-logit gradients equal the hand-coded chain rule exactly") {
  Rng rng(33);
  GatedMlp model = testutil::random_dense_model({3, 2, 3}, rng);
  std::vector<double> logits = {0.6, -0.1};
  model.layers[0].gate = static_gate(logits, 1.3, 0.45);

  const Matrix x = testutil::random_matrix(4, 3, rng);
  std::vector<int> labels = {0, 2, 1, 1};
  GateTrace trace = gated_forward(model, x, GatePolicy{});
  const auto xent = softmax_cross_entropy(trace.logits(), labels);
  ModelGrads grads = ste_backward(model, trace, xent.dlogits);

  // Hand chain rule on the forward that used g: dJ/dg[s,i] =
  // sum_c dlogits[s,c] * W2[c,i] * raw[s,i]; then the STE surrogate.
  const GateParams& gate = *model.layers[0].gate;
  const Matrix raw = relu(trace.z[0]);
  const Matrix& W2 = model.layers[1].W;
  std::vector<double> want(2, 0.0);
  for (std::size_t s = 0; s < x.rows; ++s) {
    for (std::size_t i = 0; i < 2; ++i) {
      double dj_dg = 0.0;
      for (std::size_t c = 0; c < 3; ++c) dj_dg += xent.dlogits(s, c) * W2(c, i);
      dj_dg *= raw(s, i);
      const double p = trace.gates[1]->p(s, i);
      want[i] += dj_dg * p * (1.0 - p) / gate.tau;
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(grads.gates[1]->dstatic[i] - want[i]) <= 1e-12);
  }
}

TEST_CASE("soft mode full gradient matches finite differences") {
  for (std::uint64_t seed : {11, 12, 13, 14, 15}) {
    Rng rng(seed);
    GatedMlp model = testutil::random_dense_model({5, 4, 3}, rng);
    // Input gate static, hidden gate dynamic: exercises both parameterizations
    // and the gate-net input path.
    model.input_gate = static_gate({0.3, -0.2, 0.1, 0.5, -0.4}, 1.2, 0.5);
    GateParams dyn;
    dyn.mode = GateMode::kDynamic;
    dyn.gate_W = testutil::random_matrix(4, 5, rng, -0.5, 0.5);
    dyn.gate_b = {0.1, -0.1, 0.2, 0.0};
    dyn.tau = 0.9;
    model.layers[0].gate = dyn;

    const Matrix x = testutil::random_matrix(6, 5, rng);
    std::vector<int> labels(6);
    for (int& l : labels) l = static_cast<int>(rng.below(3));
    const double lambda = 0.35;

    GatePolicy policy;
    policy.mode = ExecMode::kSoft;
    GateTrace trace = gated_forward(model, x, policy);
    const auto xent = softmax_cross_entropy(trace.logits(), labels);
    PenaltySpec pen;
    pen.lambda_g = lambda;
    ModelGrads grads = ste_backward(model, trace, xent.dlogits, pen);
    const auto analytic = testutil::pack_grads(model, grads);

    GatedMlp probe = model;
    auto objective = [&](const std::vector<double>& flat) {
      testutil::unpack_params(probe, flat);
      GateTrace t = gated_forward(probe, x, policy);
      double J = softmax_cross_entropy(t.logits(), labels).loss;
      std::vector<Matrix> ps;
      for (const auto& cache : t.gates) {
        if (cache) ps.push_back(cache->p);
      }
      return J + lambda * usage_penalty(ps);
    };
    const auto fd = finite_difference_gradient(objective, testutil::pack_params(model), 1e-5);

    REQUIRE(analytic.size() == fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
      CHECK_MESSAGE(close_rel(analytic[i], fd[i], 1e-4),
                    "seed=" << seed << " i=" << i << " analytic=" << analytic[i]
                            << " fd=" << fd[i]);
    }
  }
}

TEST_CASE("cost-weighted penalty gradient matches finite differences in soft mode") {
  Rng rng(77);
  GatedMlp model = testutil::random_dense_model({4, 5, 3}, rng);
  model.input_gate = static_gate({0.2, -0.1, 0.4, 0.0}, 1.1, 0.5);
  model.layers[0].gate = static_gate({0.3, 0.1, -0.2, 0.5, 0.0}, 1.3, 0.5);

  const std::vector<std::vector<double>> costs = {
      {1.0, 3.0, 0.5, 2.0}, {2.0, 2.0, 1.0, 4.0, 0.25}};
  const Matrix x = testutil::random_matrix(5, 4, rng);
  std::vector<int> labels = {0, 1, 2, 0, 1};
  const double lambda = 0.6;

  GatePolicy policy;
  policy.mode = ExecMode::kSoft;
  GateTrace trace = gated_forward(model, x, policy);
  const auto xent = softmax_cross_entropy(trace.logits(), labels);
  PenaltySpec pen;
  pen.lambda_g = lambda;
  pen.costs = &costs;
  const auto analytic =
      testutil::pack_grads(model, ste_backward(model, trace, xent.dlogits, pen));

  GatedMlp probe = model;
  auto objective = [&](const std::vector<double>& flat) {
    testutil::unpack_params(probe, flat);
    GateTrace t = gated_forward(probe, x, policy);
    std::vector<Matrix> ps;
    for (const auto& c : t.gates) {
      if (c) ps.push_back(c->p);
    }
    return softmax_cross_entropy(t.logits(), labels).loss +
           lambda * cost_weighted_penalty(ps, costs);
  };
  const auto fd = finite_difference_gradient(objective, testutil::pack_params(model), 1e-5);
  REQUIRE(analytic.size() == fd.size());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    CHECK_MESSAGE(close_rel(analytic[i], fd[i], 1e-4),
                  "i=" << i << " analytic=" << analytic[i] << " fd=" << fd[i]);
  }
}

TEST_CASE("activity floor forces the highest-p units and is flagged in the trace") {
  GatedMlp model;
  model.layers.resize(2);
  model.layers[0].W = Matrix(4, 3, 0.1);
  model.layers[0].b = {1, 1, 1, 1};
  model.layers[0].gate = static_gate({-9.0, -8.0, -10.0, -7.0}, 1.0, 0.5);
  model.layers[1].W = Matrix(2, 4, 0.1);
  model.layers[1].b = {0, 0};

  GatePolicy policy;
  policy.r_min = 0.5;  // ceil(0.5 * 4) = 2 units per row
  GateTrace trace = gated_forward(model, Matrix(3, 3, 1.0), policy);
  const GateCache& cache = *trace.gates[1];
  CHECK(cache.floor_forced == 6);  // 2 per row, 3 rows
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(cache.mult(s, 3) == 1.0);  // highest p (logit -7)
    CHECK(cache.mult(s, 1) == 1.0);  // second highest (logit -8)
    CHECK(cache.mult(s, 0) == 0.0);
    CHECK(cache.mult(s, 2) == 0.0);
  }
}

TEST_CASE("topk mode applies the per-gate budget") {
  Rng rng(9);
  GatedMlp model = testutil::random_dense_model({4, 6, 2}, rng);
  GateParams g = static_gate({0.9, 0.1, 0.4, 0.8, -0.5, 0.2});
  g.topk_k = 2;
  model.layers[0].gate = g;

  GatePolicy policy;
  policy.mode = ExecMode::kTopK;
  GateTrace trace = gated_forward(model, testutil::random_matrix(3, 4, rng), policy);
  for (std::size_t s = 0; s < 3; ++s) {
    double sum = 0;
    for (std::size_t i = 0; i < 6; ++i) sum += trace.gates[1]->mult(s, i);
    CHECK(sum == 2.0);
  }
  CHECK(trace.gates[1]->topk_used);
}

TEST_CASE("model consistency checks reject bad wiring") {
  Rng rng(2);
  GatedMlp model = testutil::random_dense_model({4, 3, 2}, rng);
  model.layers[1].gate = static_gate({0.0, 0.0});
  CHECK_THROWS_AS(model.check_consistent(), ContractError);  // output gated

  GatedMlp bad_gate = testutil::random_dense_model({4, 3, 2}, rng);
  bad_gate.layers[0].gate = static_gate({0.0, 0.0});  // width 2 vs 3
  CHECK_THROWS_AS(bad_gate.check_consistent(), DimensionError);

  GatedMlp ok = testutil::random_dense_model({4, 3, 2}, rng);
  ok.layers[0].gate = static_gate({0.0, 0.0, 0.0});
  CHECK_NOTHROW(ok.check_consistent());
}
