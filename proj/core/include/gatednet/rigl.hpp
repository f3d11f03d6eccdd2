#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gatednet/matrix.hpp"
#include "gatednet/rng.hpp"

namespace gatednet {

// Binary connection mask over an n_out x n_in weight matrix with a fixed
// population-count budget. Outside an in-flight update, popcount(bits) ==
// budget always.
struct SparseMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;   // row-major 0/1
  std::size_t budget = 0;

  bool at(std::size_t r, std::size_t c) const { return bits[r * cols + c] != 0; }
  std::size_t popcount() const;
  std::size_t size() const { return rows * cols; }
};

// Uniform-random mask with exactly budget = round((1-s) * rows * cols) active
// entries. s == 0 short-circuits to the all-ones mask without consuming rng
// draws (dense limit must leave sibling streams untouched).
SparseMask init_sparse_mask(std::size_t rows, std::size_t cols, double sparsity, Rng& rng);

// Elementwise W .* m; masked entries are exactly 0.
Matrix apply_mask(const Matrix& W, const SparseMask& m);

// popcount / size.
double mask_density(const SparseMask& m);

struct RewireResult {
  SparseMask mask;
  std::vector<std::size_t> pruned;   // flat indices dropped (were active)
  std::vector<std::size_t> grown;    // flat indices added (were inactive)
  std::size_t k_applied = 0;
  bool clamped = false;              // requested K exceeded the feasible maximum
};

// One RigL rewire: drop the K active entries of smallest |W|, add the K
// inactive entries of largest |grad|. Ties break toward the lowest flat
// index. Population count is preserved; K is clamped to
// min(active, inactive) with clamped=true when the request was infeasible.
RewireResult rigl_update(const Matrix& W, const Matrix& grad, const SparseMask& m,
                         std::size_t k);

struct RiglConfig {
  double sparsity = 0.5;          // s, applied to every masked layer
  std::size_t update_period = 100;  // delta-T in optimizer steps
  double rewire_fraction = 0.1;   // K as a fraction of the layer budget
  bool cosine_decay = false;      // optionally decay K over total steps
  bool mask_output_layer = false; // the classification head stays dense by default

  // K for one layer at global step t out of total_steps.
  std::size_t rewire_count(std::size_t budget, std::size_t step,
                           std::size_t total_steps) const;
};

}  // namespace gatednet
