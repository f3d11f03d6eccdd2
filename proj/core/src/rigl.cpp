#include "gatednet/rigl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gatednet/error.hpp"

namespace gatednet {

std::size_t SparseMask::popcount() const {
  std::size_t n = 0;
  for (auto b : bits) n += b != 0;
  return n;
}

SparseMask init_sparse_mask(std::size_t rows, std::size_t cols, double sparsity, Rng& rng) {
  if (sparsity < 0.0 || sparsity >= 1.0) {
    throw ValidationError("init_sparse_mask: sparsity must be in [0,1), got " +
                          std::to_string(sparsity));
  }
  SparseMask m;
  m.rows = rows;
  m.cols = cols;
  const std::size_t n = rows * cols;
  if (sparsity == 0.0) {
    // Dense limit: all ones, no rng draws.
    m.bits.assign(n, 1);
    m.budget = n;
    return m;
  }
  const std::size_t budget =
      static_cast<std::size_t>(std::llround((1.0 - sparsity) * static_cast<double>(n)));
  if (budget == 0) {
    throw ValidationError("init_sparse_mask: budget rounds to 0 for " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          " at sparsity " + std::to_string(sparsity));
  }
  m.budget = budget;
  m.bits.assign(n, 0);
  // Partial Fisher-Yates: the first `budget` entries of a virtual shuffle.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < budget; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
    m.bits[idx[i]] = 1;
  }
  return m;
}

Matrix apply_mask(const Matrix& W, const SparseMask& m) {
  if (W.rows != m.rows || W.cols != m.cols) {
    throw DimensionError("apply_mask: W " + shape_str(W) + " vs mask " +
                         std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
  Matrix out(W.rows, W.cols);
  for (std::size_t i = 0; i < W.data.size(); ++i)
    out.data[i] = m.bits[i] ? W.data[i] : 0.0;
  return out;
}

double mask_density(const SparseMask& m) {
  if (m.size() == 0) return 0.0;
  return static_cast<double>(m.popcount()) / static_cast<double>(m.size());
}

RewireResult rigl_update(const Matrix& W, const Matrix& grad, const SparseMask& m,
                         std::size_t k) {
  if (W.rows != m.rows || W.cols != m.cols) {
    throw DimensionError("rigl_update: W " + shape_str(W) + " vs mask " +
                         std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
  require_same_shape(W, grad, "rigl_update");

  std::vector<std::size_t> active, inactive;
  active.reserve(m.budget);
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    (m.bits[i] ? active : inactive).push_back(i);
  }

  RewireResult res;
  res.mask = m;
  const std::size_t feasible = std::min(active.size(), inactive.size());
  res.k_applied = std::min(k, feasible);
  res.clamped = k > feasible;
  if (res.k_applied == 0) return res;

  // Prune: smallest |W| among active; ties toward the lowest flat index.
  std::sort(active.begin(), active.end(), [&W](std::size_t a, std::size_t b) {
    const double wa = std::fabs(W.data[a]), wb = std::fabs(W.data[b]);
    if (wa != wb) return wa < wb;
    return a < b;
  });
  // Grow: largest |grad| among inactive; same tie rule.
  std::sort(inactive.begin(), inactive.end(), [&grad](std::size_t a, std::size_t b) {
    const double ga = std::fabs(grad.data[a]), gb = std::fabs(grad.data[b]);
    if (ga != gb) return ga > gb;
    return a < b;
  });

  res.pruned.assign(active.begin(), active.begin() + res.k_applied);
  res.grown.assign(inactive.begin(), inactive.begin() + res.k_applied);
  for (std::size_t i : res.pruned) res.mask.bits[i] = 0;
  for (std::size_t i : res.grown) res.mask.bits[i] = 1;
  return res;
}

std::size_t RiglConfig::rewire_count(std::size_t budget, std::size_t step,
                                     std::size_t total_steps) const {
  double frac = rewire_fraction;
  if (cosine_decay && total_steps > 0) {
    const double u = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
    frac *= 0.5 * (1.0 + std::cos(std::numbers::pi * u));
  }
  return static_cast<std::size_t>(std::llround(frac * static_cast<double>(budget)));
}

}  // namespace gatednet
