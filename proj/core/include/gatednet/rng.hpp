#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gatednet {

// Deterministic random stream. The engine is std::mt19937_64 (exactly
// specified by the standard); uniform and normal transforms are done by hand
// so the stream is bit-identical across standard libraries. Identical seed
// implies identical draw sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller, one deviate per call (two draws each).
  double normal();

  // Uniform integer in [0, n); rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives a substream seed so independent consumers (weights, dropout,
  // per-epoch shuffles) never share draws.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

 private:
  std::mt19937_64 engine_;
};

}  // namespace gatednet
