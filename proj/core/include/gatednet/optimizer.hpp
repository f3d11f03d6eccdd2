#pragma once

#include <cstddef>
#include <vector>

#include "gatednet/gates.hpp"

namespace gatednet {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;  // decoupled, applied to weight matrices only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// AdamW over a GatedMlp's parameters. Coordinates under a connection mask are
// skipped entirely: no moment update, no decay, no step — masked weights stay
// bit-identical between rewires.
class AdamW {
 public:
  AdamW(const GatedMlp& model, AdamWConfig cfg);

  void step(GatedMlp& model, const ModelGrads& grads);

  // Zeroes the moments of a weight coordinate; used when RigL grows a
  // connection so the fresh weight starts without stale momentum.
  void reset_weight_moment(std::size_t layer, std::size_t flat_index);

  std::size_t steps_taken() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  struct GateMoments {
    Moments logits;  // static logits or gate_b
    Moments gw;      // dynamic gate_W
  };

  AdamWConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Moments> w_;
  std::vector<Moments> b_;
  std::vector<GateMoments> gates_;  // indexed by activation vector

  void apply(Moments& mom, std::vector<double>& param, const std::vector<double>& grad,
             double decay, const std::uint8_t* mask_bits, double bc1, double bc2);
};

}  // namespace gatednet
