#pragma once

#include <functional>
#include <vector>

#include "gatednet/matrix.hpp"
#include "gatednet/rng.hpp"

namespace gatednet {

// out[s,i] = sum_j W[i,j]*h[s,j] + b[i]. W is n_out x n_in, h is batch x n_in.
// The reduction over j runs in ascending order so repeated runs are
// bit-identical.
Matrix affine_forward(const Matrix& W, const std::vector<double>& b, const Matrix& h);

struct AffineGrads {
  Matrix dW;                // n_out x n_in
  std::vector<double> db;   // n_out
  Matrix dinput;            // batch x n_in
};

// Gradients of an affine layer given upstream dout (batch x n_out).
AffineGrads affine_backward(const Matrix& W, const Matrix& input, const Matrix& dout);

Matrix relu(const Matrix& x);

// dout masked by 1[z > 0].
Matrix relu_backward(const Matrix& z, const Matrix& dout);

struct XentResult {
  double loss = 0.0;        // mean over batch of -log softmax(logits)[label]
  Matrix dlogits;           // (softmax - onehot) / batch
};

// Row-max-stabilized softmax cross entropy. Labels must lie in [0, C).
XentResult softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels);

// Central differences (f(x+eps e_i) - f(x-eps e_i)) / (2 eps). Test oracle,
// kept independent of every analytic gradient path in this library.
std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double eps);

// He-uniform fill: entries ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), drawn
// row-major from rng.
void he_uniform_init(Matrix& W, Rng& rng);

}  // namespace gatednet
