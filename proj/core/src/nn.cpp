#include "gatednet/nn.hpp"

#include <algorithm>
#include <cmath>

#include "gatednet/error.hpp"

namespace gatednet {

Matrix affine_forward(const Matrix& W, const std::vector<double>& b, const Matrix& h) {
  if (W.cols != h.cols) {
    throw DimensionError("affine_forward: W is " + shape_str(W) + " but h is " +
                         shape_str(h));
  }
  if (b.size() != W.rows) {
    throw DimensionError("affine_forward: b has " + std::to_string(b.size()) +
                         " entries but W is " + shape_str(W));
  }
  Matrix out(h.rows, W.rows);
  for (std::size_t s = 0; s < h.rows; ++s) {
    const double* hrow = h.row(s);
    double* orow = out.row(s);
    for (std::size_t i = 0; i < W.rows; ++i) {
      const double* wrow = W.row(i);
      double acc = 0.0;  // j ascending: fixed reduction order
      for (std::size_t j = 0; j < W.cols; ++j) acc += wrow[j] * hrow[j];
      orow[i] = acc + b[i];
    }
  }
  return out;
}

AffineGrads affine_backward(const Matrix& W, const Matrix& input, const Matrix& dout) {
  if (dout.cols != W.rows || input.cols != W.cols || dout.rows != input.rows) {
    throw DimensionError("affine_backward: W " + shape_str(W) + ", input " +
                         shape_str(input) + ", dout " + shape_str(dout));
  }
  AffineGrads g;
  g.dW = Matrix(W.rows, W.cols);
  g.db.assign(W.rows, 0.0);
  g.dinput = Matrix(input.rows, input.cols);
  for (std::size_t s = 0; s < input.rows; ++s) {
    const double* in_row = input.row(s);
    const double* d_row = dout.row(s);
    double* di_row = g.dinput.row(s);
    for (std::size_t i = 0; i < W.rows; ++i) {
      const double d = d_row[i];
      g.db[i] += d;
      double* dw_row = g.dW.row(i);
      const double* w_row = W.row(i);
      for (std::size_t j = 0; j < W.cols; ++j) {
        dw_row[j] += d * in_row[j];
        di_row[j] += d * w_row[j];
      }
    }
  }
  return g;
}

Matrix relu(const Matrix& x) {
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = std::max(0.0, x.data[i]);
  return out;
}

Matrix relu_backward(const Matrix& z, const Matrix& dout) {
  require_same_shape(z, dout, "relu_backward");
  Matrix out(z.rows, z.cols);
  for (std::size_t i = 0; i < z.data.size(); ++i)
    out.data[i] = z.data[i] > 0.0 ? dout.data[i] : 0.0;
  return out;
}

XentResult softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (labels.size() != logits.rows) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + shape_str(logits) + " logits");
  }
  const std::size_t batch = logits.rows;
  const std::size_t classes = logits.cols;
  XentResult res;
  res.dlogits = Matrix(batch, classes);
  double loss = 0.0;
  for (std::size_t s = 0; s < batch; ++s) {
    const int label = labels[s];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(classes) + ")");
    }
    const double* row = logits.row(s);
    double mx = row[0];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - mx);
    const double log_denom = std::log(denom);
    loss += -(row[label] - mx - log_denom);
    double* drow = res.dlogits.row(s);
    for (std::size_t c = 0; c < classes; ++c) {
      const double softmax = std::exp(row[c] - mx) / denom;
      drow[c] = (softmax - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) /
                static_cast<double>(batch);
    }
  }
  res.loss = loss / static_cast<double>(batch);
  return res;
}

std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double eps) {
  if (eps <= 0.0) throw ValidationError("finite_difference_gradient: eps must be > 0");
  std::vector<double> grad(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double hi = f(probe);
    probe[i] = x[i] - eps;
    const double lo = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(hi) || !std::isfinite(lo)) {
      throw ValidationError("finite_difference_gradient: f returned non-finite value");
    }
    grad[i] = (hi - lo) / (2.0 * eps);
  }
  return grad;
}

void he_uniform_init(Matrix& W, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(W.cols));
  for (double& v : W.data) v = rng.uniform(-limit, limit);
}

}  // namespace gatednet
