#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gatednet {

// Dense row-major matrix of doubles; the sole numeric container of the
// toolkit. data.size() == rows*cols always.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double* row(std::size_t r) { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows_in);
};

bool operator==(const Matrix& a, const Matrix& b);

// True iff every entry is finite (no NaN/Inf).
bool all_finite(const Matrix& m);

std::string shape_str(const Matrix& m);

// Throws DimensionError naming both shapes unless a and b agree.
void require_same_shape(const Matrix& a, const Matrix& b, const char* op);

Matrix hadamard(const Matrix& a, const Matrix& b);

}  // namespace gatednet
