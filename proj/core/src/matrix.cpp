#include "gatednet/matrix.hpp"

#include <cmath>

#include "gatednet/error.hpp"

namespace gatednet {

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows_in) {
  Matrix m;
  m.rows = rows_in.size();
  m.cols = rows_in.empty() ? 0 : rows_in.front().size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows_in) {
    if (r.size() != m.cols) {
      throw DimensionError("from_rows: ragged row lengths " + std::to_string(r.size()) +
                           " vs " + std::to_string(m.cols));
    }
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

bool all_finite(const Matrix& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

}  // namespace gatednet
