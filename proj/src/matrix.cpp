#include "mgcn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace mgcn {

Matrix::Matrix(int rows, int cols, std::initializer_list<double> vals)
    : rows_(rows), cols_(cols), v_(vals) {
  if (v_.size() != static_cast<size_t>(rows) * cols) {
    throw std::invalid_argument("Matrix: initializer size does not match shape");
  }
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool all_finite(const Matrix& m) {
  for (double x : m.raw()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(a.raw()[i] - b.raw()[i]));
  }
  return worst;
}

bool bit_identical(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace mgcn
