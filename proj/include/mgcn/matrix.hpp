#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace mgcn {

// Dense row-major matrix of 64-bit reals. All model math runs in double;
// 32-bit float is an on-disk format only.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {}
  Matrix(int rows, int cols, std::initializer_list<double> vals);

  static Matrix identity(int n);
  static Matrix scalar(double x) { return Matrix(1, 1, x); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

  double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * cols_ + j]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  const std::vector<double>& raw() const { return v_; }
  std::vector<double>& raw() { return v_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool bit_identical(const Matrix& a, const Matrix& b);
std::string shape_string(const Matrix& m);

}  // namespace mgcn
