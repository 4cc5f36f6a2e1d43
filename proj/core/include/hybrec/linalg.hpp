#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hybrec {

// Dense row-major matrix of doubles. Vectors are 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  void fill(double v);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// Products. Each output element accumulates over the inner dimension in
// ascending index order, so results are reproducible bit-for-bit.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& m, double s);
void add_scaled_inplace(Matrix& dst, const Matrix& src, double s);

double sigmoid(double x);
Matrix relu(const Matrix& x);
Matrix sigmoid(const Matrix& x);

bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
double dot(std::span<const double> a, std::span<const double> b);

// One parameter matrix paired with its analytic gradient, as seen by grad_check.
struct GradProbe {
  std::string name;
  Matrix* value = nullptr;
  const Matrix* analytic = nullptr;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t scalars_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Compares analytic gradients against central differences
// (f(t+eps) - f(t-eps)) / 2eps for every scalar of every probe. Relative error
// uses the denominator max(|analytic|, |numeric|, 1e-8). Parameters are
// perturbed in place and restored. Throws DivergenceError naming the parameter
// and flat index when the loss is non-finite at a probe point.
GradCheckReport grad_check(const std::function<double()>& loss, std::span<const GradProbe> probes,
                           double epsilon);

}  // namespace hybrec
