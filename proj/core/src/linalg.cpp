#include "hybrec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hybrec/errors.hpp"

namespace hybrec {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw InvalidArgument("Matrix: value count does not match rows x cols");
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidArgument("Matrix::from_rows: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(values));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: inner dimension mismatch " + shape(a) + " * " + shape(b));
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.row(i).data();
    const double* arow = a.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = arow[k];
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
    }
  }
  return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw InvalidArgument("matmul_at_b: row mismatch " + shape(a) + " vs " + shape(b));
  }
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* arow = a.row(k).data();
    const double* brow = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = arow[i];
      if (s == 0.0) continue;
      double* dst = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += s * brow[j];
    }
  }
  return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw InvalidArgument("matmul_a_bt: column mismatch " + shape(a) + " vs " + shape(b));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(arow, b.row(j));
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  add_scaled_inplace(out, b, 1.0);
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  add_scaled_inplace(out, b, -1.0);
  return out;
}

Matrix scaled(const Matrix& m, double s) {
  Matrix out = m;
  for (double& v : out.values()) v *= s;
  return out;
}

void add_scaled_inplace(Matrix& dst, const Matrix& src, double s) {
  require_same_shape(dst, src, "add_scaled_inplace");
  auto d = dst.values();
  auto x = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * x[i];
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix sigmoid(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.values().begin(), m.values().end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

GradCheckReport grad_check(const std::function<double()>& loss, std::span<const GradProbe> probes,
                           double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("grad_check: epsilon must be positive");
  GradCheckReport report;
  for (const auto& probe : probes) {
    if (probe.value == nullptr || probe.analytic == nullptr) {
      throw InvalidArgument("grad_check: probe '" + probe.name + "' has no value or gradient");
    }
    if (probe.value->rows() != probe.analytic->rows() || probe.value->cols() != probe.analytic->cols()) {
      throw InvalidArgument("grad_check: gradient shape mismatch for '" + probe.name + "'");
    }
    auto theta = probe.value->values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + epsilon;
      const double up = loss();
      theta[i] = saved - epsilon;
      const double down = loss();
      theta[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw DivergenceError("grad_check: non-finite loss probing parameter '" + probe.name + "' index " +
                              std::to_string(i));
      }
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = probe.analytic->values()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_param = probe.name;
        report.worst_index = i;
      }
      ++report.scalars_checked;
    }
  }
  return report;
}

}  // namespace hybrec
