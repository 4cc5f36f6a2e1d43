#include "hybrec/quant.hpp"

#include <algorithm>
#include <cmath>

#include "hybrec/errors.hpp"

namespace hybrec {

namespace {

std::vector<double> quantized_hidden(std::span<const double> z, const QuantizedHead& qhead) {
  const auto& q = qhead.hidden;
  if (z.size() != q.rows) throw InvalidArgument("qscore: input width mismatch");
  std::vector<double> pre(q.cols, 0.0);
  for (std::size_t k = 0; k < q.rows; ++k) {
    const double s = z[k] * q.scales[k];
    const std::int8_t* row = q.qvalues.data() + k * q.cols;
    for (std::size_t j = 0; j < q.cols; ++j) pre[j] += s * static_cast<double>(row[j]);
  }
  for (std::size_t j = 0; j < q.cols; ++j) {
    const double a = pre[j] + qhead.hidden_bias(0, j);
    pre[j] = a > 0.0 ? a : 0.0;
  }
  return pre;
}

}  // namespace

QuantizedMatrix quantize_per_row(const Matrix& w) {
  QuantizedMatrix q{w.rows(), w.cols(), std::vector<std::int8_t>(w.size()), std::vector<double>(w.rows())};
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const auto row = w.row(i);
    double max_abs = 0.0;
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidArgument("quantize_per_row: non-finite weight");
      max_abs = std::max(max_abs, std::abs(v));
    }
    const double s = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
    q.scales[i] = s;
    for (std::size_t j = 0; j < row.size(); ++j) {
      // std::round rounds halfway cases away from zero.
      const double r = std::clamp(std::round(row[j] / s), -127.0, 127.0);
      q.qvalues[i * w.cols() + j] = static_cast<std::int8_t>(r);
    }
  }
  return q;
}

Matrix dequantize(const QuantizedMatrix& q) {
  Matrix w(q.rows, q.cols);
  for (std::size_t i = 0; i < q.rows; ++i)
    for (std::size_t j = 0; j < q.cols; ++j) w(i, j) = static_cast<double>(q.at(i, j)) * q.scales[i];
  return w;
}

QuantizedHead QuantizedHead::from(const PredictionHead& head) {
  return {quantize_per_row(head.hidden), head.hidden_bias, quantize_per_row(head.out), head.out_bias};
}

PredictionHead QuantizedHead::dequantized() const {
  return {dequantize(hidden), hidden_bias, dequantize(out), out_bias};
}

double qscore_logit(std::span<const double> z, const QuantizedHead& qhead) {
  const auto h = quantized_hidden(z, qhead);
  if (qhead.out.rows != h.size() || qhead.out.cols != 1) throw InvalidArgument("qscore: output layer shape mismatch");
  double logit = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    logit += h[j] * (static_cast<double>(qhead.out.at(j, 0)) * qhead.out.scales[j]);
  }
  return logit + qhead.out_bias(0, 0);
}

double qscore(std::span<const double> z, const QuantizedHead& qhead) { return sigmoid(qscore_logit(z, qhead)); }

double qscore_error_bound(std::span<const double> z, const PredictionHead& head, const QuantizedHead& qhead) {
  const auto h = quantized_hidden(z, qhead);
  double pre_shift = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) pre_shift += std::abs(z[k]) * qhead.hidden.scales[k] / 2.0;
  double bound = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    bound += std::abs(h[j]) * qhead.out.scales[j] / 2.0;
    bound += std::abs(head.out(j, 0)) * pre_shift;
  }
  return bound;
}

}  // namespace hybrec
