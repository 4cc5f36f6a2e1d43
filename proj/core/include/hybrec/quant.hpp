#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hybrec/fusion.hpp"
#include "hybrec/linalg.hpp"

namespace hybrec {

// Symmetric per-row INT8 weights: w[i][j] ~= qvalues[i][j] * scales[i].
struct QuantizedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> qvalues;  // row-major, in [-127, 127]
  std::vector<double> scales;        // one per row, > 0

  std::int8_t at(std::size_t r, std::size_t c) const { return qvalues[r * cols + c]; }
  bool operator==(const QuantizedMatrix&) const = default;
};

// s_i = max|w_i| / 127 (1 for all-zero rows); q = clamp(round_half_away(w / s_i), -127, 127).
QuantizedMatrix quantize_per_row(const Matrix& w);
Matrix dequantize(const QuantizedMatrix& q);

// Weight-only quantized prediction head. Biases stay in double precision.
struct QuantizedHead {
  QuantizedMatrix hidden;
  Matrix hidden_bias;
  QuantizedMatrix out;
  Matrix out_bias;

  static QuantizedHead from(const PredictionHead& head);
  PredictionHead dequantized() const;
};

// Logit of the head pipeline with weights dequantized on the fly from INT8.
double qscore_logit(std::span<const double> z, const QuantizedHead& qhead);
double qscore(std::span<const double> z, const QuantizedHead& qhead);

// Upper bound on |qscore_logit - score_logit| for this input:
//   sum_k |h'_k| s_out_k / 2  +  sum_k |w_out_k| * sum_j |z_j| s_hidden_j / 2
// where h' are the quantized-path hidden activations. Each hidden unit's
// pre-activation moves by at most sum_j |z_j| s_j / 2 and ReLU is 1-Lipschitz.
double qscore_error_bound(std::span<const double> z, const PredictionHead& head, const QuantizedHead& qhead);

}  // namespace hybrec
