#pragma once

#include <optional>
#include <span>
#include <vector>

#include "hybrec/linalg.hpp"
#include "hybrec/rng.hpp"

namespace hybrec {

// Feedforward recommendation head: sigmoid(out . relu(z * hidden + hidden_bias) + out_bias).
struct PredictionHead {
  Matrix hidden;       // input_width x d_h
  Matrix hidden_bias;  // 1 x d_h
  Matrix out;          // d_h x 1
  Matrix out_bias;     // 1 x 1

  std::size_t input_width() const { return hidden.rows(); }
  std::size_t hidden_width() const { return hidden.cols(); }

  // Glorot-uniform weights, zero biases.
  static PredictionHead init(std::size_t input_width, std::size_t hidden_width, Rng& rng);
  static PredictionHead zeros(std::size_t input_width, std::size_t hidden_width);
};

// z = [h_u | e_u | h_i | e_i]; absent semantic vectors become zeros of
// length d_s. Throws InvalidArgument on any length mismatch.
std::vector<double> fuse(std::span<const double> h_u, std::optional<std::span<const double>> e_u,
                         std::span<const double> h_i, std::optional<std::span<const double>> e_i, std::size_t d_s);

// Writes the fused vector into `out` (length 2 * (h_u.size() + d_s)).
void fuse_into(std::span<const double> h_u, std::span<const double> e_u, std::span<const double> h_i,
               std::span<const double> e_i, std::span<double> out);

double score_logit(std::span<const double> z, const PredictionHead& head);
double predict(std::span<const double> z, const PredictionHead& head);

// Batched forward over rows of z. Intermediates are kept for backward.
struct HeadActivations {
  Matrix pre;     // batch x d_h, before ReLU
  Matrix hidden;  // batch x d_h
};

std::vector<double> head_forward(const Matrix& z, const PredictionHead& head, HeadActivations* keep = nullptr);

struct HeadBackward {
  Matrix d_out;          // d_h x 1
  Matrix d_out_bias;     // 1 x 1
  Matrix d_hidden_bias;  // 1 x d_h
  Matrix d_pre;          // batch x d_h; d_hidden = z^T d_pre, d_z = d_pre hidden^T
};

HeadBackward head_backward(const HeadActivations& acts, const PredictionHead& head, std::span<const double> d_logits);

}  // namespace hybrec
