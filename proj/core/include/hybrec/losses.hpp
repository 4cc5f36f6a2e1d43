#pragma once

#include <span>
#include <vector>

namespace hybrec {

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross-entropy; probabilities are clamped to [1e-7, 1 - 1e-7]
// before the log. Throws InvalidArgument on an empty batch or length mismatch.
double bce_loss(std::span<const double> probs, std::span<const double> labels);

// lambda * bce(sigmoid(student), labels)
//   + (1 - lambda) * T^2 * mean KL(Bern(sigmoid(teacher / T)) || Bern(sigmoid(student / T))).
// Throws InvalidArgument when T <= 0, lambda is outside [0, 1] or lengths differ.
double distill_loss(std::span<const double> student_logits, std::span<const double> teacher_logits,
                    std::span<const double> labels, double temperature, double lambda);

// The soft term alone (without the lambda weighting).
double distill_soft_term(std::span<const double> student_logits, std::span<const double> teacher_logits,
                         double temperature);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> d_logits;
};

// Loss and its derivative with respect to each logit. Where the probability
// clamp is active the derivative of the BCE part is zero, matching the
// clamped loss exactly.
LossGrad bce_with_grad(std::span<const double> logits, std::span<const double> labels);
LossGrad distill_with_grad(std::span<const double> student_logits, std::span<const double> teacher_logits,
                           std::span<const double> labels, double temperature, double lambda);

}  // namespace hybrec
