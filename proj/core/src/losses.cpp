#include "hybrec/losses.hpp"

#include <algorithm>
#include <cmath>

#include "hybrec/errors.hpp"
#include "hybrec/linalg.hpp"

namespace hybrec {

namespace {

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double bernoulli_kl_logits(double teacher, double student) {
  const double p = sigmoid(teacher);
  const double kl = p * (log_sigmoid(teacher) - log_sigmoid(student)) +
                    (1.0 - p) * (log_sigmoid(-teacher) - log_sigmoid(-student));
  return kl;
}

void check_distill(std::span<const double> s, std::span<const double> t, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("distill_loss: temperature must be positive");
  if (s.size() != t.size()) throw InvalidArgument("distill_loss: student/teacher length mismatch");
  if (s.empty()) throw InvalidArgument("distill_loss: empty batch");
}

}  // namespace

double bce_loss(std::span<const double> probs, std::span<const double> labels) {
  if (probs.empty()) throw InvalidArgument("bce_loss: empty batch");
  if (probs.size() != labels.size()) throw InvalidArgument("bce_loss: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    const double y = labels[i];
    sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return sum / static_cast<double>(probs.size());
}

double distill_soft_term(std::span<const double> student_logits, std::span<const double> teacher_logits,
                         double temperature) {
  check_distill(student_logits, teacher_logits, temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < student_logits.size(); ++i) {
    sum += bernoulli_kl_logits(teacher_logits[i] / temperature, student_logits[i] / temperature);
  }
  return temperature * temperature * sum / static_cast<double>(student_logits.size());
}

double distill_loss(std::span<const double> student_logits, std::span<const double> teacher_logits,
                    std::span<const double> labels, double temperature, double lambda) {
  check_distill(student_logits, teacher_logits, temperature);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("distill_loss: lambda must be in [0, 1]");
  std::vector<double> probs(student_logits.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = sigmoid(student_logits[i]);
  const double hard = bce_loss(probs, labels);
  const double soft = distill_soft_term(student_logits, teacher_logits, temperature);
  return lambda * hard + (1.0 - lambda) * soft;
}

LossGrad bce_with_grad(std::span<const double> logits, std::span<const double> labels) {
  if (logits.size() != labels.size()) throw InvalidArgument("bce_loss: length mismatch");
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = sigmoid(logits[i]);
  LossGrad out{bce_loss(probs, labels), std::vector<double>(logits.size())};
  const double n = static_cast<double>(logits.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
    out.d_logits[i] = clamped ? 0.0 : (p - labels[i]) / n;
  }
  return out;
}

LossGrad distill_with_grad(std::span<const double> student_logits, std::span<const double> teacher_logits,
                           std::span<const double> labels, double temperature, double lambda) {
  LossGrad out{distill_loss(student_logits, teacher_logits, labels, temperature, lambda), {}};
  LossGrad hard = bce_with_grad(student_logits, labels);
  const double n = static_cast<double>(student_logits.size());
  out.d_logits.resize(student_logits.size());
  for (std::size_t i = 0; i < out.d_logits.size(); ++i) {
    const double ps = sigmoid(student_logits[i] / temperature);
    const double pt = sigmoid(teacher_logits[i] / temperature);
    const double soft = temperature * (ps - pt) / n;
    out.d_logits[i] = lambda * hard.d_logits[i] + (1.0 - lambda) * soft;
  }
  return out;
}

}  // namespace hybrec
