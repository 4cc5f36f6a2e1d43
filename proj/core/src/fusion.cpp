#include "hybrec/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "hybrec/errors.hpp"

namespace hybrec {

namespace {

Matrix glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (double& v : m.values()) v = rng.uniform(-limit, limit);
  return m;
}

void check_head(const PredictionHead& head) {
  if (head.hidden_bias.rows() != 1 || head.hidden_bias.cols() != head.hidden_width() ||
      head.out.rows() != head.hidden_width() || head.out.cols() != 1 || head.out_bias.rows() != 1 ||
      head.out_bias.cols() != 1) {
    throw InvalidArgument("PredictionHead: inconsistent layer shapes");
  }
}

}  // namespace

PredictionHead PredictionHead::init(std::size_t input_width, std::size_t hidden_width, Rng& rng) {
  PredictionHead head;
  head.hidden = glorot(input_width, hidden_width, rng);
  head.hidden_bias = Matrix(1, hidden_width);
  head.out = glorot(hidden_width, 1, rng);
  head.out_bias = Matrix(1, 1);
  return head;
}

PredictionHead PredictionHead::zeros(std::size_t input_width, std::size_t hidden_width) {
  return {Matrix(input_width, hidden_width), Matrix(1, hidden_width), Matrix(hidden_width, 1), Matrix(1, 1)};
}

void fuse_into(std::span<const double> h_u, std::span<const double> e_u, std::span<const double> h_i,
               std::span<const double> e_i, std::span<double> out) {
  if (h_u.size() != h_i.size() || e_u.size() != e_i.size() ||
      out.size() != h_u.size() + e_u.size() + h_i.size() + e_i.size()) {
    throw InvalidArgument("fuse: vector lengths do not match the fused layout");
  }
  auto it = std::copy(h_u.begin(), h_u.end(), out.begin());
  it = std::copy(e_u.begin(), e_u.end(), it);
  it = std::copy(h_i.begin(), h_i.end(), it);
  std::copy(e_i.begin(), e_i.end(), it);
}

std::vector<double> fuse(std::span<const double> h_u, std::optional<std::span<const double>> e_u,
                         std::span<const double> h_i, std::optional<std::span<const double>> e_i, std::size_t d_s) {
  const std::vector<double> zeros(d_s, 0.0);
  const auto eu = e_u.value_or(std::span<const double>(zeros));
  const auto ei = e_i.value_or(std::span<const double>(zeros));
  if (eu.size() != d_s || ei.size() != d_s) throw InvalidArgument("fuse: semantic vector length must equal d_s");
  std::vector<double> z(2 * (h_u.size() + d_s));
  fuse_into(h_u, eu, h_i, ei, z);
  return z;
}

double score_logit(std::span<const double> z, const PredictionHead& head) {
  check_head(head);
  if (z.size() != head.input_width()) throw InvalidArgument("score_logit: input width mismatch");
  const std::size_t dh = head.hidden_width();
  std::vector<double> pre(dh, 0.0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double s = z[k];
    const auto w = head.hidden.row(k);
    for (std::size_t j = 0; j < dh; ++j) pre[j] += s * w[j];
  }
  double logit = 0.0;
  for (std::size_t j = 0; j < dh; ++j) {
    const double a = pre[j] + head.hidden_bias(0, j);
    if (a > 0.0) logit += a * head.out(j, 0);
  }
  return logit + head.out_bias(0, 0);
}

double predict(std::span<const double> z, const PredictionHead& head) { return sigmoid(score_logit(z, head)); }

std::vector<double> head_forward(const Matrix& z, const PredictionHead& head, HeadActivations* keep) {
  check_head(head);
  Matrix pre = matmul(z, head.hidden);
  const std::size_t dh = head.hidden_width();
  Matrix hidden(pre.rows(), dh);
  std::vector<double> logits(z.rows());
  for (std::size_t r = 0; r < pre.rows(); ++r) {
    auto p = pre.row(r);
    auto h = hidden.row(r);
    double logit = 0.0;
    for (std::size_t j = 0; j < dh; ++j) {
      p[j] += head.hidden_bias(0, j);
      h[j] = p[j] > 0.0 ? p[j] : 0.0;
      if (p[j] > 0.0) logit += h[j] * head.out(j, 0);
    }
    logits[r] = logit + head.out_bias(0, 0);
  }
  if (keep != nullptr) {
    keep->pre = std::move(pre);
    keep->hidden = std::move(hidden);
  }
  return logits;
}

HeadBackward head_backward(const HeadActivations& acts, const PredictionHead& head, std::span<const double> d_logits) {
  const std::size_t batch = acts.hidden.rows();
  const std::size_t dh = head.hidden_width();
  if (d_logits.size() != batch) throw InvalidArgument("head_backward: gradient length mismatch");
  HeadBackward g{Matrix(dh, 1), Matrix(1, 1), Matrix(1, dh), Matrix(batch, dh)};
  for (std::size_t r = 0; r < batch; ++r) {
    const double d = d_logits[r];
    g.d_out_bias(0, 0) += d;
    const auto h = acts.hidden.row(r);
    const auto p = acts.pre.row(r);
    auto dp = g.d_pre.row(r);
    for (std::size_t j = 0; j < dh; ++j) {
      g.d_out(j, 0) += d * h[j];
      dp[j] = p[j] > 0.0 ? d * head.out(j, 0) : 0.0;
      g.d_hidden_bias(0, j) += dp[j];
    }
  }
  return g;
}

}  // namespace hybrec
