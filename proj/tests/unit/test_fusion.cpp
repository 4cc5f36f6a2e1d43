#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "hybrec/errors.hpp"
#include "hybrec/fusion.hpp"
#include "test_support.hpp"

using namespace hybrec;
using hybrec::testing::random_matrix;

namespace {
using V = std::vector<double>;
}

TEST(Fuse, ConcatenatesInOrder) {
  const V hu{1, 2}, eu{3, 4}, hi{5, 6}, ei{7, 8};
  EXPECT_EQ(fuse(hu, std::span<const double>(eu), hi, std::span<const double>(ei), 2), (V{1, 2, 3, 4, 5, 6, 7, 8}));
  const V z2{0, 0};
  EXPECT_EQ(fuse(z2, std::span<const double>(z2), z2, std::span<const double>(z2), 2), V(8, 0.0));
}

TEST(Fuse, AbsentSemanticIsZero) {
  const V hu{1, 2}, hi{5, 6}, ei{7, 8};
  EXPECT_EQ(fuse(hu, std::nullopt, hi, std::span<const double>(ei), 2), (V{1, 2, 0, 0, 5, 6, 7, 8}));
}

TEST(Fuse, LengthMismatchRejected) {
  const V a{1, 2}, b{1, 2, 3};
  EXPECT_THROW(fuse(a, std::span<const double>(b), a, std::nullopt, 2), InvalidArgument);
  EXPECT_THROW(fuse(a, std::nullopt, b, std::nullopt, 2), InvalidArgument);
}

TEST(Fuse, SlicesRecoverInputs) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dg = 1 + rng.below(5), ds = 1 + rng.below(5);
    V hu(dg), eu(ds), hi(dg), ei(ds);
    for (auto* v : {&hu, &eu, &hi, &ei})
      for (double& x : *v) x = rng.uniform(-2, 2);
    const V z = fuse(hu, std::span<const double>(eu), hi, std::span<const double>(ei), ds);
    ASSERT_EQ(z.size(), 2 * (dg + ds));
    EXPECT_TRUE(std::equal(hu.begin(), hu.end(), z.begin()));
    EXPECT_TRUE(std::equal(eu.begin(), eu.end(), z.begin() + dg));
    EXPECT_TRUE(std::equal(hi.begin(), hi.end(), z.begin() + dg + ds));
    EXPECT_TRUE(std::equal(ei.begin(), ei.end(), z.begin() + 2 * dg + ds));
  }
}

TEST(Head, ZeroHeadScoresHalf) {
  const auto head = PredictionHead::zeros(8, 4);
  const V z{1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(score_logit(z, head), 0.0);
  EXPECT_EQ(predict(z, head), 0.5);
}

TEST(Head, HandFixture) {
  // Second hidden unit negated so ReLU passes both pre-activations through:
  // logit = 2*1 + 1*(-1) + 0.5.
  PredictionHead head;
  head.hidden = Matrix::from_rows({{1, 0}, {0, -1}});
  head.hidden_bias = Matrix(1, 2);
  head.out = Matrix::from_rows({{2}, {-1}});
  head.out_bias = Matrix::from_rows({{0.5}});
  const V z{1, -1};
  EXPECT_DOUBLE_EQ(score_logit(z, head), 1.5);
  EXPECT_NEAR(predict(z, head), 0.81757, 5e-6);
}

TEST(Head, ShapeMismatchRejected) {
  Rng rng(2);
  const auto head = PredictionHead::init(6, 3, rng);
  EXPECT_THROW(score_logit(V(5, 1.0), head), InvalidArgument);
}

TEST(Head, ScoreInOpenUnitInterval) {
  Rng rng(3);
  const auto head = PredictionHead::init(8, 16, rng);
  for (int trial = 0; trial < 200; ++trial) {
    V z(8);
    for (double& x : z) x = rng.uniform(-5, 5);
    const double p = predict(z, head);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Head, LogitAndProbabilityRankIdentically) {
  Rng rng(4);
  const auto head = PredictionHead::init(6, 8, rng);
  std::vector<V> cands(40, V(6));
  for (auto& z : cands)
    for (double& x : z) x = rng.uniform(-1, 1);
  std::vector<std::size_t> by_logit(cands.size()), by_prob(cands.size());
  std::iota(by_logit.begin(), by_logit.end(), 0u);
  std::iota(by_prob.begin(), by_prob.end(), 0u);
  std::stable_sort(by_logit.begin(), by_logit.end(),
                   [&](auto a, auto b) { return score_logit(cands[a], head) > score_logit(cands[b], head); });
  std::stable_sort(by_prob.begin(), by_prob.end(),
                   [&](auto a, auto b) { return predict(cands[a], head) > predict(cands[b], head); });
  EXPECT_EQ(by_logit, by_prob);
}

TEST(Head, BatchedForwardMatchesScalar) {
  Rng rng(5);
  const auto head = PredictionHead::init(6, 5, rng);
  const Matrix z = random_matrix(7, 6, rng);
  const auto logits = head_forward(z, head);
  for (std::size_t r = 0; r < 7; ++r) EXPECT_EQ(logits[r], score_logit(z.row(r), head));
}

TEST(Head, BackwardPassesGradCheck) {
  Rng rng(6);
  auto head = PredictionHead::init(6, 5, rng);
  head.hidden_bias = random_matrix(1, 5, rng, -0.2, 0.2);
  Matrix z = random_matrix(4, 6, rng);
  const V wts{0.3, -1.2, 0.7, 2.0};
  // loss = sum_r w_r * logit_r, a linear probe of every output
  auto loss = [&] {
    const auto l = head_forward(z, head);
    double s = 0.0;
    for (std::size_t r = 0; r < l.size(); ++r) s += wts[r] * l[r];
    return s;
  };
  HeadActivations acts;
  head_forward(z, head, &acts);
  const auto back = head_backward(acts, head, wts);
  const Matrix d_hidden = matmul_at_b(z, back.d_pre);
  const Matrix d_z = matmul_a_bt(back.d_pre, head.hidden);
  const GradProbe probes[] = {{"head.hidden", &head.hidden, &d_hidden},
                              {"head.hidden_bias", &head.hidden_bias, &back.d_hidden_bias},
                              {"head.out", &head.out, &back.d_out},
                              {"head.out_bias", &head.out_bias, &back.d_out_bias},
                              {"z", &z, &d_z}};
  EXPECT_LT(grad_check(loss, probes, 1e-5).max_relative_error, 1e-4);
}
