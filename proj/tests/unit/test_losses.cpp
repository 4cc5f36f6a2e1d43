#include <gtest/gtest.h>

#include <cmath>

#include "hybrec/errors.hpp"
#include "hybrec/linalg.hpp"
#include "hybrec/losses.hpp"
#include "hybrec/rng.hpp"

using namespace hybrec;

namespace {

using V = std::vector<double>;

double kl_bernoulli(double p, double q) { return p * std::log(p / q) + (1 - p) * std::log((1 - p) / (1 - q)); }

V sigmoids(const V& logits) {
  V p;
  for (double x : logits) p.push_back(sigmoid(x));
  return p;
}

// Central differences of f over each coordinate of x.
template <class F>
V numeric_grad(F f, V x, double eps = 1e-6) {
  V g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double hi = f(x);
    x[i] = keep - eps;
    const double lo = f(x);
    x[i] = keep;
    g[i] = (hi - lo) / (2 * eps);
  }
  return g;
}

}  // namespace

TEST(Bce, HalfProbability) { EXPECT_NEAR(bce_loss(V{0.5}, V{1}), std::log(2.0), 1e-15); }

TEST(Bce, ClampFloor) {
  const double l = bce_loss(V{1.0}, V{1});
  EXPECT_GT(l, 0.0);
  EXPECT_NEAR(l, -std::log(1 - kProbClamp), 1e-15);
  EXPECT_TRUE(std::isfinite(bce_loss(V{0.0}, V{1})));
}

TEST(Bce, TwoSampleBatch) {
  const double expect = (-std::log(0.9) - std::log(0.8)) / 2;
  EXPECT_NEAR(bce_loss(V{0.9, 0.2}, V{1, 0}), expect, 1e-15);
  EXPECT_NEAR(expect, 0.16425, 5e-6);
}

TEST(Bce, RejectsBadInput) {
  EXPECT_THROW(bce_loss(V{}, V{}), InvalidArgument);
  EXPECT_THROW(bce_loss(V{0.5}, V{1, 0}), InvalidArgument);
}

TEST(Distill, LambdaOneIsBce) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    V s(5), t(5), y(5);
    for (std::size_t i = 0; i < 5; ++i) {
      s[i] = rng.uniform(-6, 6);
      t[i] = rng.uniform(-6, 6);
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    EXPECT_EQ(distill_loss(s, t, y, 2.0, 1.0), bce_loss(sigmoids(s), y));
  }
}

TEST(Distill, EqualLogitsHaveNoSoftTerm) {
  const V s{-1.0, 0.3, 4.0};
  EXPECT_NEAR(distill_soft_term(s, s, 2.0), 0.0, 1e-15);
}

TEST(Distill, HandKl) {
  const double p = sigmoid(2.0);
  EXPECT_NEAR(p, 0.88080, 5e-6);
  const double expect = kl_bernoulli(p, 0.5);
  EXPECT_NEAR(expect, 0.32781, 5e-6);
  EXPECT_NEAR(distill_loss(V{0.0}, V{2.0}, V{1.0}, 1.0, 0.0), expect, 1e-12);
}

TEST(Distill, TemperatureScaling) {
  // T^2 * KL(Bern(sigmoid(t/T)) || Bern(sigmoid(s/T)))
  const double T = 3.0;
  const double expect = T * T * kl_bernoulli(sigmoid(1.5 / T), sigmoid(-0.5 / T));
  EXPECT_NEAR(distill_soft_term(V{-0.5}, V{1.5}, T), expect, 1e-12);
}

TEST(Distill, RejectsBadInput) {
  const V a{0.1}, y{1};
  EXPECT_THROW(distill_loss(a, a, y, 0.0, 0.5), InvalidArgument);
  EXPECT_THROW(distill_loss(a, a, y, -1.0, 0.5), InvalidArgument);
  EXPECT_THROW(distill_loss(a, a, y, 1.0, 1.5), InvalidArgument);
  EXPECT_THROW(distill_loss(a, V{0.1, 0.2}, y, 1.0, 0.5), InvalidArgument);
}

TEST(LossGradients, BceMatchesFiniteDifferences) {
  const V logits{-2.0, 0.1, 3.0, -0.7};
  const V y{0, 1, 1, 0};
  const auto lg = bce_with_grad(logits, y);
  EXPECT_NEAR(lg.loss, bce_loss(sigmoids(logits), y), 1e-15);
  const V num = numeric_grad([&](const V& x) { return bce_loss(sigmoids(x), y); }, logits);
  for (std::size_t i = 0; i < logits.size(); ++i) EXPECT_NEAR(lg.d_logits[i], num[i], 1e-8);
}

TEST(LossGradients, ClampedRegionHasZeroGradient) {
  const auto lg = bce_with_grad(V{40.0, -40.0}, V{1, 0});
  EXPECT_EQ(lg.d_logits[0], 0.0);
  EXPECT_EQ(lg.d_logits[1], 0.0);
}

TEST(LossGradients, DistillMatchesFiniteDifferences) {
  const V s{-1.0, 0.4, 2.5}, t{0.5, -1.5, 3.0}, y{1, 0, 1};
  for (double lambda : {0.0, 0.3, 1.0}) {
    const auto lg = distill_with_grad(s, t, y, 2.0, lambda);
    EXPECT_NEAR(lg.loss, distill_loss(s, t, y, 2.0, lambda), 1e-14);
    const V num = numeric_grad([&](const V& x) { return distill_loss(x, t, y, 2.0, lambda); }, s);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(lg.d_logits[i], num[i], 1e-8);
  }
}
