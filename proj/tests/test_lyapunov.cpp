#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "stabrl/actor.hpp"
#include "stabrl/envs.hpp"
#include "stabrl/errors.hpp"
#include "stabrl/lyapunov.hpp"

using namespace stabrl;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

const ScalarField kOne = [](const Vector&) { return 1.0; };

Vector grad_v(const Vector& x) { return 2.0 * x; }

}  // namespace

TEST(LyapDerivative, UnderOptimalPolicy) {
  const EnvModel env = make_counterexample(kOne);
  EXPECT_DOUBLE_EQ(lyap_derivative(grad_v, env, vec({1, 1}), vec({-1})), -2.0);
  EXPECT_EQ(lyap_derivative(grad_v, env, vec({0, 0}), vec({0})), 0.0);
  const Policy eff = make_effective_policy(env.known->optimal_policy, {3.0, 1.0});
  const Vector x = vec({0, -1});
  EXPECT_DOUBLE_EQ(lyap_derivative(grad_v, env, x, eff(x)), 1.0);
  EXPECT_THROW(lyap_derivative(grad_v, make_lq_stochastic({}), vec({1}), vec({0})),
               WrongIntegratorError);
}

TEST(LyapDerivativeProperty, OptimalPolicyDissipates) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> box(-5, 5);
  const ScalarField g = [](const Vector& x) { return std::cos(x[0]) + 0.2 * x[1]; };
  const EnvModel env = make_counterexample(g);
  for (int i = 0; i < 10000; ++i) {
    const Vector x = vec({box(rng), box(rng)});
    const Vector u = env.known->optimal_policy(x);
    const double d = lyap_derivative(grad_v, env, x, u);
    ASSERT_NEAR(d, -env.cost(x, u), 1e-10 * std::max(1.0, std::abs(d)));
    ASSERT_LE(d, 1e-10);
  }
}

TEST(CounterexampleDecomposition, WitnessPoint) {
  const LyapDecomposition d = counterexample_decomposition(vec({0, -1}), kOne, {3.0, 1.0});
  EXPECT_DOUBLE_EQ(d.term("minus_x2_sq"), -1.0);
  EXPECT_DOUBLE_EQ(d.term("minus_g_sq_x2_sq"), -1.0);
  EXPECT_DOUBLE_EQ(d.term("robustifier"), 3.0);
  EXPECT_DOUBLE_EQ(d.total, 1.0);
  EXPECT_THROW(d.term("missing"), InputError);
  const LyapDecomposition zero = counterexample_decomposition(vec({2.5, 0}), kOne, {3.0, 1.0});
  for (const auto& t : zero.terms) EXPECT_EQ(t.value, 0.0) << t.name;
}

TEST(CounterexampleDecomposition, RobustifierHelpsForPositiveX2) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> unit(0.01, 4);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = vec({unit(rng) - 2, unit(rng)});
    ASSERT_LT(counterexample_decomposition(x, kOne, {2.0, 0.5}).term("robustifier"), 0.0);
  }
}

TEST(DecompositionProperty, ClosureRandomInstances) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> box(-4, 4), gains(0.1, 10), phase(-2, 2);
  for (int i = 0; i < 10000; ++i) {
    const double a = phase(rng), b = phase(rng);
    const ScalarField g = [a, b](const Vector& x) { return 1.0 + 0.5 * std::sin(a * x[0] + b * x[1]); };
    const EnvModel env = make_counterexample(g);
    const RobustifierParams p{gains(rng), gains(rng)};
    const Vector x = vec({box(rng), box(rng)});
    const Policy eff = make_effective_policy(env.known->optimal_policy, p);
    const double direct = lyap_derivative(grad_v, env, x, eff(x));
    const double tol = 1e-10 * std::max(1.0, std::abs(direct));
    ASSERT_NEAR(counterexample_decomposition(x, g, p).total, direct, tol);
    const LyapDecomposition general = decompose_value_derivative(env, env.known->optimal_policy, p, x);
    ASSERT_NEAR(general.sum(), direct, tol);
    ASSERT_NEAR(general.total, direct, tol);
    ASSERT_NEAR(general.term("actor_error_term"), 0.0, tol);
  }
}

TEST(Decomposition, ActorErrorTerms) {
  const EnvModel env = make_counterexample(kOne);
  const Policy k = env.known->optimal_policy;
  const Policy actor = [&](const Vector& x) { return Vector(k(x) + vec({0.3})); };
  const Policy ideal = [&](const Vector& x) { return Vector(k(x) + vec({0.1})); };
  const Vector x = vec({0.5, -2});
  const LyapDecomposition d = decompose_value_derivative(env, actor, {3.0, 1.0}, x, ideal);
  // grad V^T g = 2 x2 = -4
  EXPECT_NEAR(d.term("actor_error_term"), -4 * 0.2, 1e-14);
  EXPECT_NEAR(d.term("delta_u_term"), -4 * 0.1, 1e-14);
  EXPECT_NEAR(d.sum(), d.total, 1e-12);
}

TEST(PositiveRegion, Roots) {
  const PositiveRegion r = positive_region(3.0, 1.0);
  ASSERT_TRUE(r.exact);
  EXPECT_NEAR(r.exact->first, (-3 - std::sqrt(5.0)) / 2, 1e-15);
  EXPECT_NEAR(r.exact->second, (-3 + std::sqrt(5.0)) / 2, 1e-15);
  EXPECT_NEAR(r.exact->first, -2.618, 1e-3);
  EXPECT_NEAR(r.exact->second, -0.382, 1e-3);
  EXPECT_FALSE(positive_region(1.0, 1.0).exact);
  EXPECT_FALSE(positive_region(2.0, 1.0).exact);
  EXPECT_EQ(positive_region(2.0, 1.0).width(), 0.0);
  EXPECT_EQ(r.stated_upper, 0.0);
  EXPECT_TRUE(std::isnan(positive_region(1.0, 1.0).stated_lower));
}

TEST(PositiveRegion, TangencyIsZero) {
  const RobustifierParams p{2.0, 1.0};
  EXPECT_NEAR(counterexample_decomposition(vec({0, -1}), kOne, p).total, 0.0, 1e-15);
}

TEST(PositiveRegionProperty, GrowsWithGain) {
  double last = 0.0;
  for (double k = 2.01; k < 20; k += 0.01) {
    const double w = positive_region(k, 1.0).width();
    ASSERT_GT(w, last) << k;
    last = w;
  }
}

// Sign of the scanned derivative against -(x2^2 + K x2 + A) at every x2 != 0.
TEST(SliceScanProperty, MatchesQuadratic) {
  for (double k : {2.5, 3.0, 5.0, 10.0}) {
    const SliceScan s = scan_slice({k, 1.0}, -5.0, 5.0, 1e-3);
    ASSERT_GE(s.x2.size(), 10000u);
    const PositiveRegion r = positive_region(k, 1.0);
    for (std::size_t i = 0; i < s.x2.size(); ++i) {
      const double x2 = s.x2[i];
      if (std::abs(x2) < 1e-12) continue;
      const double q = x2 * x2 + k * x2 + 1.0;
      ASSERT_EQ(s.derivative[i] > 0.0, q < 0.0) << "K=" << k << " x2=" << x2;
      ASSERT_EQ(r.contains(x2), q < 0.0);
    }
    for (double b : s.boundaries) {
      const double nearest = std::min(std::abs(b - r.exact->first), std::abs(b - r.exact->second));
      EXPECT_LE(nearest, 2e-3);
    }
  }
  EXPECT_THROW(scan_slice({3, 1}, 1, -1, 1e-3), InputError);
}

TEST(ClaimAudit, Points) {
  const ClaimBounds bounds;
  const ClaimAudit bad = audit_claimed_bound(vec({0, -1}), kOne, {3.0, 1.0}, bounds);
  EXPECT_DOUBLE_EQ(bad.true_contribution, 3.0);
  EXPECT_LT(bad.claimed_contribution, 0.0);
  EXPECT_TRUE(bad.violated);
  const ClaimAudit origin = audit_claimed_bound(vec({0, 0}), kOne, {3.0, 1.0}, bounds);
  EXPECT_EQ(origin.true_contribution, 0.0);
  EXPECT_FALSE(origin.violated);
  const ClaimAudit good = audit_claimed_bound(vec({0, 1}), kOne, {3.0, 1.0}, bounds);
  EXPECT_DOUBLE_EQ(good.true_contribution, -3.0);
  EXPECT_FALSE(good.violated);
}

TEST(ClaimAudit, VanishingGain) {
  const ScalarField g = [](const Vector& x) { return x[0]; };
  const ClaimAudit a = audit_claimed_bound(vec({0, -2}), g, {3.0, 1.0}, {});
  EXPECT_EQ(a.true_contribution, 0.0);
  EXPECT_FALSE(a.violated);
}

TEST(ClaimAudit, GridSearchFindsViolations) {
  const auto hits = find_claim_violations(kOne, {3.0, 1.0}, {}, 3.0, 61);
  ASSERT_FALSE(hits.empty());
  for (const auto& h : hits) {
    EXPECT_TRUE(h.violated);
    EXPECT_LT(h.x[1], 0.0);
  }
}
