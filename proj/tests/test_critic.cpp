#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "stabrl/convergence.hpp"
#include "stabrl/critic.hpp"
#include "stabrl/envs.hpp"
#include "stabrl/errors.hpp"

using namespace stabrl;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

const ScalarField kOne = [](const Vector&) { return 1.0; };

ReplaySample sample_with(double t, const Vector& w, double rho = 0.0) {
  ReplaySample s;
  s.t = t;
  s.x = Vector::Zero(1);
  s.u = Vector::Zero(1);
  s.w = w;
  s.rho = rho;
  return s;
}

}  // namespace

TEST(DataVector, CounterexampleSquares) {
  const EnvModel env = make_counterexample(kOne);
  const FeatureMap phi = FeatureMap::from_terms(2, {{2, 0}, {0, 2}});
  EXPECT_EQ(data_vector(phi, env, vec({1, 1}), vec({0})), vec({2, -2}));
  EXPECT_EQ(data_vector(phi, env, vec({1, 1}), vec({-1})), vec({2, -4}));
}

TEST(DataVector, LqTraceAndDiscount) {
  const LqParams params;
  const EnvModel env = make_lq_stochastic(params);
  const FeatureMap phi = FeatureMap::from_terms(1, {{2}, {0}});
  const Vector w = data_vector(phi, env, vec({0}), vec({0}));
  EXPECT_NEAR(w[0], params.noise * params.noise, 1e-15);
  EXPECT_NEAR(w[1], -params.discount, 1e-15);
}

// sigma = 0 and gamma = 0 leave exactly grad phi F.
TEST(DataVectorProperty, StochasticReducesToDeterministic) {
  EnvModel lq = make_lq_stochastic({-1, 1, 1, 1, 0.0, 0.0});
  lq.diffusion = [](const Vector&, const Vector&) { return Matrix(Matrix::Zero(1, 1)); };
  lq.noise_dim = 1;
  ASSERT_FALSE(lq.deterministic());
  EnvModel det = lq;
  det.diffusion = nullptr;
  det.noise_dim = 0;
  const FeatureMap phi = FeatureMap::monomials(1, 4, true);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> box(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    const Vector x = vec({box(rng)}), u = vec({box(rng)});
    const Matrix jac = *phi.eval(x, 1).jacobian;
    const Vector direct = jac * det.drift(x, u);
    ASSERT_EQ(data_vector(phi, lq, x, u), direct);
    ASSERT_EQ(data_vector(phi, det, x, u), direct);
  }
}

TEST(TdError, Basics) {
  EXPECT_EQ(td_error(Vector::Zero(2), vec({3, 4}), 1.5), 1.5);
  const EnvModel env = make_counterexample(kOne);
  const FeatureMap phi = FeatureMap::from_terms(2, {{2, 0}, {0, 2}});
  const Vector theta = ideal_weights(phi, env);
  EXPECT_EQ(theta, vec({1, 1}));
  const Vector x = vec({1, 1});
  const ReplaySample opt = make_sample(phi, env, 0.0, x, vec({-1}));
  EXPECT_NEAR(td_error(theta, opt.w, opt.rho), 0.0, 1e-15);
  const ReplaySample zero = make_sample(phi, env, 0.0, x, vec({0}));
  EXPECT_NEAR(td_error(theta, zero.w, zero.rho), 1.0, 1e-15);
}

TEST(TdError, OptimalSanityBothBenchmarks) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> box(-5, 5);
  const EnvModel ce = make_counterexample(kOne);
  const FeatureMap ce_phi = FeatureMap::from_terms(2, {{2, 0}, {1, 1}, {0, 2}});
  const EnvModel lq = make_lq_stochastic({});
  const FeatureMap lq_phi = FeatureMap::from_terms(1, {{2}, {0}});
  ASSERT_TRUE(exactly_representable(ce_phi, ce));
  ASSERT_TRUE(exactly_representable(lq_phi, lq));
  const Vector ce_theta = ideal_weights(ce_phi, ce), lq_theta = ideal_weights(lq_phi, lq);
  for (int i = 0; i < 10000; ++i) {
    const Vector x = vec({box(rng), box(rng)});
    const ReplaySample s = make_sample(ce_phi, ce, 0, x, ce.known->optimal_policy(x));
    ASSERT_LE(std::abs(td_error(ce_theta, s.w, s.rho)), 1e-10);
    const Vector y = vec({box(rng)});
    const ReplaySample r = make_sample(lq_phi, lq, 0, y, lq.known->optimal_policy(y));
    ASSERT_LE(std::abs(td_error(lq_theta, r.w, r.rho)), 1e-10);
  }
}

TEST(RegressorProperty, NormalizedBound) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> log_scale(-8, 8);
  auto ratio = [](const Vector& w) { return w.norm() / regressor_normalizer(w); };
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    Vector w(1 + i % 6);
    for (int j = 0; j < w.size(); ++j) w[j] = normal(rng);
    w *= std::pow(10.0, log_scale(rng)) / std::max(w.norm(), 1e-300);
    worst = std::max(worst, ratio(w));
  }
  EXPECT_LE(worst, 0.5);
  EXPECT_EQ(ratio(Vector::Zero(3)), 0.0);
  EXPECT_LE(ratio(vec({1e6, 0})), 0.5);
  const double peak = ratio(vec({1.0 / std::sqrt(3.0)}));
  EXPECT_LE(peak, 0.5);
  EXPECT_NEAR(peak, 3.0 * std::sqrt(3.0) / 16.0, 1e-15);  // the maximum over all w
}

TEST(PeMatrix, SingleAndCanonicalSamples) {
  ReplayBuffer b(2);
  b.observe(sample_with(0, vec({1, 0})));
  PeMatrix e = pe_matrix(b);
  EXPECT_NEAR(e.gram(0, 0), 0.25, 1e-15);
  EXPECT_EQ(e.gram(1, 1), 0.0);
  EXPECT_NEAR(e.lambda_min, 0.0, 1e-15);
  b.observe(sample_with(1, vec({0, 1})));
  e = pe_matrix(b);
  EXPECT_TRUE(e.gram.isApprox(0.25 * Matrix::Identity(2, 2)));
  EXPECT_NEAR(e.lambda_min, 0.25, 1e-15);
  EXPECT_THROW(pe_matrix(ReplayBuffer(3)), StateError);
}

TEST(PeMatrixProperty, SymmetricPsd) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    ReplayBuffer b(1 + trial % 7);
    for (int k = 0; k < 10; ++k) {
      Vector w(3);
      for (int j = 0; j < 3; ++j) w[j] = normal(rng) * (trial % 3 == 0 ? 100.0 : 1.0);
      b.observe(sample_with(k, w));
      const PeMatrix e = pe_matrix(b);
      ASSERT_EQ((e.gram - e.gram.transpose()).norm(), 0.0);
      ASSERT_GE(e.lambda_min, 0.0);
    }
  }
}

TEST(ReplayBuffer, AnchorIsLatestAndRefreshRule) {
  ReplayBuffer b(2);
  EXPECT_THROW(ReplayBuffer(0), InputError);
  EXPECT_FALSE(b.observe(sample_with(0, vec({1, 0}))));
  EXPECT_FALSE(b.observe(sample_with(1, vec({0, 1}))));
  ASSERT_TRUE(b.full());
  // keeping (0,1) in history and anchoring (1,0) keeps lambda_min at 0.25: evict
  EXPECT_TRUE(b.observe(sample_with(2, vec({1, 0}))));
  EXPECT_EQ(b.samples().front().t, 1.0);
  EXPECT_EQ(b.latest().t, 2.0);
  // archiving (1,0) next to a collinear (1,0) would collapse lambda_min: overwrite anchor
  EXPECT_FALSE(b.observe(sample_with(3, vec({1, 0}))));
  EXPECT_EQ(b.samples().front().t, 1.0);
  EXPECT_EQ(b.latest().t, 3.0);
  EXPECT_EQ(b.size(), 2u);
  EXPECT_THROW(b.observe(sample_with(3, vec({1, 0}))), InputError);
  EXPECT_THROW(b.observe(sample_with(4, vec({1, 0, 0}))), InputError);
}

TEST(PushUntilPe, CanonicalStreamSucceeds) {
  ReplayBuffer b(2);
  int k = 0;
  const SampleSource source = [&] {
    const Vector w = (k % 2 == 0) ? vec({1, 0}) : vec({0, 1});
    return sample_with(k++, w);
  };
  EXPECT_NEAR(push_until_pe(b, source, 0.2, 10), 0.25, 1e-15);
  EXPECT_EQ(k, 2);
}

TEST(PushUntilPe, RankOneStreamFails) {
  ReplayBuffer b(4);
  int k = 0;
  const SampleSource source = [&] { return sample_with(k++, vec({1, 1})); };
  try {
    push_until_pe(b, source, 0.1, 50);
    FAIL() << "expected ExcitationError";
  } catch (const ExcitationError& e) {
    EXPECT_NEAR(e.lambda_min(), 0.0, 1e-12);
  }
  EXPECT_THROW(push_until_pe(b, source, 0.0, 50), InputError);
}

TEST(CriticStep, FixedPointAtIdealWeights) {
  const EnvModel env = make_counterexample(kOne);
  const FeatureMap phi = FeatureMap::from_terms(2, {{2, 0}, {1, 1}, {0, 2}});
  ReplayBuffer b(5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> box(-2, 2);
  for (int k = 0; k < 5; ++k) {
    const Vector x = vec({box(rng), box(rng)});
    b.observe(make_sample(phi, env, k, x, env.known->optimal_policy(x)));
  }
  const Vector star = ideal_weights(phi, env);
  const CriticState c{star, 2.0, star};
  const CriticState next = critic_step(c, b, 1e-2);
  EXPECT_LE((next.theta - star).norm(), 1e-14);
  EXPECT_LE(perturbation_term(b, phi, env).norm(), 1e-12);
  EXPECT_LE(perturbation_abs_sum(b, phi, env), 1e-12);
}

TEST(CriticStep, ScalarRate) {
  // theta~ = 1, w = 1, Z = 0, alpha = 1: theta' = -1/4
  ReplayBuffer b(1);
  b.observe(sample_with(0, vec({1}), -2.0));  // rho = -theta* w with theta* = 2
  const CriticState c{vec({3}), 1.0, vec({2})};
  const double dt = 1e-3;
  const CriticState next = critic_step(c, b, dt);
  EXPECT_NEAR((next.theta[0] - 3.0) / dt, -0.25, 1e-12);
}

TEST(CriticStep, Guards) {
  ReplayBuffer b(4);
  for (int k = 0; k < 4; ++k) b.observe(sample_with(k, vec({1}), 0.0));
  const CriticState c{vec({1}), 10.0, vec({0})};
  EXPECT_NO_THROW(critic_step(c, b, 1.0 / 40.0));
  EXPECT_THROW(critic_step(c, b, 1.0 / 39.0), InputError);
  EXPECT_THROW(critic_step(c, ReplayBuffer(2), 1e-3), StateError);
  const CriticState bad{vec({std::numeric_limits<double>::infinity()}), 1.0, vec({0})};
  EXPECT_THROW(critic_step(bad, b, 1e-3), DivergenceError);
}

// Z = 0 and a fixed buffer with lambda_min = eps: |theta~|^2 decays at >= 2 alpha eps.
TEST(CriticStep, FrozenBufferDecayRate) {
  ReplayBuffer b(3);
  b.observe(sample_with(0, vec({1, 0}), 0.0));
  b.observe(sample_with(1, vec({0, 0.5}), 0.0));
  b.observe(sample_with(2, vec({0.7, 0.7}), 0.0));
  const double eps = pe_matrix(b).lambda_min;
  const double alpha = 2.0, dt = 1e-3 / (alpha * 3);
  CriticState c{vec({1, -1}), alpha, Vector(Vector::Zero(2))};
  std::vector<double> t, v;
  for (int k = 0; k < 20000; ++k) {
    if (k % 100 == 0) {
      t.push_back(k * dt);
      v.push_back(c.weight_error_sq());
    }
    c = critic_step(c, b, dt);
  }
  const double rate = fit_decay_rate(t, v);
  EXPECT_GE(rate, 0.8 * 2 * alpha * eps);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_LT(v[i], v[i - 1]);
}

TEST(Perturbation, LqZeroPolicy) {
  const EnvModel env = make_lq_stochastic({});
  const FeatureMap phi = FeatureMap::from_terms(1, {{2}, {0}});
  for (double x : {-2.0, -0.3, 0.0, 1.0, 4.0}) {
    EXPECT_NEAR(hamiltonian_perturbation(phi, env, vec({x}), vec({0})), 0.16 * x * x, 1e-12);
  }
}

TEST(PerturbationProperty, SummandBounded) {
  const EnvModel env = make_lq_stochastic({});
  const FeatureMap phi = FeatureMap::from_terms(1, {{2}, {0}});
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> box(-4, 4);
  for (int trial = 0; trial < 200; ++trial) {
    ReplayBuffer b(6);
    for (int k = 0; k < 6; ++k) b.observe(make_sample(phi, env, k, vec({box(rng)}), vec({box(rng)})));
    for (const auto& s : b.samples()) {
      const double z = hamiltonian_perturbation(phi, env, s.x, s.u);
      const double summand = (s.w * z / regressor_normalizer(s.w)).norm();
      ASSERT_LE(summand, 0.5 * std::abs(z) + 1e-15);
    }
  }
}

TEST(Critic, Errors) {
  const EnvModel env = make_lq_stochastic({});
  const FeatureMap phi = FeatureMap::from_terms(2, {{2, 0}});
  EXPECT_THROW(data_vector(phi, env, vec({1}), vec({0})), InputError);
  EXPECT_THROW(td_error(vec({1, 2}), vec({1}), 0.0), InputError);
  EnvModel unknown = env;
  unknown.known.reset();
  EXPECT_THROW(ideal_weights(FeatureMap::from_terms(1, {{2}}), unknown), UnsupportedError);
}
