#include "stabrl/critic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "stabrl/errors.hpp"

namespace stabrl {
namespace {

const KnownValue& require_known(const EnvModel& env, const char* who) {
  if (!env.known) {
    throw UnsupportedError(std::string(who) + ": model '" + env.name +
                           "' has no closed-form value");
  }
  return *env.known;
}

Matrix normalized_outer(const Vector& w) { return (w * w.transpose()) / regressor_normalizer(w); }

}  // namespace

Vector data_vector(const FeatureMap& features, const EnvModel& env, const Vector& x,
                   const Vector& u) {
  if (features.state_dim() != env.state_dim) {
    throw InputError("data vector: feature map and model state dimensions differ");
  }
  if (u.size() != env.control_dim) throw InputError("data vector: control dimension mismatch");
  const bool stochastic = !env.deterministic();
  const FeatureEval fe = features.eval(x, stochastic ? 2 : 1);
  Vector w = (*fe.jacobian) * env.drift(x, u);
  if (stochastic) {
    const Matrix sigma = env.diffusion(x, u);
    for (int i = 0; i < features.size(); ++i) {
      w[i] += 0.5 * (sigma.transpose() * (*fe.hessians)[i] * sigma).trace();
    }
  }
  if (env.cost.discount != 0.0) w -= env.cost.discount * fe.value;
  return w;
}

double hamiltonian(const EnvModel& env, const Polynomial& h, const Vector& x,
                   const Vector& u) {
  double v = h.gradient(x).dot(env.drift(x, u)) + env.cost(x, u);
  if (!env.deterministic()) {
    const Matrix sigma = env.diffusion(x, u);
    v += 0.5 * (sigma.transpose() * h.hessian(x) * sigma).trace();
  }
  if (env.cost.discount != 0.0) v -= env.cost.discount * h.value(x);
  return v;
}

double td_error(const Vector& theta, const Vector& w, double rho) {
  if (theta.size() != w.size()) throw InputError("td error: theta and w lengths differ");
  return theta.dot(w) + rho;
}

Vector ideal_weights(const FeatureMap& features, const EnvModel& env) {
  return require_known(env, "ideal weights").value.project(features).first;
}

bool exactly_representable(const FeatureMap& features, const EnvModel& env) {
  return require_known(env, "representability").value.project(features).second.is_zero();
}

double hamiltonian_perturbation(const FeatureMap& features, const EnvModel& env,
                                const Vector& x, const Vector& u) {
  const KnownValue& known = require_known(env, "hamiltonian perturbation");
  const double h_value = hamiltonian(env, known.value, x, u);
  const Polynomial delta = known.value.project(features).second;
  if (delta.is_zero()) return h_value;
  // delta_H carries no stage cost
  const double delta_h = hamiltonian(env, delta, x, u) - env.cost(x, u);
  return h_value - delta_h;
}

ReplaySample make_sample(const FeatureMap& features, const EnvModel& env, double t,
                         const Vector& x, const Vector& u) {
  return ReplaySample{t, x, u, data_vector(features, env, x, u), env.cost(x, u)};
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InputError("replay buffer: capacity must be >= 1");
}

bool ReplayBuffer::observe(ReplaySample sample) {
  if (!samples_.empty()) {
    if (!(sample.t > samples_.back().t)) {
      throw InputError("replay buffer: timestamps must be strictly increasing");
    }
    if (sample.w.size() != samples_.back().w.size()) {
      throw InputError("replay buffer: data vector length changed");
    }
  }
  if (!full()) {
    samples_.push_back(std::move(sample));
    return false;
  }
  if (capacity_ == 1) {
    samples_.back() = std::move(sample);
    return true;
  }
  Matrix gram = Matrix::Zero(sample.w.size(), sample.w.size());
  for (const auto& s : samples_) gram += normalized_outer(s.w);
  const double current = min_eigenvalue(gram);
  const Matrix shifted =
      gram - normalized_outer(samples_.front().w) + normalized_outer(sample.w);
  if (min_eigenvalue(shifted) >= current) {
    samples_.pop_front();
    samples_.push_back(std::move(sample));
    return true;
  }
  samples_.back() = std::move(sample);
  return false;
}

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.rows() == 1) return symmetric(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()[0];
}

PeMatrix pe_matrix(const ReplayBuffer& buffer) {
  if (buffer.empty()) throw StateError("pe matrix: replay buffer is empty");
  const auto n = buffer.latest().w.size();
  PeMatrix pe;
  pe.gram = Matrix::Zero(n, n);
  for (const auto& s : buffer.samples()) pe.gram += normalized_outer(s.w);
  // E is PSD; a negative eigenvalue can only be round-off
  pe.lambda_min = std::max(0.0, min_eigenvalue(pe.gram));
  return pe;
}

double push_until_pe(ReplayBuffer& buffer, const SampleSource& source, double epsilon,
                     std::size_t max_draws) {
  if (!(epsilon > 0.0)) throw InputError("push_until_pe: epsilon must be positive");
  double lambda = buffer.empty() ? 0.0 : pe_matrix(buffer).lambda_min;
  for (std::size_t draw = 0; lambda < epsilon; ++draw) {
    if (draw == max_draws) {
      std::ostringstream os;
      os << "push_until_pe: lambda_min = " << lambda << " still below " << epsilon
         << " after " << max_draws << " draws";
      throw ExcitationError(os.str(), lambda);
    }
    buffer.observe(source());
    lambda = pe_matrix(buffer).lambda_min;
  }
  return lambda;
}

Vector CriticState::weight_error() const {
  if (!theta_star) throw UnsupportedError("critic: ideal weights are unknown");
  return theta - *theta_star;
}

CriticState critic_step(const CriticState& critic, const ReplayBuffer& buffer, double dt) {
  if (!(dt > 0.0)) throw InputError("critic step: dt must be positive");
  if (!(critic.learning_rate > 0.0)) throw InputError("critic step: alpha must be positive");
  if (buffer.empty()) throw StateError("critic step: replay buffer is empty");
  const double m = static_cast<double>(buffer.size());
  if (dt * critic.learning_rate * m > 1.0) {
    std::ostringstream os;
    os << "critic step: dt = " << dt << " violates dt <= 1/(alpha M) = "
       << 1.0 / (critic.learning_rate * m);
    throw InputError(os.str());
  }
  Vector grad = Vector::Zero(critic.theta.size());
  for (const auto& s : buffer.samples()) {
    grad += (td_error(critic.theta, s.w, s.rho) / regressor_normalizer(s.w)) * s.w;
  }
  CriticState next = critic;
  next.theta = critic.theta - (dt * critic.learning_rate) * grad;
  if (!next.theta.allFinite()) {
    std::ostringstream os;
    os << "critic step: weights became non-finite (last |theta| = " << critic.theta.norm()
       << ", buffer size " << buffer.size() << ")";
    throw DivergenceError(os.str());
  }
  return next;
}

Vector perturbation_term(const ReplayBuffer& buffer, const FeatureMap& features,
                         const EnvModel& env) {
  if (buffer.empty()) throw StateError("perturbation term: replay buffer is empty");
  Vector sum = Vector::Zero(features.size());
  for (const auto& s : buffer.samples()) {
    sum += (hamiltonian_perturbation(features, env, s.x, s.u) / regressor_normalizer(s.w)) * s.w;
  }
  return sum;
}

double perturbation_abs_sum(const ReplayBuffer& buffer, const FeatureMap& features,
                            const EnvModel& env) {
  double sum = 0.0;
  for (const auto& s : buffer.samples()) {
    sum += std::abs(hamiltonian_perturbation(features, env, s.x, s.u));
  }
  return sum;
}

}  // namespace stabrl
