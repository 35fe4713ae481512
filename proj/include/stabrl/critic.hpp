#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>

#include "stabrl/envs.hpp"
#include "stabrl/features.hpp"

namespace stabrl {

/// Regressor multiplying theta in the critic Hamiltonian:
///   w(x, u) = grad phi(x) f(x, u) + eta(x, u) / 2 - gamma phi(x),
///   eta_i   = tr(sigma^T hess phi_i sigma).
/// For a deterministic, undiscounted model only grad phi(x) F(x, u) is formed.
Vector data_vector(const FeatureMap& features, const EnvModel& env, const Vector& x,
                   const Vector& u);

// H(x, u | h) = grad h^T f + tr(sigma^T hess h sigma) / 2 + rho - gamma h.
double hamiltonian(const EnvModel& env, const Polynomial& h, const Vector& x,
                   const Vector& u);

// Hamiltonian temporal difference theta^T w + rho.
double td_error(const Vector& theta, const Vector& w, double rho);

// (w^T w + 1)^2
inline double regressor_normalizer(const Vector& w) {
  const double s = w.squaredNorm() + 1.0;
  return s * s;
}

// Ideal critic weights for the model's known value under `features`
// (coefficients of V on the features; V - theta*^T phi is the remainder delta).
Vector ideal_weights(const FeatureMap& features, const EnvModel& env);

// True when V lies in the span of `features` (delta == 0).
bool exactly_representable(const FeatureMap& features, const EnvModel& env);

// Z(x, u) = H(x, u | V) - delta_H(x, u), from the closed-form value.
double hamiltonian_perturbation(const FeatureMap& features, const EnvModel& env,
                                const Vector& x, const Vector& u);

struct ReplaySample {
  double t = 0.0;
  Vector x;
  Vector u;
  Vector w;
  double rho = 0.0;
};

ReplaySample make_sample(const FeatureMap& features, const EnvModel& env, double t,
                         const Vector& x, const Vector& u);

/// Fixed-capacity experience replay whose last entry is always the most
/// recent observation.
///
/// While filling, observations are appended. Once full, a new observation
/// either pushes the previous anchor into history (dropping the oldest
/// entry) when that does not lower lambda_min of the normalized Gram matrix,
/// or else overwrites the anchor slot in place.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  // Returns true when the oldest entry was evicted.
  bool observe(ReplaySample sample);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  bool full() const { return samples_.size() == capacity_; }
  const std::deque<ReplaySample>& samples() const { return samples_; }
  const ReplaySample& latest() const { return samples_.back(); }

 private:
  std::size_t capacity_;
  std::deque<ReplaySample> samples_;
};

struct PeMatrix {
  Matrix gram;  // sum w w^T / (w^T w + 1)^2
  double lambda_min = 0.0;
};

PeMatrix pe_matrix(const ReplayBuffer& buffer);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& symmetric);

using SampleSource = std::function<ReplaySample()>;

/// Feeds `source` into `buffer` until lambda_min(E) >= epsilon. Returns the
/// reached lambda_min, or throws ExcitationError after `max_draws` draws.
double push_until_pe(ReplayBuffer& buffer, const SampleSource& source, double epsilon,
                     std::size_t max_draws);

struct CriticState {
  Vector theta;
  double learning_rate = 1.0;
  std::optional<Vector> theta_star;

  Vector weight_error() const;
  double weight_error_sq() const { return weight_error().squaredNorm(); }
};

/// One explicit-Euler step of
///   theta' = -alpha sum_k e_H(theta | x_k, u_k) w_k / (w_k^T w_k + 1)^2.
/// Requires dt <= 1 / (alpha M).
CriticState critic_step(const CriticState& critic, const ReplayBuffer& buffer, double dt);

// sum_k w_k Z_k / (w_k^T w_k + 1)^2 over the buffer, Z from the known value.
Vector perturbation_term(const ReplayBuffer& buffer, const FeatureMap& features,
                         const EnvModel& env);

// sum_k |Z_k| over the buffer.
double perturbation_abs_sum(const ReplayBuffer& buffer, const FeatureMap& features,
                            const EnvModel& env);

}  // namespace stabrl
