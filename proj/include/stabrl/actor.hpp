#pragma once

#include <vector>

#include "stabrl/envs.hpp"
#include "stabrl/features.hpp"

namespace stabrl {

// Gains of the robustifying control -K |x|^2 / (A + |x|^2).
struct RobustifierParams {
  double gain = 1.0;    // K
  double offset = 1.0;  // A

  void validate() const;
};

// -K |x|^2 / (A + |x|^2) on every one of the m control channels.
Vector robustifying_term(const Vector& x, const RobustifierParams& params, int control_dim);

/// Minimizer of the critic Hamiltonian for control-affine models with
/// rho = q(x) + u^T R u:  u = -R^{-1} g(x)^T grad phi(x)^T theta / 2.
Vector greedy_policy_from_critic(const Vector& theta, const FeatureMap& features,
                                 const EnvModel& env, const Vector& x);

Policy make_greedy_policy(Vector theta, FeatureMap features, const EnvModel& env);

// base(x) + robustifying_term(x)
Vector effective_policy(const Policy& base, const RobustifierParams& params, const Vector& x);

Policy make_effective_policy(Policy base, RobustifierParams params);

// mean over the batch of |candidate(x) - kappa_star(x)|^2 / 2
double actor_loss(const Policy& candidate, const Policy& kappa_star,
                  const std::vector<Vector>& batch);

// ---- adaptive-control baseline --------------------------------------------

/// Certainty-equivalence controller for scalar x' = f(x) + g(x) u with
/// f_hat = theta_f^T phi_f, g_hat = theta_g^T phi_g.
struct AdaptiveControllerState {
  FeatureMap phi_f;
  FeatureMap phi_g;
  Vector theta_f;
  Vector theta_g;
  double alpha_f = 1.0;
  double alpha_g = 1.0;
  double g_min = 0.1;
  double box = 5.0;  // g_hat >= g_min is enforced on [-box, box]

  double f_hat(double x) const;
  double g_hat(double x) const;
  // min of g_hat over the projection grid
  double g_hat_floor() const;
  void validate() const;
};

struct AdaptiveStep {
  double control = 0.0;
  AdaptiveControllerState next;
  bool projected = false;
};

/// u = (-K x - f_hat) / g_hat, then Euler updates
///   theta_f' = alpha_f x phi_f,  theta_g' = alpha_g x phi_g u,
/// with the theta_g step shortened so that g_hat >= g_min on the box.
AdaptiveStep adaptive_baseline_step(const AdaptiveControllerState& state, double x,
                                    double gain, double dt);

// x^2/2 + |theta_f - theta_f*|^2 / (2 alpha_f) + |theta_g - theta_g*|^2 / (2 alpha_g)
double adaptive_lyapunov(const AdaptiveControllerState& state, double x,
                         const Vector& theta_f_star, const Vector& theta_g_star);

}  // namespace stabrl
