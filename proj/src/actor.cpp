#include "stabrl/actor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stabrl/errors.hpp"

namespace stabrl {
namespace {

constexpr int kProjectionGrid = 201;

Vector scalar(double v) { return Vector::Constant(1, v); }

double grid_point(double box, int i) {
  return -box + 2.0 * box * i / (kProjectionGrid - 1);
}

}  // namespace

void RobustifierParams::validate() const {
  if (!(gain > 0.0)) throw InputError("robustifier: K must be positive");
  if (!(offset > 0.0)) throw InputError("robustifier: A must be positive");
}

Vector robustifying_term(const Vector& x, const RobustifierParams& params, int control_dim) {
  params.validate();
  if (control_dim < 1) throw InputError("robustifier: control dimension must be >= 1");
  const double sq = x.squaredNorm();
  return Vector::Constant(control_dim, -params.gain * sq / (params.offset + sq));
}

Vector greedy_policy_from_critic(const Vector& theta, const FeatureMap& features,
                                 const EnvModel& env, const Vector& x) {
  if (!env.control_affine()) {
    throw UnsupportedError("greedy policy: model '" + env.name + "' is not control-affine");
  }
  if (!env.cost.control_weight) {
    throw UnsupportedError("greedy policy: stage cost is not quadratic in u");
  }
  if (theta.size() != features.size()) throw InputError("greedy policy: theta length mismatch");
  const Matrix& r = *env.cost.control_weight;
  const Vector value_grad = features.eval(x, 1).jacobian->transpose() * theta;
  return -0.5 * r.ldlt().solve(env.gain(x).transpose() * value_grad);
}

Policy make_greedy_policy(Vector theta, FeatureMap features, const EnvModel& env) {
  if (!env.control_affine() || !env.cost.control_weight) {
    throw UnsupportedError("greedy policy: model '" + env.name +
                           "' needs g(x) and a cost quadratic in u");
  }
  if (theta.size() != features.size()) throw InputError("greedy policy: theta length mismatch");
  return [theta = std::move(theta), features = std::move(features), env](const Vector& x) {
    return greedy_policy_from_critic(theta, features, env, x);
  };
}

Vector effective_policy(const Policy& base, const RobustifierParams& params, const Vector& x) {
  Vector u = base(x);
  return u + robustifying_term(x, params, static_cast<int>(u.size()));
}

Policy make_effective_policy(Policy base, RobustifierParams params) {
  params.validate();
  return [base = std::move(base), params](const Vector& x) {
    return effective_policy(base, params, x);
  };
}

double actor_loss(const Policy& candidate, const Policy& kappa_star,
                  const std::vector<Vector>& batch) {
  if (!kappa_star) throw UnsupportedError("actor loss: no optimal policy available");
  if (!candidate) throw InputError("actor loss: candidate policy is empty");
  if (batch.empty()) throw InputError("actor loss: empty batch");
  double total = 0.0;
  for (const auto& x : batch) total += 0.5 * (candidate(x) - kappa_star(x)).squaredNorm();
  return total / static_cast<double>(batch.size());
}

double AdaptiveControllerState::f_hat(double x) const {
  return theta_f.dot(phi_f.values(scalar(x)));
}

double AdaptiveControllerState::g_hat(double x) const {
  return theta_g.dot(phi_g.values(scalar(x)));
}

double AdaptiveControllerState::g_hat_floor() const {
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kProjectionGrid; ++i) lo = std::min(lo, g_hat(grid_point(box, i)));
  return lo;
}

void AdaptiveControllerState::validate() const {
  if (phi_f.state_dim() != 1 || phi_g.state_dim() != 1) {
    throw InputError("adaptive controller: features must be scalar-state");
  }
  if (theta_f.size() != phi_f.size() || theta_g.size() != phi_g.size()) {
    throw InputError("adaptive controller: weight and feature lengths differ");
  }
  if (!(alpha_f > 0.0) || !(alpha_g > 0.0)) {
    throw InputError("adaptive controller: adaptation gains must be positive");
  }
  if (!(g_min > 0.0)) throw InputError("adaptive controller: g_min must be positive");
  if (!(box > 0.0)) throw InputError("adaptive controller: box must be positive");
  if (g_hat_floor() < g_min) {
    throw InputError("adaptive controller: initial g_hat violates g_min on the box");
  }
}

AdaptiveStep adaptive_baseline_step(const AdaptiveControllerState& state, double x,
                                    double gain, double dt) {
  if (!(gain > 0.0)) throw InputError("adaptive step: K must be positive");
  if (!(dt > 0.0)) throw InputError("adaptive step: dt must be positive");
  if (!std::isfinite(x)) throw DivergenceError("adaptive step: state is not finite");

  // Off the box g_hat is unconstrained; the floor keeps the division safe.
  const double g_hat = std::max(state.g_hat(x), state.g_min);
  const double u = (-gain * x - state.f_hat(x)) / g_hat;

  AdaptiveStep out{u, state, false};
  out.next.theta_f += (dt * state.alpha_f * x) * state.phi_f.values(scalar(x));
  const Vector dtheta_g = (dt * state.alpha_g * x * u) * state.phi_g.values(scalar(x));

  // Largest fraction of the theta_g step keeping g_hat >= g_min on the grid
  // and at the current state.
  double fraction = 1.0;
  auto limit = [&](double xi) {
    const Vector phi = state.phi_g.values(scalar(xi));
    const double change = dtheta_g.dot(phi);
    if (change >= 0.0) return;
    const double slack = state.theta_g.dot(phi) - state.g_min;
    fraction = std::min(fraction, std::max(0.0, slack) / -change);
  };
  for (int i = 0; i < kProjectionGrid; ++i) limit(grid_point(state.box, i));
  if (std::abs(x) <= state.box) limit(x);
  out.projected = fraction < 1.0;
  out.next.theta_g += fraction * dtheta_g;

  if (!std::isfinite(u) || !out.next.theta_f.allFinite() || !out.next.theta_g.allFinite()) {
    throw DivergenceError("adaptive step: non-finite control or weights");
  }
  return out;
}

double adaptive_lyapunov(const AdaptiveControllerState& state, double x,
                         const Vector& theta_f_star, const Vector& theta_g_star) {
  const double ef = (state.theta_f - theta_f_star).squaredNorm();
  const double eg = (state.theta_g - theta_g_star).squaredNorm();
  return 0.5 * x * x + 0.5 * ef / state.alpha_f + 0.5 * eg / state.alpha_g;
}

}  // namespace stabrl
