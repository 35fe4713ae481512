#pragma once

#include <functional>
#include <optional>
#include <string>

#include "stabrl/features.hpp"

namespace stabrl {

using Policy = std::function<Vector(const Vector&)>;
using ScalarField = std::function<double(const Vector&)>;
using Dynamics = std::function<Vector(const Vector&, const Vector&)>;

// rho(x, u); when control_weight is set the cost has the form q(x) + u^T R u.
struct StageCost {
  std::function<double(const Vector&, const Vector&)> evaluate;
  std::optional<Matrix> control_weight;
  double discount = 0.0;

  double operator()(const Vector& x, const Vector& u) const { return evaluate(x, u); }
};

// Closed-form ground truth for benchmarks: V as a polynomial and kappa*.
struct KnownValue {
  Polynomial value;
  Policy optimal_policy;
};

/// dX = f(X, U) dt + sigma(X, U) dB. Deterministic when `diffusion` is empty.
/// Control-affine models additionally expose g(x) through `gain`.
struct EnvModel {
  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  int noise_dim = 0;
  Dynamics drift;
  std::function<Matrix(const Vector&)> gain;
  std::function<Matrix(const Vector&, const Vector&)> diffusion;
  StageCost cost;
  std::optional<KnownValue> known;

  bool deterministic() const { return !diffusion; }
  bool control_affine() const { return static_cast<bool>(gain); }
};

// ---- counterexample family ------------------------------------------------

/// x1' = x2, x2' = f(x) + g(x) u with f = -x1 - x2 (1 - g^2) / 2, chosen so
/// that V = x1^2 + x2^2 is the value function for rho = x2^2 + u^2 and
/// kappa*(x) = -g(x) x2.
EnvModel make_counterexample(ScalarField g);

// The drift f(x) of the second state equation above.
double counterexample_drift(const ScalarField& g, const Vector& x);

// ---- scalar stochastic LQ benchmark ---------------------------------------

struct LqParams {
  double a = -1.0;
  double b = 1.0;
  double q = 1.0;
  double r = 1.0;
  double discount = 0.1;
  double noise = 0.1;
};

// V(x) = p x^2 + c. p solves p^2 b^2 / r - (2a - gamma) p - q = 0.
struct LqSolution {
  double p = 0.0;
  double c = 0.0;
  double feedback = 0.0;  // kappa*(x) = -feedback * x, feedback = p b / r
};

LqSolution solve_lq(const LqParams& params);

/// dX = (aX + bU) dt + s dB, rho = q x^2 + r u^2, discount gamma.
EnvModel make_lq_stochastic(const LqParams& params);

// ---- adaptive-control scalar plant ----------------------------------------

/// x' = f(x) + g(x) u with f, g hidden from the controller. `g_true` must stay
/// above `g_min` on [-box, box]; checked on a uniform grid.
EnvModel make_adaptive_plant(ScalarField f_true, ScalarField g_true, double g_min,
                             double box = 5.0);

// ---- integrators -----------------------------------------------------------

// Classical RK4 with u = policy(x) frozen over the step.
Vector step_rk4(const EnvModel& env, const Vector& x, const Policy& policy, double dt);

// x + f dt + sigma sqrt(dt) noise, u = policy(x). noise has length noise_dim.
Vector step_euler_maruyama(const EnvModel& env, const Vector& x, const Policy& policy,
                           double dt, const Vector& noise);

}  // namespace stabrl
