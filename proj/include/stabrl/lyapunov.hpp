#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stabrl/actor.hpp"
#include "stabrl/envs.hpp"

namespace stabrl {

using GradientField = std::function<Vector(const Vector&)>;

struct LyapTerm {
  std::string name;
  double value = 0.0;
};

struct LyapDecomposition {
  double total = 0.0;
  std::vector<LyapTerm> terms;

  double sum() const;
  // Value of the named term; throws InputError when absent.
  double term(const std::string& name) const;
};

// grad V(x)^T F(x, u) for a deterministic model.
double lyap_derivative(const GradientField& value_grad, const EnvModel& env, const Vector& x,
                       const Vector& u);

/// Split of dV/dt along u = actor(x) + robustifier(x) for a control-affine
/// model with known value, using grad V^T f = -rho* - grad V^T g kappa*:
///   minus_rho_star    -rho(x, kappa*(x))
///   actor_error_term  grad V^T g (actor - actor_ideal)
///   delta_u_term      grad V^T g (actor_ideal - kappa*)
///   robustifier_term  grad V^T g robustifier(x)
/// `actor_ideal` is the best policy the actor's features can express; when
/// empty it is taken to be kappa* (no actor approximation error).
/// `total` is evaluated directly from the dynamics, not from the terms.
LyapDecomposition decompose_value_derivative(const EnvModel& env, const Policy& actor,
                                             const RobustifierParams& params, const Vector& x,
                                             const Policy& actor_ideal = {});

/// Counterexample under kappa* plus robustifier:
///   dL/dt = -x2^2 - x2^2 g^2 + R,  R = -2 x2 g K |x|^2 / (A + |x|^2).
/// Terms: minus_x2_sq, minus_g_sq_x2_sq, robustifier. `total` is their sum.
LyapDecomposition counterexample_decomposition(const Vector& x, const ScalarField& g,
                                               const RobustifierParams& params);

/// Where dL/dt > 0 on the slice x1 = 0, g = 1: x2^2 + K x2 + A < 0.
struct PositiveRegion {
  double gain = 0.0;
  double offset = 0.0;
  std::optional<std::pair<double, double>> exact;  // open interval, empty if K^2 <= 4A
  // The set as stated for the robustified loop: [(-K - sqrt(K^2 - 4A)) / 2, 0).
  // NaN lower end when K^2 < 4A.
  double stated_lower = 0.0;
  double stated_upper = 0.0;

  double width() const { return exact ? exact->second - exact->first : 0.0; }
  bool contains(double x2) const { return exact && x2 > exact->first && x2 < exact->second; }
};

PositiveRegion positive_region(double gain, double offset);

struct SliceScan {
  std::vector<double> x2;
  std::vector<double> derivative;
  // Midpoints between consecutive grid points where the sign of dL/dt
  // switches between positive and non-positive.
  std::vector<double> boundaries;
};

/// Dense scan of dL/dt on x1 = 0 for the g = 1 counterexample under
/// kappa* + robustifier, evaluated from the dynamics directly.
SliceScan scan_slice(const RobustifierParams& params, double lo, double hi, double step);

// Assumed norm bounds entering the claimed inequality.
struct ClaimBounds {
  double value_grad = 1.0;  // bound on |grad V|
  double gain = 1.0;        // bound on |g|
};

struct ClaimAudit {
  Vector x;
  double true_contribution = 0.0;     // -grad V^T g K |x|^2 / (A + |x|^2)
  double claimed_contribution = 0.0;  // -bar(grad V) bar(g) K |x|^2 / (A + |x|^2)
  int claimed_sign = -1;
  bool violated = false;  // true contribution is positive
};

ClaimAudit audit_claimed_bound(const Vector& x, const ScalarField& g,
                               const RobustifierParams& params, const ClaimBounds& bounds);

// Audits every point of a uniform grid on [-box, box]^2 and returns the violations.
std::vector<ClaimAudit> find_claim_violations(const ScalarField& g,
                                              const RobustifierParams& params,
                                              const ClaimBounds& bounds, double box, int per_axis);

}  // namespace stabrl
