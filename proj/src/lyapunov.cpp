#include "stabrl/lyapunov.hpp"

#include <cmath>
#include <limits>

#include "stabrl/errors.hpp"

namespace stabrl {

double LyapDecomposition::sum() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.value;
  return s;
}

double LyapDecomposition::term(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t.value;
  }
  throw InputError("lyapunov decomposition: no term named '" + name + "'");
}

double lyap_derivative(const GradientField& value_grad, const EnvModel& env, const Vector& x,
                       const Vector& u) {
  if (!env.deterministic()) {
    throw WrongIntegratorError("lyap derivative: model is stochastic, use the Ito generator");
  }
  return value_grad(x).dot(env.drift(x, u));
}

LyapDecomposition decompose_value_derivative(const EnvModel& env, const Policy& actor,
                                             const RobustifierParams& params, const Vector& x,
                                             const Policy& actor_ideal) {
  if (!env.known) throw UnsupportedError("decomposition: model has no closed-form value");
  if (!env.control_affine()) throw UnsupportedError("decomposition: model is not control-affine");
  const Vector grad = env.known->value.gradient(x);
  const Vector kappa_star = env.known->optimal_policy(x);
  const Vector kappa_hat = actor(x);
  const Vector ideal = actor_ideal ? actor_ideal(x) : kappa_star;
  const Vector robust = robustifying_term(x, params, env.control_dim);
  const Vector grad_g = env.gain(x).transpose() * grad;

  LyapDecomposition out;
  out.terms = {
      {"minus_rho_star", -env.cost(x, kappa_star)},
      {"actor_error_term", grad_g.dot(kappa_hat - ideal)},
      {"delta_u_term", grad_g.dot(ideal - kappa_star)},
      {"robustifier_term", grad_g.dot(robust)},
  };
  out.total = lyap_derivative([&env](const Vector& y) { return env.known->value.gradient(y); },
                              env, x, kappa_hat + robust);
  return out;
}

LyapDecomposition counterexample_decomposition(const Vector& x, const ScalarField& g,
                                               const RobustifierParams& params) {
  if (x.size() != 2) throw InputError("counterexample decomposition: state must be 2-D");
  params.validate();
  const double gx = g(x);
  const double x2 = x[1];
  const double sq = x.squaredNorm();
  LyapDecomposition out;
  out.terms = {
      {"minus_x2_sq", -x2 * x2},
      {"minus_g_sq_x2_sq", -x2 * x2 * gx * gx},
      {"robustifier", -2.0 * x2 * gx * params.gain * sq / (params.offset + sq)},
  };
  out.total = out.sum();
  return out;
}

PositiveRegion positive_region(double gain, double offset) {
  RobustifierParams{gain, offset}.validate();
  PositiveRegion region;
  region.gain = gain;
  region.offset = offset;
  const double disc = gain * gain - 4.0 * offset;
  if (disc > 0.0) {
    const double root = std::sqrt(disc);
    region.exact = std::make_pair(0.5 * (-gain - root), 0.5 * (-gain + root));
  }
  region.stated_lower =
      disc >= 0.0 ? 0.5 * (-gain - std::sqrt(disc)) : std::numeric_limits<double>::quiet_NaN();
  region.stated_upper = 0.0;
  return region;
}

SliceScan scan_slice(const RobustifierParams& params, double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi > lo)) throw InputError("slice scan: need lo < hi and step > 0");
  const ScalarField one = [](const Vector&) { return 1.0; };
  const EnvModel env = make_counterexample(one);
  const Policy policy = make_effective_policy(env.known->optimal_policy, params);
  const GradientField grad = [](const Vector& y) { return Vector(2.0 * y); };

  SliceScan scan;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  scan.x2.reserve(count);
  scan.derivative.reserve(count);
  Vector x(2);
  for (long i = 0; i < count; ++i) {
    x << 0.0, lo + static_cast<double>(i) * step;
    scan.x2.push_back(x[1]);
    scan.derivative.push_back(lyap_derivative(grad, env, x, policy(x)));
    if (i > 0 && (scan.derivative[i] > 0.0) != (scan.derivative[i - 1] > 0.0)) {
      scan.boundaries.push_back(0.5 * (scan.x2[i] + scan.x2[i - 1]));
    }
  }
  return scan;
}

ClaimAudit audit_claimed_bound(const Vector& x, const ScalarField& g,
                               const RobustifierParams& params, const ClaimBounds& bounds) {
  if (x.size() != 2) throw InputError("claim audit: state must be 2-D");
  params.validate();
  const double sq = x.squaredNorm();
  const double shape = params.gain * sq / (params.offset + sq);
  // grad V^T g = 2 x2 g(x); g may vanish, which zeroes the contribution.
  const double grad_g = 2.0 * x[1] * g(x);
  ClaimAudit audit;
  audit.x = x;
  audit.true_contribution = -grad_g * shape;
  audit.claimed_contribution = -bounds.value_grad * bounds.gain * shape;
  audit.violated = audit.true_contribution > 0.0;
  return audit;
}

std::vector<ClaimAudit> find_claim_violations(const ScalarField& g,
                                              const RobustifierParams& params,
                                              const ClaimBounds& bounds, double box, int per_axis) {
  if (per_axis < 2 || !(box > 0.0)) throw InputError("claim search: need a grid of >= 2 points");
  std::vector<ClaimAudit> hits;
  Vector x(2);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      x << -box + 2.0 * box * i / (per_axis - 1), -box + 2.0 * box * j / (per_axis - 1);
      ClaimAudit a = audit_claimed_bound(x, g, params, bounds);
      if (a.violated) hits.push_back(std::move(a));
    }
  }
  return hits;
}

}  // namespace stabrl
