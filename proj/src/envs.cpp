#include "stabrl/envs.hpp"

#include <cmath>
#include <sstream>

#include "stabrl/errors.hpp"

namespace stabrl {
namespace {

void check_state(const EnvModel& env, const Vector& x, const char* who) {
  if (x.size() != env.state_dim) {
    std::ostringstream os;
    os << who << ": state has length " << x.size() << ", model expects " << env.state_dim;
    throw InputError(os.str());
  }
}

void check_control(const EnvModel& env, const Vector& u, const char* who) {
  if (u.size() != env.control_dim) {
    std::ostringstream os;
    os << who << ": control has length " << u.size() << ", model expects "
       << env.control_dim;
    throw InputError(os.str());
  }
}

Vector scalar(double v) { return Vector::Constant(1, v); }

}  // namespace

double counterexample_drift(const ScalarField& g, const Vector& x) {
  const double gx = g(x);
  return -x[0] - 0.5 * x[1] * (1.0 - gx * gx);
}

EnvModel make_counterexample(ScalarField g) {
  if (!g) throw InputError("counterexample: g must be callable");
  EnvModel env;
  env.name = "counterexample";
  env.state_dim = 2;
  env.control_dim = 1;
  env.drift = [g](const Vector& x, const Vector& u) {
    Vector dx(2);
    dx[0] = x[1];
    dx[1] = counterexample_drift(g, x) + g(x) * u[0];
    return dx;
  };
  env.gain = [g](const Vector& x) {
    Matrix gm(2, 1);
    gm << 0.0, g(x);
    return gm;
  };
  env.cost.evaluate = [](const Vector& x, const Vector& u) {
    return x[1] * x[1] + u.squaredNorm();
  };
  env.cost.control_weight = Matrix::Identity(1, 1);
  env.cost.discount = 0.0;
  env.known = KnownValue{
      Polynomial(2, {{{2, 0}, 1.0}, {{0, 2}, 1.0}}),
      [g](const Vector& x) { return scalar(-g(x) * x[1]); },
  };
  return env;
}

LqSolution solve_lq(const LqParams& pr) {
  if (!(pr.r > 0.0)) throw InputError("lq benchmark: r must be positive");
  if (pr.q < 0.0) throw InputError("lq benchmark: q must be non-negative");
  if (pr.discount < 0.0) throw InputError("lq benchmark: discount must be non-negative");
  if (pr.noise != 0.0 && !(pr.discount > 0.0)) {
    throw InputError("lq benchmark: noisy model needs a positive discount, the value is unbounded otherwise");
  }
  // (b^2/r) p^2 - (2a - gamma) p - q = 0
  const double quad = pr.b * pr.b / pr.r;
  const double lin = -(2.0 * pr.a - pr.discount);
  double p;
  if (quad == 0.0) {
    if (!(lin > 0.0)) {
      throw ModelError("lq benchmark: uncontrolled and not discount-stable, no positive root");
    }
    p = pr.q / lin;
  } else {
    const double disc = lin * lin + 4.0 * quad * pr.q;
    // disc >= 0 whenever q >= 0; the larger root is the stabilizing one
    p = (-lin + std::sqrt(disc)) / (2.0 * quad);
  }
  if (!std::isfinite(p)) throw ModelError("lq benchmark: Riccati root is not finite");
  LqSolution sol;
  sol.p = p;
  sol.c = pr.noise == 0.0 ? 0.0 : p * pr.noise * pr.noise / pr.discount;
  sol.feedback = p * pr.b / pr.r;
  return sol;
}

EnvModel make_lq_stochastic(const LqParams& pr) {
  const LqSolution sol = solve_lq(pr);
  EnvModel env;
  env.name = "lq_stochastic";
  env.state_dim = 1;
  env.control_dim = 1;
  env.drift = [pr](const Vector& x, const Vector& u) {
    return scalar(pr.a * x[0] + pr.b * u[0]);
  };
  env.gain = [pr](const Vector&) { return Matrix::Constant(1, 1, pr.b); };
  if (pr.noise != 0.0) {
    env.noise_dim = 1;
    env.diffusion = [pr](const Vector&, const Vector&) {
      return Matrix::Constant(1, 1, pr.noise);
    };
  }
  env.cost.evaluate = [pr](const Vector& x, const Vector& u) {
    return pr.q * x[0] * x[0] + pr.r * u[0] * u[0];
  };
  env.cost.control_weight = Matrix::Constant(1, 1, pr.r);
  env.cost.discount = pr.discount;
  env.known = KnownValue{
      Polynomial(1, {{{2}, sol.p}, {{0}, sol.c}}),
      [k = sol.feedback](const Vector& x) { return scalar(-k * x[0]); },
  };
  return env;
}

EnvModel make_adaptive_plant(ScalarField f_true, ScalarField g_true, double g_min,
                             double box) {
  if (!f_true || !g_true) throw InputError("adaptive plant: f and g must be callable");
  if (!(g_min > 0.0)) throw InputError("adaptive plant: g_min must be positive");
  if (!(box > 0.0)) throw InputError("adaptive plant: operating box must be positive");
  constexpr int kGrid = 2001;
  for (int i = 0; i < kGrid; ++i) {
    const double xi = -box + 2.0 * box * i / (kGrid - 1);
    if (g_true(scalar(xi)) < g_min) {
      std::ostringstream os;
      os << "adaptive plant: g(" << xi << ") = " << g_true(scalar(xi))
         << " is below g_min = " << g_min;
      throw InputError(os.str());
    }
  }
  EnvModel env;
  env.name = "adaptive_plant";
  env.state_dim = 1;
  env.control_dim = 1;
  env.drift = [f_true, g_true](const Vector& x, const Vector& u) {
    return scalar(f_true(x) + g_true(x) * u[0]);
  };
  env.gain = [g_true](const Vector& x) { return Matrix::Constant(1, 1, g_true(x)); };
  env.cost.evaluate = [](const Vector& x, const Vector& u) {
    return x.squaredNorm() + u.squaredNorm();
  };
  env.cost.control_weight = Matrix::Identity(1, 1);
  return env;
}

Vector step_rk4(const EnvModel& env, const Vector& x, const Policy& policy, double dt) {
  if (!env.deterministic()) {
    throw WrongIntegratorError("rk4: model has diffusion, use Euler-Maruyama");
  }
  if (!(dt > 0.0)) throw InputError("rk4: dt must be positive");
  check_state(env, x, "rk4");
  const Vector u = policy(x);
  check_control(env, u, "rk4");
  const Vector k1 = env.drift(x, u);
  const Vector k2 = env.drift(x + 0.5 * dt * k1, u);
  const Vector k3 = env.drift(x + 0.5 * dt * k2, u);
  const Vector k4 = env.drift(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector step_euler_maruyama(const EnvModel& env, const Vector& x, const Policy& policy,
                           double dt, const Vector& noise) {
  if (!(dt > 0.0)) throw InputError("euler-maruyama: dt must be positive");
  check_state(env, x, "euler-maruyama");
  if (noise.size() != env.noise_dim) {
    std::ostringstream os;
    os << "euler-maruyama: noise has length " << noise.size() << ", model expects "
       << env.noise_dim;
    throw InputError(os.str());
  }
  const Vector u = policy(x);
  check_control(env, u, "euler-maruyama");
  Vector next = x + dt * env.drift(x, u);
  if (!env.deterministic()) next += env.diffusion(x, u) * (std::sqrt(dt) * noise);
  return next;
}

}  // namespace stabrl
