#include "stabrl/convergence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "stabrl/errors.hpp"

namespace stabrl {
namespace {

constexpr double kTinyState = 1e-12;  // |x|^2 below this is treated as x = 0

std::size_t step_count(double horizon, double dt) {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

struct Logger {
  TrialRecord& rec;
  const TrialSetup& setup;
  bool due(std::size_t k, std::size_t last) const {
    return k % static_cast<std::size_t>(setup.log_every) == 0 || k == last;
  }
  void log(const CriticState& critic, const ReplayBuffer& buffer, double t, double lambda,
           double z, const Vector& x) {
    rec.time.push_back(t);
    rec.theta.push_back(critic.theta);
    rec.weight_error_sq.push_back(critic.weight_error_sq());
    rec.lambda_min.push_back(lambda);
    rec.abs_z.push_back(std::abs(z));
    rec.state_norm.push_back(x.norm());
    rec.buffer_abs_z.push_back(perturbation_abs_sum(buffer, setup.features, setup.env));
  }
};

void track_z(TrialRecord& rec, double z, const Vector& x) {
  const double sq = x.squaredNorm();
  if (sq > kTinyState) rec.max_z_ratio = std::max(rec.max_z_ratio, std::abs(z) / sq);
}

}  // namespace

void validate(const TrialSetup& s) {
  if (!s.env.known) throw UnsupportedError("trial: model has no closed-form value");
  if (!s.behavior) throw InputError("trial: behavior policy missing");
  if (!(s.learning_rate > 0.0)) throw InputError("trial: alpha must be positive");
  if (s.buffer_size == 0) throw InputError("trial: buffer size must be >= 1");
  if (!(s.dt > 0.0) || !(s.horizon > 0.0)) throw InputError("trial: dt and T must be positive");
  if (s.x0.size() != s.env.state_dim) throw InputError("trial: x0 has the wrong length");
  if (s.theta0.size() != s.features.size()) throw InputError("trial: theta0 has the wrong length");
  if (!(s.pe_threshold > 0.0)) throw InputError("trial: PE threshold must be positive");
  if (s.max_warmup < 0.0) throw InputError("trial: max warm-up must be non-negative");
  if (s.log_every < 1 || s.state_sample_every < 1) {
    throw InputError("trial: log/sample strides must be >= 1");
  }
  if (s.dt * s.learning_rate * static_cast<double>(s.buffer_size) > 1.0) {
    throw InputError("trial: dt must satisfy dt <= 1/(alpha M)");
  }
}

TrialRecord run_critic_sde_trial(const TrialSetup& setup, std::uint64_t seed) {
  validate(setup);
  const EnvModel& env = setup.env;
  TrialRecord rec;
  rec.seed = seed;
  rec.min_lambda_after_warmup = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ReplayBuffer buffer(setup.buffer_size);
  CriticState critic{setup.theta0, setup.learning_rate, ideal_weights(setup.features, env)};
  rec.initial_error_sq = critic.weight_error_sq();

  const std::size_t steps = step_count(setup.horizon, setup.dt);
  const std::size_t max_warmup_steps = step_count(setup.max_warmup, setup.dt);
  Logger logger{rec, setup};
  Vector x = setup.x0;
  Vector noise(env.noise_dim);
  auto advance = [&](double t) {
    for (int i = 0; i < env.noise_dim; ++i) noise[i] = normal(rng);
    x = step_euler_maruyama(env, x, setup.behavior, setup.dt, noise);
    if (!x.allFinite()) {
      std::ostringstream os;
      os << "state became non-finite at t = " << t + setup.dt;
      throw DivergenceError(os.str());
    }
  };
  try {
    std::size_t k = 0;
    double lambda = 0.0;
    for (;; ++k) {
      const double t = static_cast<double>(k) * setup.dt;
      const Vector u = setup.behavior(x);
      buffer.observe(make_sample(setup.features, env, t, x, u));
      lambda = pe_matrix(buffer).lambda_min;
      if (buffer.full() && lambda >= setup.pe_threshold) break;
      rec.warmup_max_state_norm = std::max(rec.warmup_max_state_norm, x.norm());
      track_z(rec, hamiltonian_perturbation(setup.features, env, x, u), x);
      if (k == max_warmup_steps) {
        std::ostringstream os;
        os << "replay buffer did not reach lambda_min >= " << setup.pe_threshold << " within "
           << setup.max_warmup << " time units (lambda_min = " << lambda << ")";
        throw ExcitationError(os.str(), lambda);
      }
      advance(t);
    }
    const std::size_t start = k;
    rec.warmup_time = static_cast<double>(start) * setup.dt;
    // The sample at `start` is already in the buffer.
    for (std::size_t j = 0; j <= steps; ++j) {
      const double t = static_cast<double>(start + j) * setup.dt;
      const Vector u = setup.behavior(x);
      if (j > 0) {
        buffer.observe(make_sample(setup.features, env, t, x, u));
        lambda = pe_matrix(buffer).lambda_min;
      }
      const double z = hamiltonian_perturbation(setup.features, env, x, u);
      rec.min_lambda_after_warmup = std::min(rec.min_lambda_after_warmup, lambda);
      track_z(rec, z, x);
      if (logger.due(j, steps)) {
        logger.log(critic, buffer, static_cast<double>(j) * setup.dt, lambda, z, x);
      }
      if (j == steps) break;
      critic = critic_step(critic, buffer, setup.dt);
      advance(t);
    }
  } catch (const DivergenceError& e) {
    rec.failed = true;
    rec.diagnostic = e.what();
  } catch (const ExcitationError& e) {
    rec.failed = true;
    rec.diagnostic = e.what();
  }
  return rec;
}

std::vector<TrialRecord> run_trials(const TrialSetup& setup, std::size_t count,
                                    std::uint64_t base_seed, unsigned threads) {
  validate(setup);
  std::vector<TrialRecord> out(count);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      out[i] = run_critic_sde_trial(setup, base_seed + i);
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work);
  }
  return out;
}

OdeTrialResult run_critic_ode_trial(const TrialSetup& setup, double epsilon,
                                    std::size_t max_draws) {
  validate(setup);
  const EnvModel& env = setup.env;
  if (!env.deterministic()) throw WrongIntegratorError("ode trial: model has diffusion");

  OdeTrialResult result;
  TrialRecord& rec = result.record;
  rec.min_lambda_after_warmup = std::numeric_limits<double>::infinity();

  double t = 0.0;
  Vector x = setup.x0;
  ReplayBuffer buffer(setup.buffer_size);
  const SampleSource source = [&] {
    ReplaySample s = make_sample(setup.features, env, t, x, setup.behavior(x));
    rec.warmup_max_state_norm = std::max(rec.warmup_max_state_norm, x.norm());
    for (int i = 0; i < setup.state_sample_every; ++i) {
      x = step_rk4(env, x, setup.behavior, setup.dt);
      t += setup.dt;
    }
    ++result.fill_draws;
    return s;
  };
  result.fill_lambda = push_until_pe(buffer, source, epsilon, max_draws);

  CriticState critic{setup.theta0, setup.learning_rate, ideal_weights(setup.features, env)};
  rec.initial_error_sq = critic.weight_error_sq();
  const double t_start = t;
  const std::size_t steps = step_count(setup.horizon, setup.dt);
  Logger logger{rec, setup};
  try {
    for (std::size_t k = 0; k <= steps; ++k) {
      const Vector u = setup.behavior(x);
      buffer.observe(make_sample(setup.features, env, t, x, u));
      const double lambda = pe_matrix(buffer).lambda_min;
      const double z = hamiltonian_perturbation(setup.features, env, x, u);
      rec.min_lambda_after_warmup = std::min(rec.min_lambda_after_warmup, lambda);
      track_z(rec, z, x);
      if (logger.due(k, steps)) logger.log(critic, buffer, t - t_start, lambda, z, x);
      if (k == steps) break;
      critic = critic_step(critic, buffer, setup.dt);
      x = step_rk4(env, x, setup.behavior, setup.dt);
      t += setup.dt;
    }
  } catch (const DivergenceError& e) {
    rec.failed = true;
    rec.diagnostic = e.what();
  }
  result.realized_epsilon = rec.min_lambda_after_warmup;
  return result;
}

TheoremConstants estimate_constants(const std::vector<TrialRecord>& trials,
                                    double learning_rate, std::size_t buffer_size) {
  if (trials.size() < 30) throw InputError("estimate constants: need at least 30 trials");
  for (const auto& r : trials) {
    if (r.failed) throw StateError("estimate constants: trial " + std::to_string(r.seed) +
                                   " failed: " + r.diagnostic);
    if (r.state_norm.size() != trials.front().state_norm.size()) {
      throw InputError("estimate constants: trials have different time grids");
    }
  }
  TheoremConstants c;
  c.learning_rate = learning_rate;
  c.buffer_size = static_cast<double>(buffer_size);

  double ratio = 0.0;
  double eps = std::numeric_limits<double>::infinity();
  for (const auto& r : trials) {
    ratio = std::max(ratio, r.max_z_ratio);
    eps = std::min(eps, r.min_lambda_after_warmup);
  }
  if (!(eps > 1e-12)) {
    std::ostringstream os;
    os << "estimate constants: persistence of excitation lost (min lambda_min = " << eps << ")";
    throw ExcitationError(os.str(), eps);
  }
  double max_fourth = 0.0;
  for (const auto& r : trials) max_fourth += std::pow(r.warmup_max_state_norm, 4);
  max_fourth /= static_cast<double>(trials.size());
  const std::size_t points = trials.front().state_norm.size();
  for (std::size_t j = 0; j < points; ++j) {
    double acc = 0.0;
    for (const auto& r : trials) acc += std::pow(r.state_norm[j], 4);
    max_fourth = std::max(max_fourth, acc / static_cast<double>(trials.size()));
  }
  c.growth = 1.05 * ratio;
  c.fourth_moment_raw = std::sqrt(max_fourth);
  c.fourth_moment = 1.5 * c.fourth_moment_raw;
  c.epsilon = eps;
  c.d = c.buffer_size * c.growth * c.fourth_moment / 2.0;
  return c;
}

double theorem_bound(const TheoremConstants& constants, double initial_error_sq,
                     double sup_root_ms, double t) {
  if (t < 0.0) throw InputError("theorem bound: t must be non-negative");
  return std::exp(-constants.learning_rate * constants.epsilon * t) * initial_error_sq +
         constants.d * sup_root_ms;
}

BoundReport check_bound(const std::vector<TrialRecord>& trials,
                        const TheoremConstants& constants) {
  if (trials.size() < 100) throw InputError("check bound: need at least 100 trials");
  const std::size_t points = trials.front().weight_error_sq.size();
  for (const auto& r : trials) {
    if (r.failed) throw StateError("check bound: trial " + std::to_string(r.seed) + " failed");
    if (r.weight_error_sq.size() != points) throw InputError("check bound: ragged time grids");
  }
  const double n = static_cast<double>(trials.size());
  const double initial = trials.front().initial_error_sq;
  BoundReport rep;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  double running_sup = 0.0;
  for (std::size_t j = 0; j < points; ++j) {
    double sum = 0.0;
    for (const auto& r : trials) sum += r.weight_error_sq[j];
    const double mean = sum / n;
    double var = 0.0;
    for (const auto& r : trials) var += (r.weight_error_sq[j] - mean) * (r.weight_error_sq[j] - mean);
    const double se = std::sqrt(var / (n - 1.0) / n);
    running_sup = std::max(running_sup, std::sqrt(mean));
    const double t = trials.front().time[j];
    const double b = theorem_bound(constants, initial, running_sup, t);
    const double margin = b + 3.0 * se - mean;
    rep.time.push_back(t);
    rep.empirical_ms.push_back(mean);
    rep.std_error.push_back(se);
    rep.sup_root_ms.push_back(running_sup);
    rep.bound.push_back(b);
    rep.margin.push_back(margin);
    rep.pass.push_back(margin >= 0.0);
    rep.all_pass = rep.all_pass && margin >= 0.0;
    rep.worst_margin = std::min(rep.worst_margin, margin);
  }
  return rep;
}

MeanEstimate ultimate_error(const std::vector<TrialRecord>& trials, double fraction) {
  if (trials.size() < 2) throw InputError("ultimate error: need at least 2 trials");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("ultimate error: fraction in (0, 1]");
  std::vector<double> per_trial;
  for (const auto& r : trials) {
    if (r.time.empty()) throw InputError("ultimate error: empty trial");
    const double start = r.time.back() * (1.0 - fraction);
    double acc = 0.0;
    int count = 0;
    for (std::size_t j = 0; j < r.time.size(); ++j) {
      if (r.time[j] >= start) {
        acc += r.weight_error_sq[j];
        ++count;
      }
    }
    per_trial.push_back(acc / count);
  }
  const double n = static_cast<double>(per_trial.size());
  MeanEstimate est;
  for (double v : per_trial) est.mean += v / n;
  double var = 0.0;
  for (double v : per_trial) var += (v - est.mean) * (v - est.mean);
  est.std_error = std::sqrt(var / (n - 1.0) / n);
  return est;
}

double fit_decay_rate(std::span<const double> t, std::span<const double> value) {
  if (t.size() != value.size()) throw InputError("decay fit: series lengths differ");
  if (t.size() < 2) throw InputError("decay fit: need at least two points");
  double mt = 0.0, my = 0.0;
  std::vector<double> logs(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!(value[i] > 0.0)) throw InputError("decay fit: values must be strictly positive");
    logs[i] = std::log(value[i]);
    mt += t[i];
    my += logs[i];
  }
  const double n = static_cast<double>(t.size());
  mt /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxy += (t[i] - mt) * (logs[i] - my);
    sxx += (t[i] - mt) * (t[i] - mt);
  }
  if (sxx == 0.0) throw InputError("decay fit: time points are all equal");
  return -sxy / sxx;
}

}  // namespace stabrl
