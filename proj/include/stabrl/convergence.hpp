#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stabrl/critic.hpp"
#include "stabrl/envs.hpp"
#include "stabrl/features.hpp"

namespace stabrl {

// Everything one critic-learning run needs. The model must carry a known
// value so that the weight error and Z can be measured.
struct TrialSetup {
  EnvModel env;
  FeatureMap features = FeatureMap::monomials(1, 2);
  Policy behavior;
  double learning_rate = 1.0;
  std::size_t buffer_size = 10;
  double dt = 1e-3;
  double horizon = 10.0;
  Vector x0;
  Vector theta0;
  // Learning starts once the full buffer first reaches lambda_min >= pe_threshold;
  // the warm-up before that may last at most max_warmup time units.
  double pe_threshold = 1e-3;
  double max_warmup = 10.0;
  int log_every = 1;           // keep every n-th grid point in the series
  int state_sample_every = 1;  // deterministic PE fill: sample spacing in steps
};

struct TrialRecord {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string diagnostic;
  std::vector<double> time;  // measured from the start of learning
  std::vector<double> weight_error_sq;
  std::vector<double> lambda_min;
  std::vector<double> abs_z;       // |Z| at the live sample
  std::vector<double> state_norm;  // |X_t|
  std::vector<Vector> theta;
  std::vector<double> buffer_abs_z;  // sum_k |Z_k| over the replay buffer
  // Taken over every integration step, not only the logged ones.
  double warmup_time = 0.0;              // simulated time before learning started
  double warmup_max_state_norm = 0.0;    // max |x| seen during warm-up
  double min_lambda_after_warmup = 0.0;  // over the learning phase
  double max_z_ratio = 0.0;              // max |Z| / |x|^2
  double initial_error_sq = 0.0;
};

void validate(const TrialSetup& setup);

/// Joint Euler-Maruyama (state) and explicit-Euler (critic) integration
/// under the behavior policy. The buffer observes every step. During warm-up
/// the critic is frozen and nothing is logged; once the buffer is
/// persistently exciting the clock restarts at 0 and learning runs for
/// `horizon`. Divergence, or never reaching excitation, marks the record
/// failed instead of throwing.
TrialRecord run_critic_sde_trial(const TrialSetup& setup, std::uint64_t seed);

// Trials seeded base_seed + i. Runs on `threads` workers (0: hardware).
std::vector<TrialRecord> run_trials(const TrialSetup& setup, std::size_t count,
                                    std::uint64_t base_seed, unsigned threads = 0);

struct OdeTrialResult {
  TrialRecord record;
  double fill_lambda = 0.0;      // lambda_min when push_until_pe returned
  std::size_t fill_draws = 0;
  double realized_epsilon = 0.0;  // min lambda_min during learning
};

/// Deterministic counterpart: the behavior closed loop is integrated with
/// RK4; the replay buffer is first filled with push_until_pe (states taken
/// every `state_sample_every` steps), then learning runs for `horizon`.
OdeTrialResult run_critic_ode_trial(const TrialSetup& setup, double epsilon,
                                    std::size_t max_draws);

struct TheoremConstants {
  double learning_rate = 0.0;   // alpha
  double epsilon = 0.0;         // realized PE level
  double growth = 0.0;          // C, |Z| <= C |x|^2
  double fourth_moment = 0.0;   // X-bar, E|X_t|^4 <= X-bar^2
  double fourth_moment_raw = 0.0;  // X-bar before inflation
  double buffer_size = 0.0;     // M
  double d = 0.0;               // M C X-bar / 2
};

/// C = 1.05 max |Z|/|x|^2, X-bar = 1.5 sqrt(max_t mean |X_t|^4),
/// epsilon = min lambda_min after warm-up. Warm-up states enter X-bar through
/// mean_i sup |X|^4, an upper bound on their fourth moment. Needs >= 30 trials.
TheoremConstants estimate_constants(const std::vector<TrialRecord>& trials,
                                    double learning_rate, std::size_t buffer_size);

// e^{-alpha eps t} |theta~(0)|^2 + D sup_root_ms
double theorem_bound(const TheoremConstants& constants, double initial_error_sq,
                     double sup_root_ms, double t);

struct BoundReport {
  std::vector<double> time;  // measured from the start of learning
  std::vector<double> empirical_ms;
  std::vector<double> std_error;
  std::vector<double> sup_root_ms;
  std::vector<double> bound;
  std::vector<double> margin;  // bound + 3 SE - empirical
  std::vector<bool> pass;
  bool all_pass = true;
  double worst_margin = 0.0;
};

/// Mean-square weight error against the bound at every logged grid point,
/// with sup_root_ms the running supremum of the empirical curve. Needs >= 100 trials.
BoundReport check_bound(const std::vector<TrialRecord>& trials,
                        const TheoremConstants& constants);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Per-trial average of |theta~|^2 over the last `fraction` of the horizon,
// then mean and standard error across trials.
MeanEstimate ultimate_error(const std::vector<TrialRecord>& trials, double fraction = 0.25);

// Negated least-squares slope of log(value) against t.
double fit_decay_rate(std::span<const double> t, std::span<const double> value);

}  // namespace stabrl
