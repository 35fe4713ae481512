#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "stabrl/actor.hpp"
#include "stabrl/config.hpp"
#include "stabrl/envs.hpp"
#include "stabrl/features.hpp"
#include "stabrl/lyapunov.hpp"

namespace stabrl {

struct FeatureSpec {
  std::string kind = "list";  // "monomials" | "list"
  int degree = 2;
  bool constant = false;
  std::vector<Exponents> terms;
};

/// One experiment run. `scenario_defaults` fills every field for the chosen
/// scenario; a config file only overrides what it names.
struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  std::string out_dir;
  bool plots = false;
  unsigned threads = 0;

  // [env]
  std::string env;
  std::string g_name = "one";
  LqParams lq;
  std::vector<Exponents> f_terms{{1}};
  std::vector<double> f_coeffs{1.0};
  std::vector<Exponents> g_terms{{0}, {2}};
  std::vector<double> g_coeffs{1.0, 0.5};
  double g_min = 0.5;
  double box = 3.0;

  // [policy]
  std::string policy = "optimal";
  RobustifierParams robustifier{3.0, 1.0};

  FeatureSpec features;

  // [critic]
  double alpha = 1.0;
  std::size_t buffer_size = 10;
  double pe_epsilon = 0.01;
  std::size_t max_draws = 1000;
  std::vector<double> theta0;  // empty: zeros
  double max_warmup = 10.0;
  int sample_every = 1;

  // [integrator]
  double dt = 1e-3;
  double horizon = 20.0;
  std::vector<double> x0;
  int log_every = 1;

  // [trials]
  std::size_t trials = 1;

  // [audit]
  std::vector<double> audit_gains{1.0, 2.0, 2.5, 3.0, 5.0, 10.0};
  double scan_lo = -5.0;
  double scan_hi = 5.0;
  double scan_step = 1e-3;
  double witness_box = 3.0;
  int witness_grid = 61;
  ClaimBounds bounds;
  double witness_min = 1.0;

  // [adaptive]
  double adaptive_gain = 1.0;
  double alpha_f = 1.0;
  double alpha_g = 1.0;
  std::vector<double> theta_f0{0.0};
  std::vector<double> theta_g0{0.8, 0.0};
};

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::vector<std::string> outputs;
};

// Alphabetized registry.
std::vector<ScenarioInfo> list_scenarios();

ScenarioConfig scenario_defaults(const std::string& name);

// Defaults for root["scenario"], then overrides; unknown keys are an error.
ScenarioConfig parse_scenario(const ConfigValue& root);
ScenarioConfig load_scenario(const std::string& path);
void validate(const ScenarioConfig& config);

// Every key with its default, for --help.
std::string config_reference();

// Named input gains g(x) for the counterexample family.
ScalarField named_gain(const std::string& name);

FeatureMap build_features(const FeatureSpec& spec, int state_dim);
EnvModel build_env(const ScenarioConfig& config);
Policy build_policy(const ScenarioConfig& config, const EnvModel& env,
                    const FeatureMap& features, const std::string& kind);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ScenarioResult {
  std::string scenario;
  std::filesystem::path out_dir;
  std::vector<CheckResult> checks;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::string> files;
  bool diverged = false;
  std::string diagnostic;

  bool pass() const;
  // 0 all checks pass, 1 a check failed, 3 numerical divergence.
  int exit_code() const;
  double metric(const std::string& name) const;
};

/// Runs the scenario, writing CSVs, summary.json and (with plots) SVGs into
/// config.out_dir. Throws InputError for bad configs or unwritable output.
ScenarioResult run_scenario(const ScenarioConfig& config);

}  // namespace stabrl
