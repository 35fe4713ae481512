#include "stabrl/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "stabrl/convergence.hpp"
#include "stabrl/critic.hpp"
#include "stabrl/errors.hpp"
#include "stabrl/report.hpp"

namespace stabrl {
namespace {

namespace fs = std::filesystem;

const std::vector<ScenarioInfo>& registry() {
  static const std::vector<ScenarioInfo> kRegistry = {
      {"adaptive-baseline",
       "certainty-equivalence adaptive controller on a scalar plant; checks L nonincreasing, "
       "g_hat >= g_min and |x(T)| small",
       {"adaptive.csv", "summary.json"}},
      {"bound-check",
       "Monte Carlo mean-square critic error against the stochastic convergence bound",
       {"trials.csv", "bound_report.csv", "constants.json", "summary.json"}},
      {"counterexample-audit",
       "sign of dL/dt under kappa* + robustifier on the x1 = 0 slice versus the exact root "
       "interval, for several gains",
       {"region.csv", "audit.csv", "summary.json"}},
      {"critic-deterministic",
       "critic learning on the counterexample with a PE-filled replay; fitted decay rate "
       "versus 2 alpha epsilon",
       {"critic.csv", "summary.json"}},
      {"critic-stochastic",
       "critic learning on the stochastic LQ benchmark under a behavior policy versus kappa*; "
       "Z / x^2 along trajectories and ultimate error",
       {"critic.csv", "comparison.csv", "summary.json"}},
      {"eq45-witness",
       "grid search for states where the robustifier raises dL/dt although it was claimed to "
       "lower it",
       {"witness.csv", "summary.json"}},
  };
  return kRegistry;
}

bool is_registered(const std::string& name) {
  const auto& r = registry();
  return std::any_of(r.begin(), r.end(), [&](const ScenarioInfo& i) { return i.name == name; });
}

std::vector<Exponents> to_exponents(const std::vector<std::vector<int>>& rows) {
  return {rows.begin(), rows.end()};
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

struct Run {
  const ScenarioConfig& cfg;
  ScenarioResult& result;

  void check(std::string name, bool pass, std::string detail) {
    result.checks.push_back({std::move(name), pass, std::move(detail)});
  }
  void metric(std::string name, double value) { result.metrics.emplace_back(std::move(name), value); }
  fs::path file(const std::string& name) {
    result.files.push_back(name);
    return result.out_dir / name;
  }
  void plot(const std::string& name, const std::string& title, const std::string& x_label,
            const std::vector<PlotSeries>& series, bool log_y = false) {
    if (cfg.plots) write_line_plot(file(name), title, x_label, series, log_y);
  }
};

// ---- counterexample-audit ----------------------------------------------------

void run_counterexample_audit(Run& run) {
  const ScenarioConfig& cfg = run.cfg;
  const double kBoundaryTol = 2e-3;
  {
    CsvWriter region(run.file("region.csv"),
                     {"K", "A", "lower_root", "upper_root", "stated_lower", "stated_upper",
                      "scan_lower", "scan_upper", "scan_agrees"});
    std::vector<std::pair<double, double>> widths;
    for (double gain : cfg.audit_gains) {
      const RobustifierParams params{gain, cfg.robustifier.offset};
      const PositiveRegion exact = positive_region(gain, params.offset);
      const SliceScan scan = scan_slice(params, cfg.scan_lo, cfg.scan_hi, cfg.scan_step);
      std::size_t mismatches = 0;
      for (std::size_t i = 0; i < scan.x2.size(); ++i) {
        if ((scan.derivative[i] > 0.0) != exact.contains(scan.x2[i])) ++mismatches;
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      bool boundaries_ok;
      double worst = 0.0;
      double scan_lower = nan, scan_upper = nan;
      if (exact.exact) {
        // only roots inside the scanned interval show up as sign changes
        std::vector<double> roots;
        for (double root : {exact.exact->first, exact.exact->second}) {
          if (root > cfg.scan_lo && root < cfg.scan_hi) roots.push_back(root);
        }
        boundaries_ok = scan.boundaries.size() == roots.size();
        for (std::size_t i = 0; boundaries_ok && i < roots.size(); ++i) {
          worst = std::max(worst, std::abs(scan.boundaries[i] - roots[i]));
          (roots[i] == exact.exact->first ? scan_lower : scan_upper) = scan.boundaries[i];
        }
        boundaries_ok = boundaries_ok && worst <= kBoundaryTol;
        widths.emplace_back(gain, exact.width());
      } else {
        boundaries_ok = scan.boundaries.empty();
      }
      const bool agrees = mismatches == 0 && boundaries_ok;
      region.row(std::vector<std::string>{
          format_number(gain), format_number(params.offset),
          format_number(exact.exact ? exact.exact->first : nan),
          format_number(exact.exact ? exact.exact->second : nan),
          format_number(exact.stated_lower), format_number(exact.stated_upper),
          format_number(scan_lower), format_number(scan_upper),
          agrees ? "true" : "false"});
      run.check(fmt::format("region K={}", gain), agrees,
                exact.exact ? fmt::format("exact ({:.6f}, {:.6f}), {} sign mismatches, worst "
                                          "boundary error {:.2e}",
                                          exact.exact->first, exact.exact->second, mismatches, worst)
                            : fmt::format("empty region, {} sign mismatches, {} sign changes",
                                          mismatches, scan.boundaries.size()));
      run.metric(fmt::format("width_K{}", gain), exact.width());
    }
    std::sort(widths.begin(), widths.end());
    bool growing = true;
    for (std::size_t i = 1; i < widths.size(); ++i) growing = growing && widths[i].second > widths[i - 1].second;
    run.check("region grows with K", growing, fmt::format("{} non-empty regions compared", widths.size()));
  }

  // audit report on the slice for the configured gain and g
  const ScalarField g = named_gain(cfg.g_name);
  const SliceScan scan = scan_slice(cfg.robustifier, cfg.scan_lo, cfg.scan_hi, cfg.scan_step);
  CsvWriter audit(run.file("audit.csv"), {"x1", "x2", "minus_x2_sq", "minus_g_sq_x2_sq",
                                          "robustifier", "total", "violated"});
  PlotSeries ldot{"dL/dt on x1 = 0", {}, {}};
  Vector x(2);
  for (double x2 : scan.x2) {
    x << 0.0, x2;
    const LyapDecomposition d = counterexample_decomposition(x, g, cfg.robustifier);
    const ClaimAudit a = audit_claimed_bound(x, g, cfg.robustifier, cfg.bounds);
    audit.row(std::vector<std::string>{format_number(0.0), format_number(x2),
                                       format_number(d.terms[0].value), format_number(d.terms[1].value),
                                       format_number(d.terms[2].value), format_number(d.total),
                                       a.violated ? "true" : "false"});
    ldot.x.push_back(x2);
    ldot.y.push_back(d.total);
  }

  // decomposition closure against the dynamics on random states
  const EnvModel env = make_counterexample(g);
  const Policy policy = make_effective_policy(env.known->optimal_policy, cfg.robustifier);
  const GradientField grad = [](const Vector& y) { return Vector(2.0 * y); };
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> box(-5.0, 5.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    x << box(rng), box(rng);
    const double direct = lyap_derivative(grad, env, x, policy(x));
    const double split = counterexample_decomposition(x, g, cfg.robustifier).total;
    worst = std::max(worst, std::abs(direct - split) / std::max(1.0, std::abs(direct)));
  }
  run.check("decomposition closure", worst <= 1e-10, fmt::format("worst relative gap {:.2e}", worst));
  run.metric("decomposition_gap", worst);
  run.plot("slice.svg", fmt::format("dL/dt on x1 = 0, K = {}, A = {}", cfg.robustifier.gain,
                                    cfg.robustifier.offset),
           "x2", {ldot});
}

// ---- eq45-witness ------------------------------------------------------------

void run_eq45_witness(Run& run) {
  const ScenarioConfig& cfg = run.cfg;
  const ScalarField g = named_gain(cfg.g_name);
  CsvWriter out(run.file("witness.csv"),
                {"x1", "x2", "true_contribution", "claimed_contribution", "violated"});
  std::size_t violations = 0;
  ClaimAudit best;
  best.true_contribution = -std::numeric_limits<double>::infinity();
  Vector x(2);
  const int n = cfg.witness_grid;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      x << -cfg.witness_box + 2.0 * cfg.witness_box * i / (n - 1),
          -cfg.witness_box + 2.0 * cfg.witness_box * j / (n - 1);
      const ClaimAudit a = audit_claimed_bound(x, g, cfg.robustifier, cfg.bounds);
      out.row(std::vector<std::string>{format_number(x[0]), format_number(x[1]),
                                       format_number(a.true_contribution),
                                       format_number(a.claimed_contribution),
                                       a.violated ? "true" : "false"});
      if (a.violated) ++violations;
      if (a.true_contribution > best.true_contribution) best = a;
    }
  }
  Vector probe(2);
  probe << 0.0, -1.0;
  const ClaimAudit at_probe = audit_claimed_bound(probe, g, cfg.robustifier, cfg.bounds);
  run.metric("violations", static_cast<double>(violations));
  run.metric("best_x1", best.x[0]);
  run.metric("best_x2", best.x[1]);
  run.metric("best_contribution", best.true_contribution);
  run.metric("probe_contribution", at_probe.true_contribution);
  run.check("violation found", violations > 0,
            fmt::format("{} of {} grid states have a positive robustifier contribution", violations,
                        n * n));
  run.check("witness strength", best.true_contribution >= cfg.witness_min,
            fmt::format("max contribution {:.6f} at ({:.3f}, {:.3f}); (0, -1) gives {:.6f}",
                        best.true_contribution, best.x[0], best.x[1], at_probe.true_contribution));
}

// ---- adaptive-baseline -------------------------------------------------------

Polynomial polynomial_from(const std::vector<Exponents>& terms, const std::vector<double>& coeffs) {
  std::vector<std::pair<Exponents, double>> t;
  for (std::size_t i = 0; i < terms.size(); ++i) t.emplace_back(terms[i], coeffs[i]);
  return Polynomial(1, std::move(t));
}

void run_adaptive_baseline(Run& run) {
  const ScenarioConfig& cfg = run.cfg;
  const EnvModel env = build_env(cfg);
  AdaptiveControllerState state{FeatureMap::from_terms(1, cfg.f_terms),
                                FeatureMap::from_terms(1, cfg.g_terms),
                                to_vector(cfg.theta_f0),
                                to_vector(cfg.theta_g0),
                                cfg.alpha_f,
                                cfg.alpha_g,
                                cfg.g_min,
                                cfg.box};
  state.validate();
  const Vector theta_f_star = to_vector(cfg.f_coeffs);
  const Vector theta_g_star = to_vector(cfg.g_coeffs);
  const double gain = cfg.adaptive_gain;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));

  std::vector<std::string> header{"t", "x", "u"};
  for (int i = 0; i < state.phi_f.size(); ++i) header.push_back(fmt::format("theta_f_{}", i));
  for (int i = 0; i < state.phi_g.size(); ++i) header.push_back(fmt::format("theta_g_{}", i));
  header.insert(header.end(), {"g_hat_floor", "lyapunov"});
  CsvWriter out(run.file("adaptive.csv"), header);

  double x = cfg.x0.at(0);
  double lyap = adaptive_lyapunov(state, x, theta_f_star, theta_g_star);
  double max_increase = -std::numeric_limits<double>::infinity();
  double floor = state.g_hat_floor();
  std::size_t projections = 0;
  PlotSeries xs{"x", {}, {}}, ls{"L", {}, {}};
  auto log_row = [&](double t, double u) {
    std::vector<double> row{t, x, u};
    for (double v : state.theta_f) row.push_back(v);
    for (double v : state.theta_g) row.push_back(v);
    row.push_back(state.g_hat_floor());
    row.push_back(lyap);
    out.row(row);
    xs.x.push_back(t);
    xs.y.push_back(std::abs(x));
    ls.x.push_back(t);
    ls.y.push_back(lyap);
  };
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const AdaptiveStep step = adaptive_baseline_step(state, x, gain, cfg.dt);
    if (k % static_cast<std::size_t>(cfg.log_every) == 0) log_row(t, step.control);
    const double u = step.control;
    x = step_rk4(env, Vector::Constant(1, x),
                 [u](const Vector&) { return Vector(Vector::Constant(1, u)); }, cfg.dt)[0];
    if (!std::isfinite(x)) throw DivergenceError(fmt::format("adaptive baseline: x non-finite at t = {}", t));
    state = step.next;
    projections += step.projected ? 1 : 0;
    const double next = adaptive_lyapunov(state, x, theta_f_star, theta_g_star);
    max_increase = std::max(max_increase, next - lyap);
    lyap = next;
    floor = std::min(floor, state.g_hat_floor());
  }
  log_row(static_cast<double>(steps) * cfg.dt, (-gain * x - state.f_hat(x)) / std::max(state.g_hat(x), state.g_min));

  run.metric("x_final", x);
  run.metric("max_lyapunov_increase", max_increase);
  run.metric("g_hat_floor_min", floor);
  run.metric("projection_steps", static_cast<double>(projections));
  run.check("lyapunov nonincreasing", max_increase <= 1e-6,
            fmt::format("largest per-step increase {:.3e} (tolerance 1e-6)", max_increase));
  run.check("g_hat bounded away from zero", floor >= cfg.g_min * (1.0 - 1e-12),
            fmt::format("min g_hat on the box {:.15g}, g_min {}", floor, cfg.g_min));
  run.check("state converges", std::abs(x) < 1e-3, fmt::format("|x(T)| = {:.3e}", std::abs(x)));
  run.plot("adaptive.svg", "adaptive baseline", "t", {xs, ls}, true);
}

// ---- critic scenarios ----------------------------------------------------------

TrialSetup build_trial(const ScenarioConfig& cfg, const std::string& policy_kind) {
  TrialSetup s;
  s.env = build_env(cfg);
  s.features = build_features(cfg.features, s.env.state_dim);
  s.behavior = build_policy(cfg, s.env, s.features, policy_kind);
  s.learning_rate = cfg.alpha;
  s.buffer_size = cfg.buffer_size;
  s.dt = cfg.dt;
  s.horizon = cfg.horizon;
  s.x0 = to_vector(cfg.x0);
  s.theta0 = cfg.theta0.empty() ? Vector(Vector::Zero(s.features.size())) : to_vector(cfg.theta0);
  s.pe_threshold = cfg.pe_epsilon;
  s.max_warmup = cfg.max_warmup;
  s.log_every = cfg.log_every;
  s.state_sample_every = cfg.sample_every;
  return s;
}

void write_critic_csv(Run& run, const TrialRecord& rec, int n_features) {
  std::vector<std::string> header{"t"};
  for (int i = 0; i < n_features; ++i) header.push_back(fmt::format("theta_{}", i));
  header.insert(header.end(), {"weight_error_sq", "lambda_min", "abs_z_sum"});
  CsvWriter out(run.file("critic.csv"), header);
  for (std::size_t j = 0; j < rec.time.size(); ++j) {
    std::vector<double> row{rec.time[j]};
    for (double v : rec.theta[j]) row.push_back(v);
    row.insert(row.end(), {rec.weight_error_sq[j], rec.lambda_min[j], rec.buffer_abs_z[j]});
    out.row(row);
  }
}

void fail_on_divergence(Run& run, const std::vector<TrialRecord>& trials, const std::string& label) {
  for (const auto& r : trials) {
    if (r.failed && r.diagnostic.find("non-finite") != std::string::npos) {
      throw DivergenceError(fmt::format("trial seed {}: {}", r.seed, r.diagnostic));
    }
  }
  std::size_t failed = 0;
  std::string first;
  for (const auto& r : trials) {
    if (r.failed) {
      if (failed++ == 0) first = r.diagnostic;
    }
  }
  run.check(fmt::format("trials completed ({} policy)", label), failed == 0,
            failed == 0 ? fmt::format("{} trials", trials.size())
                        : fmt::format("{} of {} failed; first: {}", failed, trials.size(), first));
}

void run_critic_deterministic(Run& run) {
  const ScenarioConfig& cfg = run.cfg;
  const TrialSetup setup = build_trial(cfg, cfg.policy);
  if (!exactly_representable(setup.features, setup.env)) {
    throw InputError("critic-deterministic: value function is not representable by the features");
  }
  OdeTrialResult res;
  try {
    res = run_critic_ode_trial(setup, cfg.pe_epsilon, cfg.max_draws);
  } catch (const ExcitationError& e) {
    run.check("persistence of excitation", false, e.what());
    return;
  }
  const TrialRecord& rec = res.record;
  if (rec.failed) throw DivergenceError(rec.diagnostic);
  write_critic_csv(run, rec, setup.features.size());

  // fit on the part of the curve that is still above round-off
  std::vector<double> t, v;
  for (std::size_t j = 0; j < rec.time.size(); ++j) {
    if (rec.weight_error_sq[j] > 1e-24) {
      t.push_back(rec.time[j]);
      v.push_back(rec.weight_error_sq[j]);
    }
  }
  const double eps = res.realized_epsilon;
  const double required = 0.8 * 2.0 * cfg.alpha * eps;
  run.metric("fill_lambda", res.fill_lambda);
  run.metric("fill_draws", static_cast<double>(res.fill_draws));
  run.metric("realized_epsilon", eps);
  run.metric("initial_error_sq", rec.initial_error_sq);
  run.metric("final_error_sq", rec.weight_error_sq.back());
  run.metric("max_abs_z_sum", *std::max_element(rec.buffer_abs_z.begin(), rec.buffer_abs_z.end()));
  run.check("persistence of excitation", res.fill_lambda >= cfg.pe_epsilon && eps > 0.0,
            fmt::format("filled to lambda_min {:.4g} in {} draws; min during learning {:.4g}",
                        res.fill_lambda, res.fill_draws, eps));
  if (t.size() >= 2) {
    const double rate = fit_decay_rate(t, v);
    run.metric("fitted_rate", rate);
    run.metric("required_rate", required);
    run.check("decay rate", rate >= required,
              fmt::format("fitted {:.4f} >= 0.8 * 2 alpha eps = {:.4f}", rate, required));
  } else {
    run.check("decay rate", false, "weight error already at round-off");
  }
  run.plot("critic.svg", "critic weight error", "t",
           {{"|theta~|^2", rec.time, rec.weight_error_sq}, {"lambda_min", rec.time, rec.lambda_min}},
           true);
}

// Z / x^2 for the LQ benchmark under u = -k x.
double lq_linear_z_ratio(const ScenarioConfig& cfg, const EnvModel& env, const Policy& policy) {
  const LqSolution sol = solve_lq(cfg.lq);
  const double k = -policy(Vector::Constant(1, 1.0))[0];
  static_cast<void>(env);
  return 2.0 * sol.p * (cfg.lq.a - cfg.lq.b * k) + cfg.lq.q + cfg.lq.r * k * k -
         cfg.lq.discount * sol.p;
}

void run_critic_stochastic(Run& run) {
  const ScenarioConfig& cfg = run.cfg;
  if (cfg.env != "lq_stochastic") throw InputError("critic-stochastic: needs env = \"lq_stochastic\"");
  const TrialSetup behavior = build_trial(cfg, cfg.policy);
  const TrialSetup optimal = build_trial(cfg, "optimal");
  const auto trials = run_trials(behavior, cfg.trials, cfg.seed, cfg.threads);
  const auto reference = run_trials(optimal, cfg.trials, cfg.seed, cfg.threads);
  fail_on_divergence(run, trials, cfg.policy);
  fail_on_divergence(run, reference, "optimal");
  if (trials.front().failed) return;
  write_critic_csv(run, trials.front(), behavior.features.size());

  // |Z| / x^2 along every logged state
  const double analytic = std::abs(lq_linear_z_ratio(cfg, behavior.env, behavior.behavior));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t count = 0;
  for (const auto& r : trials) {
    if (r.failed) continue;
    for (std::size_t j = 0; j < r.time.size(); ++j) {
      const double sq = r.state_norm[j] * r.state_norm[j];
      if (sq < 1e-6) continue;
      const double ratio = r.abs_z[j] / sq;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      ++count;
    }
  }
  const double dev = std::max(std::abs(lo - analytic), std::abs(hi - analytic));
  run.metric("z_ratio_analytic", analytic);
  run.metric("z_ratio_min", lo);
  run.metric("z_ratio_max", hi);
  run.check("Z / x^2 along trajectories", count > 0 && dev <= 0.005,
            fmt::format("{} states, ratio in [{:.6f}, {:.6f}], analytic {:.6f}", count, lo, hi, analytic));

  {
    CsvWriter cmp(run.file("comparison.csv"),
                  {"t", "ms_behavior", "se_behavior", "ms_optimal", "se_optimal"});
    const std::size_t points = trials.front().time.size();
    const double n = static_cast<double>(trials.size());
    auto moments = [&](const std::vector<TrialRecord>& set, std::size_t j) {
      double m = 0.0, v = 0.0;
      for (const auto& r : set) m += r.weight_error_sq[j] / n;
      for (const auto& r : set) v += (r.weight_error_sq[j] - m) * (r.weight_error_sq[j] - m);
      return std::make_pair(m, std::sqrt(v / (n - 1.0) / n));
    };
    PlotSeries pb{cfg.policy, {}, {}}, po{"optimal", {}, {}};
    for (std::size_t j = 0; j < points; ++j) {
      const auto [mb, sb] = moments(trials, j);
      const auto [mo, so] = moments(reference, j);
      cmp.row(std::vector<double>{trials.front().time[j], mb, sb, mo, so});
      pb.x.push_back(trials.front().time[j]);
      pb.y.push_back(mb);
      po.x.push_back(trials.front().time[j]);
      po.y.push_back(mo);
    }
    run.plot("comparison.svg", "mean-square critic error", "t", {pb, po}, true);
  }

  const MeanEstimate ub = ultimate_error(trials);
  const MeanEstimate uo = ultimate_error(reference);
  const double se = std::sqrt(ub.std_error * ub.std_error + uo.std_error * uo.std_error);
  run.metric("ultimate_behavior", ub.mean);
  run.metric("ultimate_behavior_se", ub.std_error);
  run.metric("ultimate_optimal", uo.mean);
  run.metric("ultimate_optimal_se", uo.std_error);
  if (cfg.policy != "optimal") {
    run.check("ultimate error depends on policy", ub.mean - uo.mean >= 3.0 * se,
              fmt::format("{} {:.4e} vs optimal {:.4e}, difference {:.1f} standard errors",
                          cfg.policy, ub.mean, uo.mean, (ub.mean - uo.mean) / se));
  }
}

void run_bound_check(Run& run) {
  const ScenarioConfig& cfg = run.cfg;
  const TrialSetup setup = build_trial(cfg, cfg.policy);
  const auto trials = run_trials(setup, cfg.trials, cfg.seed, cfg.threads);
  fail_on_divergence(run, trials, cfg.policy);
  {
    CsvWriter out(run.file("trials.csv"),
                  {"trial", "seed", "t", "weight_error_sq", "lambda_min", "abs_z", "state_norm"});
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const auto& r = trials[i];
      for (std::size_t j = 0; j < r.time.size(); ++j) {
        out.row(std::vector<double>{static_cast<double>(i), static_cast<double>(r.seed), r.time[j],
                                    r.weight_error_sq[j], r.lambda_min[j], r.abs_z[j],
                                    r.state_norm[j]});
      }
    }
  }
  if (!run.result.checks.back().pass) return;

  TheoremConstants c;
  try {
    c = estimate_constants(trials, cfg.alpha, cfg.buffer_size);
  } catch (const ExcitationError& e) {
    run.check("persistence of excitation", false, e.what());
    return;
  }
  {
    nlohmann::ordered_json j;
    j["alpha"] = c.learning_rate;
    j["epsilon"] = c.epsilon;
    j["C"] = c.growth;
    j["X_bar"] = c.fourth_moment;
    j["M"] = c.buffer_size;
    j["D"] = c.d;
    j["X_bar_raw"] = c.fourth_moment_raw;
    j["initial_error_sq"] = trials.front().initial_error_sq;
    std::ofstream out(run.file("constants.json"), std::ios::binary);
    if (!out) throw IoError("cannot write constants.json");
    out << j.dump(2) << '\n';
  }
  const BoundReport rep = check_bound(trials, c);
  {
    CsvWriter out(run.file("bound_report.csv"),
                  {"t", "empirical_ms", "std_error", "sup_root_ms", "envelope", "perturbation",
                   "bound", "margin", "pass"});
    const double initial = trials.front().initial_error_sq;
    for (std::size_t j = 0; j < rep.time.size(); ++j) {
      // the two parts of the bound: decaying initial error and D sup sqrt(ms)
      const double envelope = theorem_bound(c, initial, 0.0, rep.time[j]);
      out.row(std::vector<std::string>{
          format_number(rep.time[j]), format_number(rep.empirical_ms[j]),
          format_number(rep.std_error[j]), format_number(rep.sup_root_ms[j]),
          format_number(envelope), format_number(c.d * rep.sup_root_ms[j]),
          format_number(rep.bound[j]), format_number(rep.margin[j]), rep.pass[j] ? "true" : "false"});
    }
  }
  for (auto [k, v] : std::initializer_list<std::pair<const char*, double>>{
           {"alpha", c.learning_rate}, {"epsilon", c.epsilon}, {"C", c.growth},
           {"X_bar", c.fourth_moment}, {"M", c.buffer_size}, {"D", c.d},
           {"worst_margin", rep.worst_margin}}) {
    run.metric(k, v);
  }
  run.check("PE level positive", c.epsilon > 0.0, fmt::format("epsilon = {:.4g}", c.epsilon));
  run.check("mean-square bound", rep.all_pass,
            fmt::format("{} grid points, worst margin {:.4e}", rep.time.size(), rep.worst_margin));

  // ultimate boundedness: last quarter stays under (D sup sqrt(ms)) * 1.1
  const double t_end = rep.time.back();
  double tail_max = 0.0;
  for (std::size_t j = 0; j < rep.time.size(); ++j) {
    if (rep.time[j] >= 0.75 * t_end) tail_max = std::max(tail_max, rep.empirical_ms[j]);
  }
  const double ceiling = c.d * rep.sup_root_ms.back() * 1.1;
  run.metric("tail_ms_max", tail_max);
  run.check("ultimate boundedness", tail_max <= ceiling,
            fmt::format("tail max {:.4e} <= {:.4e}", tail_max, ceiling));

  run.plot("bound.svg", "mean-square critic error and bound", "t",
           {{"E|theta~|^2", rep.time, rep.empirical_ms}, {"bound", rep.time, rep.bound}}, true);
}

void write_summary(const ScenarioResult& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["pass"] = r.pass();
  j["diverged"] = r.diverged;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["checks"] = checks;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) {
    if (std::isfinite(v)) {
      metrics[k] = v;
    } else {
      metrics[k] = nullptr;
    }
  }
  j["metrics"] = metrics;
  j["files"] = r.files;
  std::ofstream out(r.out_dir / "summary.json", std::ios::binary);
  if (!out) throw IoError("cannot write summary.json");
  out << j.dump(2) << '\n';
}

}  // namespace

std::vector<ScenarioInfo> list_scenarios() { return registry(); }

ScalarField named_gain(const std::string& name) {
  if (name == "one") return [](const Vector&) { return 1.0; };
  if (name == "cos_x1") return [](const Vector& x) { return std::cos(x[0]); };
  if (name == "sin_mix") return [](const Vector& x) { return 1.0 + 0.5 * std::sin(x[0] * x[1]); };
  throw InputError("unknown input gain g = \"" + name + "\" (one, cos_x1, sin_mix)");
}

ScenarioConfig scenario_defaults(const std::string& name) {
  if (!is_registered(name)) throw InputError("unknown scenario '" + name + "'");
  ScenarioConfig c;
  c.scenario = name;
  c.out_dir = "out/" + name;
  if (name == "counterexample-audit" || name == "eq45-witness") {
    c.env = "counterexample";
    c.policy = "optimal_plus_robustifier";
    c.features.terms = {{2, 0}, {0, 2}};
  } else if (name == "adaptive-baseline") {
    c.env = "adaptive_plant";
    c.dt = 1e-4;
    c.horizon = 20.0 / c.adaptive_gain;
    c.x0 = {1.0};
    c.log_every = 100;
    c.features.terms = {{2}};
  } else if (name == "critic-deterministic") {
    c.env = "counterexample";
    c.policy = "optimal";
    c.features.terms = {{2, 0}, {1, 1}, {0, 2}};
    c.alpha = 50.0;
    c.buffer_size = 10;
    c.pe_epsilon = 0.05;
    c.max_draws = 1000;
    c.sample_every = 300;
    c.dt = 1e-3;
    c.horizon = 5.0;
    c.x0 = {1.0, 0.0};
    c.log_every = 10;
  } else {  // critic-stochastic, bound-check
    c.env = "lq_stochastic";
    c.policy = "zero";
    c.features.terms = {{2}, {0}};
    c.alpha = 40.0;
    c.buffer_size = 20;
    c.pe_epsilon = 0.005;
    c.max_warmup = 10.0;
    c.dt = 1e-3;
    c.horizon = 10.0;
    c.x0 = {2.0};
    c.log_every = 10;
    c.trials = name == "bound-check" ? 200 : 100;
  }
  return c;
}

ScenarioConfig parse_scenario(const ConfigValue& root) {
  ConfigReader r(root);
  ScenarioConfig c = scenario_defaults(r.string("scenario"));
  const long seed = r.integer("seed", static_cast<long>(c.seed));
  if (seed < 0) throw InputError("config: seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.out_dir = r.string("out", c.out_dir);
  c.plots = r.boolean("plots", c.plots);
  const long threads = r.integer("threads", c.threads);
  if (threads < 0) throw InputError("config: threads must be non-negative");
  c.threads = static_cast<unsigned>(threads);

  c.env = r.string("env.name", c.env);
  c.g_name = r.string("env.g", c.g_name);
  c.lq.a = r.number("env.a", c.lq.a);
  c.lq.b = r.number("env.b", c.lq.b);
  c.lq.q = r.number("env.q", c.lq.q);
  c.lq.r = r.number("env.r", c.lq.r);
  c.lq.discount = r.number("env.gamma", c.lq.discount);
  c.lq.noise = r.number("env.s", c.lq.noise);
  if (r.has("env.f_terms")) c.f_terms = to_exponents(r.int_rows("env.f_terms"));
  c.f_coeffs = r.numbers("env.f_coeffs", c.f_coeffs);
  if (r.has("env.g_terms")) c.g_terms = to_exponents(r.int_rows("env.g_terms"));
  c.g_coeffs = r.numbers("env.g_coeffs", c.g_coeffs);
  c.g_min = r.number("env.g_min", c.g_min);
  c.box = r.number("env.box", c.box);

  c.policy = r.string("policy.kind", c.policy);
  c.robustifier.gain = r.number("policy.K", c.robustifier.gain);
  c.robustifier.offset = r.number("policy.A", c.robustifier.offset);

  c.features.kind = r.string("features.kind", c.features.kind);
  c.features.degree = static_cast<int>(r.integer("features.degree", c.features.degree));
  c.features.constant = r.boolean("features.constant", c.features.constant);
  if (r.has("features.terms")) c.features.terms = to_exponents(r.int_rows("features.terms"));

  c.alpha = r.number("critic.alpha", c.alpha);
  c.buffer_size = static_cast<std::size_t>(r.integer("critic.M", static_cast<long>(c.buffer_size)));
  c.pe_epsilon = r.number("critic.epsilon", c.pe_epsilon);
  c.max_draws = static_cast<std::size_t>(r.integer("critic.max_draws", static_cast<long>(c.max_draws)));
  c.theta0 = r.numbers("critic.theta0", c.theta0);
  c.max_warmup = r.number("critic.max_warmup", c.max_warmup);
  c.sample_every = static_cast<int>(r.integer("critic.sample_every", c.sample_every));

  c.adaptive_gain = r.number("adaptive.K", c.adaptive_gain);
  c.alpha_f = r.number("adaptive.alpha_f", c.alpha_f);
  c.alpha_g = r.number("adaptive.alpha_g", c.alpha_g);
  c.theta_f0 = r.numbers("adaptive.theta_f0", c.theta_f0);
  c.theta_g0 = r.numbers("adaptive.theta_g0", c.theta_g0);
  if (c.scenario == "adaptive-baseline" && c.adaptive_gain > 0.0) c.horizon = 20.0 / c.adaptive_gain;

  c.dt = r.number("integrator.dt", c.dt);
  c.horizon = r.number("integrator.T", c.horizon);
  c.x0 = r.numbers("integrator.x0", c.x0);
  c.log_every = static_cast<int>(r.integer("integrator.log_every", c.log_every));

  c.trials = static_cast<std::size_t>(r.integer("trials.count", static_cast<long>(c.trials)));

  c.audit_gains = r.numbers("audit.gains", c.audit_gains);
  c.scan_lo = r.number("audit.lo", c.scan_lo);
  c.scan_hi = r.number("audit.hi", c.scan_hi);
  c.scan_step = r.number("audit.step", c.scan_step);
  c.witness_box = r.number("audit.box", c.witness_box);
  c.witness_grid = static_cast<int>(r.integer("audit.grid", c.witness_grid));
  c.bounds.value_grad = r.number("audit.grad_v_bound", c.bounds.value_grad);
  c.bounds.gain = r.number("audit.g_bound", c.bounds.gain);
  c.witness_min = r.number("audit.witness_min", c.witness_min);

  const auto unknown = r.unused();
  if (!unknown.empty()) throw InputError("config: unknown keys: " + join(unknown, ", "));
  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) { return parse_scenario(load_config(path)); }

void validate(const ScenarioConfig& c) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw InputError(std::string("config: ") + what + " must be positive");
  };
  if (!is_registered(c.scenario)) throw InputError("unknown scenario '" + c.scenario + "'");
  if (c.env != "counterexample" && c.env != "lq_stochastic" && c.env != "adaptive_plant") {
    throw InputError("config: unknown env '" + c.env + "'");
  }
  positive(c.dt, "integrator.dt");
  positive(c.horizon, "integrator.T");
  if (c.dt > c.horizon) throw InputError("config: integrator.dt exceeds integrator.T");
  if (c.log_every < 1) throw InputError("config: integrator.log_every must be >= 1");
  positive(c.alpha, "critic.alpha");
  if (c.buffer_size < 1) throw InputError("config: critic.M must be >= 1");
  positive(c.pe_epsilon, "critic.epsilon");
  if (c.sample_every < 1) throw InputError("config: critic.sample_every must be >= 1");
  if (c.max_warmup < 0.0) throw InputError("config: critic.max_warmup must be non-negative");
  c.robustifier.validate();
  positive(c.adaptive_gain, "adaptive.K");
  positive(c.alpha_f, "adaptive.alpha_f");
  positive(c.alpha_g, "adaptive.alpha_g");
  positive(c.g_min, "env.g_min");
  positive(c.box, "env.box");
  positive(c.scan_step, "audit.step");
  if (!(c.scan_hi > c.scan_lo)) throw InputError("config: audit.hi must exceed audit.lo");
  if (c.witness_grid < 2) throw InputError("config: audit.grid must be >= 2");
  positive(c.witness_box, "audit.box");
  for (double k : c.audit_gains) positive(k, "audit.gains entries");
  if (c.f_terms.size() != c.f_coeffs.size() || c.g_terms.size() != c.g_coeffs.size()) {
    throw InputError("config: env.f/g terms and coefficients differ in length");
  }
  if (c.features.kind != "monomials" && c.features.kind != "list") {
    throw InputError("config: features.kind must be \"monomials\" or \"list\"");
  }
  static const char* kPolicies[] = {"optimal", "greedy_from_critic", "zero", "optimal_plus_robustifier"};
  if (std::find(std::begin(kPolicies), std::end(kPolicies), c.policy) == std::end(kPolicies)) {
    throw InputError("config: unknown policy.kind '" + c.policy + "'");
  }
  named_gain(c.g_name);
  if (c.scenario == "bound-check" && c.trials < 100) {
    throw InputError("config: bound-check needs trials.count >= 100");
  }
  if ((c.scenario == "critic-stochastic") && c.trials < 2) {
    throw InputError("config: critic-stochastic needs trials.count >= 2");
  }
  if ((c.scenario == "critic-stochastic" || c.scenario == "bound-check") && c.env != "lq_stochastic") {
    throw InputError("config: " + c.scenario + " runs on env \"lq_stochastic\"");
  }
  if (c.scenario == "adaptive-baseline" && c.env != "adaptive_plant") {
    throw InputError("config: adaptive-baseline runs on env \"adaptive_plant\"");
  }
  if ((c.scenario == "counterexample-audit" || c.scenario == "eq45-witness" ||
       c.scenario == "critic-deterministic") &&
      c.env != "counterexample") {
    throw InputError("config: " + c.scenario + " runs on env \"counterexample\"");
  }
  if (c.scenario == "critic-deterministic" || c.scenario == "critic-stochastic" ||
      c.scenario == "bound-check") {
    if (c.dt * c.alpha * static_cast<double>(c.buffer_size) > 1.0) {
      throw InputError("config: integrator.dt must satisfy dt <= 1 / (critic.alpha * critic.M)");
    }
  }
}

std::string config_reference() {
  const ScenarioConfig d = scenario_defaults("bound-check");
  std::ostringstream os;
  os << "Scenario file keys (defaults depend on the scenario; shown for bound-check unless noted):\n"
        "  scenario = \"<name>\"             required, see `list`\n"
        "  seed = 1                        base seed; trial i uses seed + i\n"
        "  out = \"out/<scenario>\"          output directory (--out overrides)\n"
        "  plots = false                   also write SVG plots (--plots)\n"
        "  threads = 0                     trial workers, 0 = hardware concurrency\n"
        "  [env]\n"
        "    name = \"lq_stochastic\"        counterexample | lq_stochastic | adaptive_plant\n"
        "    g = \"one\"                     counterexample gain: one | cos_x1 | sin_mix\n"
     << "    a = " << d.lq.a << ", b = " << d.lq.b << ", q = " << d.lq.q << ", r = " << d.lq.r
     << ", gamma = " << d.lq.discount << ", s = " << d.lq.noise << "   LQ benchmark\n"
     << "    f_terms = [[1]], f_coeffs = [1]                adaptive plant f(x)\n"
        "    g_terms = [[0], [2]], g_coeffs = [1, 0.5]      adaptive plant g(x)\n"
        "    g_min = 0.5, box = 3                           projection floor and box\n"
        "  [policy]\n"
        "    kind = \"zero\"                 optimal | greedy_from_critic | zero | optimal_plus_robustifier\n"
        "    K = 3, A = 1                  robustifier gains\n"
        "  [features]                      or inline: features = {kind = \"monomials\", degree = 2}\n"
        "    kind = \"list\"                 monomials | list\n"
        "    degree = 2, constant = false  for monomials\n"
        "    terms = [[2], [0]]            exponent rows for list\n"
        "  [critic]\n"
     << "    alpha = " << d.alpha << ", M = " << d.buffer_size << ", epsilon = " << d.pe_epsilon
     << "   learning rate, replay size, PE threshold\n"
     << "    max_draws = 1000              PE fill budget (critic-deterministic)\n"
        "    sample_every = 1              PE fill spacing in steps (critic-deterministic: 300)\n"
        "    max_warmup = 10               time allowed to reach PE (stochastic)\n"
        "    theta0 = []                   initial weights, empty = zeros\n"
        "  [integrator]\n"
     << "    dt = " << d.dt << ", T = " << d.horizon << ", x0 = [2], log_every = " << d.log_every << "\n"
     << "  [trials]\n"
        "    count = 200                   (critic-stochastic: 100)\n"
        "  [audit]\n"
        "    gains = [1, 2, 2.5, 3, 5, 10], lo = -5, hi = 5, step = 0.001\n"
        "    box = 3, grid = 61, grad_v_bound = 1, g_bound = 1, witness_min = 1\n"
        "  [adaptive]\n"
        "    K = 1, alpha_f = 1, alpha_g = 1, theta_f0 = [0], theta_g0 = [0.8, 0]   T defaults to 20 / K\n";
  return os.str();
}

FeatureMap build_features(const FeatureSpec& spec, int state_dim) {
  if (spec.kind == "monomials") return FeatureMap::monomials(state_dim, spec.degree, spec.constant);
  return FeatureMap::from_terms(state_dim, spec.terms);
}

EnvModel build_env(const ScenarioConfig& c) {
  if (c.env == "counterexample") return make_counterexample(named_gain(c.g_name));
  if (c.env == "lq_stochastic") return make_lq_stochastic(c.lq);
  if (c.env == "adaptive_plant") {
    const Polynomial f = polynomial_from(c.f_terms, c.f_coeffs);
    const Polynomial g = polynomial_from(c.g_terms, c.g_coeffs);
    return make_adaptive_plant([f](const Vector& x) { return f.value(x); },
                               [g](const Vector& x) { return g.value(x); }, c.g_min, c.box);
  }
  throw InputError("unknown env '" + c.env + "'");
}

Policy build_policy(const ScenarioConfig& c, const EnvModel& env, const FeatureMap& features,
                    const std::string& kind) {
  if (kind == "zero") {
    return [m = env.control_dim](const Vector&) { return Vector(Vector::Zero(m)); };
  }
  if (!env.known) throw UnsupportedError("policy '" + kind + "' needs a model with known value");
  if (kind == "optimal") return env.known->optimal_policy;
  if (kind == "optimal_plus_robustifier") return make_effective_policy(env.known->optimal_policy, c.robustifier);
  if (kind == "greedy_from_critic") {
    const Vector theta = c.theta0.empty() ? ideal_weights(features, env) : to_vector(c.theta0);
    return make_greedy_policy(theta, features, env);
  }
  throw InputError("unknown policy '" + kind + "'");
}

bool ScenarioResult::pass() const {
  if (diverged || checks.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

int ScenarioResult::exit_code() const {
  if (diverged) return 3;
  return pass() ? 0 : 1;
}

double ScenarioResult::metric(const std::string& name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  throw InputError("scenario result: no metric '" + name + "'");
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  validate(config);
  ScenarioResult result;
  result.scenario = config.scenario;
  result.out_dir = config.out_dir;
  std::error_code ec;
  fs::create_directories(result.out_dir, ec);
  if (ec || !fs::is_directory(result.out_dir)) {
    throw IoError("cannot create output directory '" + config.out_dir + "'");
  }
  Run run{config, result};
  try {
    if (config.scenario == "counterexample-audit") {
      run_counterexample_audit(run);
    } else if (config.scenario == "eq45-witness") {
      run_eq45_witness(run);
    } else if (config.scenario == "adaptive-baseline") {
      run_adaptive_baseline(run);
    } else if (config.scenario == "critic-deterministic") {
      run_critic_deterministic(run);
    } else if (config.scenario == "critic-stochastic") {
      run_critic_stochastic(run);
    } else {
      run_bound_check(run);
    }
  } catch (const DivergenceError& e) {
    result.diverged = true;
    result.diagnostic = e.what();
    std::ofstream diag(result.out_dir / "diagnostic.txt", std::ios::binary);
    diag << config.scenario << ": " << e.what() << '\n';
    result.files.push_back("diagnostic.txt");
  }
  result.files.push_back("summary.json");
  write_summary(result);
  return result;
}

}  // namespace stabrl
