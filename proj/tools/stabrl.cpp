#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "stabrl/errors.hpp"
#include "stabrl/scenarios.hpp"

namespace {

enum Exit { kOk = 0, kChecksFailed = 1, kUsage = 2, kDiverged = 3, kIo = 4 };

int print_list() {
  for (const auto& s : stabrl::list_scenarios()) {
    std::string outputs;
    for (const auto& f : s.outputs) outputs += (outputs.empty() ? "" : ", ") + f;
    fmt::print("{:<22} {}\n{:<22} outputs: {}\n", s.name, s.description, "", outputs);
  }
  return kOk;
}

int do_validate(const std::string& path) {
  const stabrl::ScenarioConfig c = stabrl::load_scenario(path);
  fmt::print("{}: ok (scenario {}, out {})\n", path, c.scenario, c.out_dir);
  return kOk;
}

int do_run(const std::string& path, bool plots, std::optional<std::uint64_t> seed,
           const std::string& out) {
  stabrl::ScenarioConfig c = stabrl::load_scenario(path);
  if (plots) c.plots = true;
  if (seed) c.seed = *seed;
  if (!out.empty()) c.out_dir = out;
  const stabrl::ScenarioResult r = stabrl::run_scenario(c);
  for (const auto& check : r.checks) {
    fmt::print("{} {}: {}\n", check.pass ? "PASS" : "FAIL", check.name, check.detail);
  }
  if (r.diverged) fmt::print(stderr, "diverged: {} (see {}/diagnostic.txt)\n", r.diagnostic, r.out_dir.string());
  fmt::print("{} {} -> {}\n", r.pass() ? "ok" : "failed", r.scenario, r.out_dir.string());
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability audit and critic convergence experiments"};
  app.footer("\nExit status: 0 checks pass, 1 a check failed, 2 usage or config error, "
             "3 numerical divergence, 4 output not writable.\n\n" +
             stabrl::config_reference());
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a scenario file");
  std::string run_path, out;
  bool plots = false;
  std::optional<std::uint64_t> seed;
  run->add_option("config", run_path, "scenario file")->required();
  run->add_flag("--plots", plots, "also write SVG plots");
  run->add_option("--seed", seed, "override the base seed");
  run->add_option("--out", out, "override the output directory");

  auto* list = app.add_subcommand("list", "list the available scenarios");

  auto* check = app.add_subcommand("validate", "parse and validate a scenario file");
  std::string check_path;
  check->add_option("config", check_path, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*list) return print_list();
    if (*check) return do_validate(check_path);
    return do_run(run_path, plots, seed, out);
  } catch (const stabrl::IoError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kIo;
  } catch (const stabrl::DivergenceError& e) {
    fmt::print(stderr, "diverged: {}\n", e.what());
    return kDiverged;
  } catch (const stabrl::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  }
}
