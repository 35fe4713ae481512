#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "stabrl/config.hpp"
#include "stabrl/errors.hpp"
#include "stabrl/scenarios.hpp"

using namespace stabrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stabrl_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ScenarioConfig config_file(const std::string& name, const fs::path& out) {
  ScenarioConfig c = load_scenario(std::string(STABRL_CONFIG_DIR) + "/" + name + ".toml");
  c.out_dir = out.string();
  return c;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(STABRL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Registry, SixAlphabetizedEntriesWithOutputs) {
  const auto list = list_scenarios();
  ASSERT_EQ(list.size(), 6u);
  for (std::size_t i = 1; i < list.size(); ++i) EXPECT_LT(list[i - 1].name, list[i].name);
  for (const auto& s : list) {
    EXPECT_FALSE(s.description.empty());
    EXPECT_FALSE(s.outputs.empty()) << s.name;
  }
  const auto again = list_scenarios();
  for (std::size_t i = 0; i < list.size(); ++i) EXPECT_EQ(list[i].name, again[i].name);
}

TEST(Scenario, CounterexampleAuditRegionFile) {
  const fs::path out = scratch("audit");
  const ScenarioResult r = run_scenario(config_file("counterexample-audit", out));
  EXPECT_EQ(r.exit_code(), 0);
  const auto lines = csv_lines(out / "region.csv");
  ASSERT_GE(lines.size(), 2u);
  EXPECT_EQ(lines[0], "K,A,lower_root,upper_root,stated_lower,stated_upper,scan_lower,scan_upper,scan_agrees");
  bool found = false;
  for (const auto& line : lines) {
    if (line.rfind("3,1,", 0) == 0) {
      found = true;
      EXPECT_NE(line.find("-2.618"), std::string::npos);
      EXPECT_NE(line.find("-0.381966"), std::string::npos);
      EXPECT_EQ(line.substr(line.size() - 4), "true");
    }
  }
  EXPECT_TRUE(found);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_TRUE(summary["pass"].get<bool>());
}

TEST(Scenario, AdaptiveBaselineDefault) {
  const fs::path out = scratch("adaptive");
  const ScenarioResult r = run_scenario(config_file("adaptive-baseline", out));
  EXPECT_TRUE(r.pass());
  EXPECT_LT(std::abs(r.metric("x_final")), 1e-3);
  EXPECT_LE(r.metric("max_lyapunov_increase"), 1e-6);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  for (const auto& c : summary["checks"]) EXPECT_TRUE(c["pass"].get<bool>()) << c["name"];
}

TEST(Scenario, WitnessAndDeterministicCritic) {
  const fs::path out = scratch("witness");
  EXPECT_EQ(run_scenario(config_file("eq45-witness", out)).exit_code(), 0);
  const fs::path out2 = scratch("critic_det");
  const ScenarioResult r = run_scenario(config_file("critic-deterministic", out2));
  EXPECT_EQ(r.exit_code(), 0);
  EXPECT_GE(r.metric("fitted_rate"), r.metric("required_rate"));
}

TEST(Scenario, FailedCheckGivesExitOne) {
  ScenarioConfig c = config_file("eq45-witness", scratch("witness_fail"));
  c.witness_min = 1e6;
  const ScenarioResult r = run_scenario(c);
  EXPECT_FALSE(r.pass());
  EXPECT_EQ(r.exit_code(), 1);
}

TEST(Scenario, DivergenceWritesDiagnostic) {
  const fs::path out = scratch("diverge");
  ScenarioConfig c = config_file("critic-stochastic", out);
  c.env = "lq_stochastic";
  c.lq.a = 30.0;  // open loop under the zero policy
  c.lq.b = 1.0;
  c.horizon = 50.0;
  c.max_warmup = 50.0;
  c.trials = 2;
  c.x0 = {1.0};
  const ScenarioResult r = run_scenario(c);
  EXPECT_TRUE(r.diverged);
  EXPECT_EQ(r.exit_code(), 3);
  EXPECT_TRUE(fs::exists(out / "diagnostic.txt"));
}

// Same config and seed give byte-identical CSVs.
TEST(Scenario, ByteIdenticalOutputs) {
  ScenarioConfig c = config_file("critic-stochastic", scratch("det_a"));
  c.trials = 4;
  c.horizon = 1.0;
  c.threads = 3;
  run_scenario(c);
  const fs::path a = c.out_dir;
  c.out_dir = scratch("det_b").string();
  c.threads = 1;
  run_scenario(c);
  for (const char* f : {"critic.csv", "comparison.csv"}) {
    const std::string first = slurp(a / f);
    EXPECT_FALSE(first.empty());
    EXPECT_EQ(first, slurp(fs::path(c.out_dir) / f)) << f;
    EXPECT_EQ(first.find('\r'), std::string::npos);
  }
  // 17 significant digits, trailing zeros dropped
  const auto lines = csv_lines(a / "critic.csv");
  std::istringstream row(lines[2]);
  std::size_t longest = 0;
  for (std::string cell; std::getline(row, cell, ',');) {
    std::size_t digits = 0;
    bool leading = true;
    for (char ch : cell.substr(0, cell.find('e'))) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) continue;
      if (leading && ch == '0') continue;
      leading = false;
      ++digits;
    }
    longest = std::max(longest, digits);
  }
  EXPECT_EQ(longest, 17u) << lines[2];
}

TEST(Scenario, UnwritableOutput) {
  const fs::path blocker = scratch("blocker");
  std::ofstream(blocker) << "file";
  ScenarioConfig c = scenario_defaults("eq45-witness");
  c.out_dir = (blocker / "sub").string();
  EXPECT_THROW(run_scenario(c), IoError);
}

TEST(Cli, ExitCodes) {
  const std::string dir = STABRL_CONFIG_DIR;
  const fs::path out = scratch("cli");
  EXPECT_EQ(cli("list"), 0);
  EXPECT_EQ(cli("--help"), 0);
  EXPECT_EQ(cli("validate " + dir + "/bound-check.toml"), 0);
  EXPECT_EQ(cli("run " + dir + "/eq45-witness.toml --out " + out.string() + " --seed 3 --plots"), 0);
  EXPECT_TRUE(fs::exists(out / "witness.csv"));
  EXPECT_EQ(cli("bogus"), 2);
  EXPECT_EQ(cli("run"), 2);
  EXPECT_EQ(cli("run /nonexistent.toml"), 2);

  const fs::path bad = scratch("bad.toml");
  std::ofstream(bad) << "scenario = \"adaptive-baseline\"\n[integrator]\ndt = -1e-4\n";
  EXPECT_EQ(cli("validate " + bad.string()), 2);
  EXPECT_EQ(cli("run " + bad.string()), 2);
  const fs::path unknown = scratch("unknown.toml");
  std::ofstream(unknown) << "scenario = \"mystery\"\n";
  EXPECT_EQ(cli("run " + unknown.string()), 2);

  const fs::path blocker = scratch("cli_blocker");
  std::ofstream(blocker) << "file";
  EXPECT_EQ(cli("run " + dir + "/eq45-witness.toml --out " + (blocker / "x").string()), 4);
}

TEST(Cli, ListIsStable) {
  const fs::path a = scratch("list_a"), b = scratch("list_b");
  ASSERT_EQ(std::system((std::string(STABRL_CLI) + " list > " + a.string()).c_str()), 0);
  ASSERT_EQ(std::system((std::string(STABRL_CLI) + " list > " + b.string()).c_str()), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  std::size_t entries = 0;
  for (const auto& line : csv_lines(a)) entries += line.find("outputs:") != std::string::npos;
  EXPECT_EQ(entries, 6u);
}
