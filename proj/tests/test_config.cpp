#include <gtest/gtest.h>

#include "stabrl/config.hpp"
#include "stabrl/errors.hpp"
#include "stabrl/scenarios.hpp"

using namespace stabrl;

TEST(ConfigParser, SectionsArraysInlineTables) {
  const ConfigValue root = parse_config(R"(# header comment
scenario = "bound-check"   # trailing
seed = 42
plots = true
features = {kind = "list", terms = [[2], [0]]}

[env]
name = "lq_stochastic"
gamma = 1e-1
s = +0.1

[critic.extra]
theta0 = [
  0.5,  # first
  -1_000,
]
)");
  ConfigReader r(root);
  EXPECT_EQ(r.string("scenario"), "bound-check");
  EXPECT_EQ(r.integer("seed", 0), 42);
  EXPECT_TRUE(r.boolean("plots", false));
  EXPECT_EQ(r.string("features.kind", ""), "list");
  EXPECT_EQ(r.int_rows("features.terms"), (std::vector<std::vector<int>>{{2}, {0}}));
  EXPECT_DOUBLE_EQ(r.number("env.gamma"), 0.1);
  EXPECT_DOUBLE_EQ(r.number("env.s"), 0.1);
  EXPECT_EQ(r.numbers("critic.extra.theta0", {}), (std::vector<double>{0.5, -1000.0}));
  EXPECT_EQ(r.number("env.missing", 7.0), 7.0);
  EXPECT_EQ(r.unused(), std::vector<std::string>{"env.name"});
}

TEST(ConfigParser, Whole) {
  const ConfigValue v = parse_config("");
  EXPECT_TRUE(v.is_table());
  EXPECT_TRUE(v.as_table().empty());
}

TEST(ConfigParser, ErrorsCarryLineNumbers) {
  auto message = [](const char* text) {
    try {
      parse_config(text);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("a = 1\nb = \n").find("line 2"), std::string::npos);
  EXPECT_NE(message("a = 1\na = 2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(message("x = \"open\n").find("unterminated"), std::string::npos);
  EXPECT_NE(message("x = [1, 2\n").find("line"), std::string::npos);
  EXPECT_NE(message("x = 1 2\n").find("unexpected"), std::string::npos);
  EXPECT_NE(message("x = nan\n").find("invalid number"), std::string::npos);
  EXPECT_NE(message("[a\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("a = 1\n[a]\n").find("not a table"), std::string::npos);
}

TEST(ConfigReader, TypeErrors) {
  const ConfigValue root = parse_config("a = \"x\"\nb = 1.5\nc = [1, \"y\"]\n");
  ConfigReader r(root);
  EXPECT_THROW(r.number("a"), InputError);
  EXPECT_THROW(r.integer("b", 0), InputError);
  EXPECT_THROW(r.boolean("b", false), InputError);
  EXPECT_THROW(r.numbers("c", {}), InputError);
  EXPECT_THROW(r.string("missing"), InputError);
}

TEST(ScenarioConfig, DefaultsAndOverrides) {
  const ScenarioConfig c = parse_scenario(parse_config(
      "scenario = \"critic-stochastic\"\n[critic]\nalpha = 20\n[integrator]\nT = 3\n"));
  EXPECT_EQ(c.scenario, "critic-stochastic");
  EXPECT_EQ(c.alpha, 20.0);
  EXPECT_EQ(c.horizon, 3.0);
  EXPECT_EQ(c.buffer_size, scenario_defaults("critic-stochastic").buffer_size);
  EXPECT_EQ(c.env, "lq_stochastic");
}

TEST(ScenarioConfig, AdaptiveHorizonFollowsGain) {
  const ScenarioConfig c =
      parse_scenario(parse_config("scenario = \"adaptive-baseline\"\n[adaptive]\nK = 4\n"));
  EXPECT_DOUBLE_EQ(c.horizon, 5.0);
}

TEST(ScenarioConfig, Rejections) {
  auto parse = [](const std::string& text) { return parse_scenario(parse_config(text)); };
  EXPECT_THROW(parse("scenario = \"nope\"\n"), InputError);
  EXPECT_THROW(parse("seed = 1\n"), InputError);
  EXPECT_THROW(parse("scenario = \"bound-check\"\n[integrator]\ndt = -0.001\n"), InputError);
  EXPECT_THROW(parse("scenario = \"bound-check\"\n[critic]\nalhpa = 3\n"), InputError);
  EXPECT_THROW(parse("scenario = \"bound-check\"\n[trials]\ncount = 10\n"), InputError);
  EXPECT_THROW(parse("scenario = \"bound-check\"\n[critic]\nalpha = 1000\n"), InputError);
  EXPECT_THROW(parse("scenario = \"counterexample-audit\"\n[policy]\nK = 0\n"), InputError);
  EXPECT_THROW(parse("scenario = \"adaptive-baseline\"\n[env]\nname = \"counterexample\"\n"), InputError);
  EXPECT_THROW(parse("scenario = \"eq45-witness\"\n[env]\ng = \"tan\"\n"), InputError);
}

TEST(ScenarioConfig, ReferenceMentionsEverySection) {
  const std::string ref = config_reference();
  for (const char* key : {"[env]", "[policy]", "[features]", "[critic]", "[integrator]",
                          "[trials]", "[audit]", "[adaptive]", "seed", "plots", "threads"}) {
    EXPECT_NE(ref.find(key), std::string::npos) << key;
  }
}
