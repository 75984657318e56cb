#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "speechgait/repl.hpp"
#include "speechgait/scenario.hpp"

using namespace speechgait;

namespace {

const std::string kScenarios = SPEECHGAIT_DATA_DIR "/scenarios/";

std::string csv_of(const ScenarioResult& r) {
  std::ostringstream out;
  TelemetryCsvWriter writer(out);
  for (const auto& s : r.samples)
    writer.write(s);
  return out.str();
}

std::string log_of(const ScenarioResult& r) {
  std::string out;
  for (const auto& t : r.transitions)
    out += to_json(t).dump() + "\n";
  return out;
}

std::vector<std::string> visits(const ScenarioResult& r) { return r.summary["fsm_visits"].get<std::vector<std::string>>(); }

} // namespace

TEST(ScenarioFile, RejectsBadInput) {
  EXPECT_THROW(load_scenario(SPEECHGAIT_TEST_DATA_DIR "/unsorted.scn"), ParseError);
  EXPECT_THROW(load_scenario("/nonexistent.scn"), ParseError);
  for (const char* bad : {
           "nope",
           R"({"name":"x","duration":5,"schedule":[],"extra":1})",
           R"({"name":"x","duration":0,"schedule":[]})",
           R"({"name":"x","duration":5})",
           R"({"name":"x","duration":5,"schedule":[{"t":-1,"say":"stand"}]})",
           R"({"name":"x","duration":5,"schedule":[{"t":6,"say":"stand"}]})",
           R"({"name":"x","duration":5,"schedule":[{"t":1}]})",
           R"({"name":"x","duration":5,"schedule":[],"initial_state":"Walking"})",
           R"({"name":"x","duration":5,"schedule":[],"seed":-2})",
       })
    EXPECT_THROW(parse_scenario(bad), ParseError) << bad;
}

TEST(ScenarioFile, ParsesBundled) {
  const auto s = load_scenario(kScenarios + "a_to_b.scn");
  EXPECT_EQ(s.name, "a_to_b");
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.duration, 60.0);
  ASSERT_EQ(s.schedule.size(), 6u);
  EXPECT_EQ(s.schedule[2].say, "robot speed up");
  EXPECT_FALSE(s.initial_state);
}

TEST(ScenarioFile, CommandResolution) {
  const auto v = default_vocabulary();
  EXPECT_EQ(resolve_command("stand", v), Intent::stand);
  EXPECT_EQ(resolve_command("SpeedUp", v), Intent::speed_up);
  EXPECT_EQ(resolve_command("robot speed up", v), Intent::speed_up);
  EXPECT_EQ(resolve_command("walk forward", v), std::nullopt);
}

TEST(RunScenario, AToBVisitsEveryState) {
  const auto r = run_scenario(load_scenario(kScenarios + "a_to_b.scn"), EngineConfig{});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(visits(r), (std::vector<std::string>{"Sitting", "SitToStand", "Standing", "LocomotionInitiation",
                                                 "Walking", "Walking", "Walking", "LocomotionCompletion", "Standing",
                                                 "StandToSit", "Sitting"}));
  EXPECT_EQ(r.summary["rejected"], 0);
  EXPECT_EQ(r.summary["final_state"], "Sitting");
  EXPECT_EQ(r.samples.size(), 6000u);
  EXPECT_NEAR(r.summary["completion_time"].get<double>(), 42.0, 1e-9);
}

TEST(RunScenario, QuiescentStandingDoesNothing) {
  const auto r = run_scenario(load_scenario(kScenarios + "quiescent_standing.scn"), EngineConfig{});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.summary["transitions"], 0);
  EXPECT_EQ(r.summary["clamp_activations"], 0);
  EXPECT_EQ(r.samples.size(), 1000u);
  for (const auto& s : r.samples)
    for (double q : s.q_act)
      ASSERT_EQ(q, 0.0);
}

TEST(RunScenario, RejectionsAreLoggedNotFatal) {
  const auto r = run_scenario(load_scenario(kScenarios + "sit_while_walking.scn"), EngineConfig{});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.summary["rejected"], 2);
  std::vector<std::string> reasons;
  for (const auto& t : r.transitions)
    if (!t.accepted)
      reasons.push_back(t.reason);
  EXPECT_EQ(reasons, (std::vector<std::string>{"no sit edge from Walking", "transition in progress"}));
  EXPECT_EQ(r.summary["final_state"], "Sitting");
}

TEST(RunScenario, MaintainAndUnparsedCommands) {
  const auto r = run_scenario(load_scenario(kScenarios + "steady_walk.scn"), EngineConfig{});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.summary["rejected"], 1);
  ASSERT_EQ(r.summary["unparsed"].size(), 1u);
  EXPECT_EQ(r.summary["unparsed"][0]["say"], "walk forward");
  EXPECT_EQ(r.summary["clamp_activations"], 0);
}

TEST(RunScenario, ByteIdenticalReplay) {
  const auto s = load_scenario(kScenarios + "a_to_b.scn");
  const auto a = run_scenario(s, EngineConfig{});
  const auto b = run_scenario(s, EngineConfig{});
  EXPECT_EQ(csv_of(a), csv_of(b));
  EXPECT_EQ(log_of(a), log_of(b));
  EXPECT_EQ(a.summary.dump(), b.summary.dump());

  ScenarioOptions lat;
  lat.latency = true;
  const auto c = run_scenario(s, EngineConfig{}, lat);
  const auto d = run_scenario(s, EngineConfig{}, lat);
  EXPECT_EQ(csv_of(c), csv_of(d));
  EXPECT_EQ(log_of(c), log_of(d));
  EXPECT_NE(csv_of(a), csv_of(c));
  lat.seed = 8;
  EXPECT_NE(log_of(c), log_of(run_scenario(s, EngineConfig{}, lat)));
}

TEST(RunScenario, LatencyDelaysWithinRange) {
  ScenarioOptions lat;
  lat.latency = true;
  const auto r = run_scenario(load_scenario(kScenarios + "a_to_b.scn"), EngineConfig{}, lat);
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(visits(r).size(), 11u);
  const auto& first = r.transitions.front();
  EXPECT_EQ(first.intent, Intent::stand);
  EXPECT_GE(first.t, 1.5 - 1e-9);
  EXPECT_LE(first.t, 2.0 + 1e-9);
}

TEST(RunScenario, ViolationGivesExitOne) {
  EngineConfig config;
  config.limits.q_max[JointId(Side::left, JointType::knee).index()] = 60.0;
  const auto r = run_scenario(load_scenario(kScenarios + "quiescent_standing.scn"), config,
                              ScenarioOptions{ClockMode::simulation, false, std::nullopt, FsmState::sitting});
  EXPECT_EQ(r.exit_code, 1);
  ASSERT_TRUE(r.first_violation);
  EXPECT_NE(r.first_violation->what.find("left_knee"), std::string::npos);
  EXPECT_FALSE(r.summary["ok"].get<bool>());
}

TEST(RunScenario, WritesArtifacts) {
  const auto dir = std::filesystem::temp_directory_path() / "speechgait_test_artifacts";
  std::filesystem::remove_all(dir);
  const auto r = run_scenario(load_scenario(kScenarios + "quiescent_standing.scn"), EngineConfig{});
  write_scenario_artifacts(r, dir);
  std::ifstream csv(dir / "telemetry.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, telemetry_csv_header());
  int rows = 0;
  for (std::string line; std::getline(csv, line);)
    ++rows;
  EXPECT_EQ(rows, 1000);
  EXPECT_TRUE(std::filesystem::exists(dir / "transitions.ndjson"));
  std::ifstream summary(dir / "summary.json");
  EXPECT_EQ(nlohmann::json::parse(summary)["scenario"], "quiescent_standing");
  std::filesystem::remove_all(dir);
}

TEST(Config, LoadsOverridesAndRejectsUnknownKeys) {
  const auto tight = load_config(SPEECHGAIT_TEST_DATA_DIR "/tight_limits.json");
  EXPECT_EQ(tight.limits.q_max[JointId(Side::right, JointType::knee).index()], 60.0);
  EXPECT_EQ(tight.limits.q_max[JointId(Side::right, JointType::hip).index()], 110.0);

  const auto tampered = load_config(SPEECHGAIT_TEST_DATA_DIR "/tampered_config.json");
  EXPECT_EQ(tampered.gait.coefficients_file,
            (std::filesystem::path(SPEECHGAIT_TEST_DATA_DIR) / "tampered_coefficients.csv").lexically_normal().string());
  EXPECT_THROW(load_coefficients(tampered.gait), ParseError);

  EngineConfig c;
  EXPECT_THROW(apply_config_json(c, nlohmann::json::parse(R"({"cpg":{"speed":1}})")), ConfigError);
  EXPECT_THROW(apply_config_json(c, nlohmann::json::parse(R"({"network":{}})")), ConfigError);
  EXPECT_THROW(apply_config_json(c, nlohmann::json::parse(R"({"limits":{"hip":{"q_mx":1}}})")), ConfigError);
  EXPECT_THROW(apply_config_json(c, nlohmann::json::parse(R"({"plant":{"dt":-1}})")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent.json"), ConfigError);
}

TEST(Config, ResolvedJsonRoundTrips) {
  EngineConfig c;
  c.plant.tau_track = 0.07;
  c.limits.v_max[2] = 150.0;
  c.latency.enabled = true;
  EngineConfig d;
  apply_config_json(d, to_json(c));
  EXPECT_EQ(to_json(c).dump(), to_json(d).dump());
}

namespace {

struct FakeClock {
  double now = 0.0;
  ReplSession::Clock fn() {
    return [this] { return now; };
  }
};

} // namespace

TEST(Repl, Examples) {
  Engine engine{EngineConfig{}};
  FakeClock clock;
  std::ostringstream out;
  ReplSession repl(engine, out, clock.fn());

  EXPECT_TRUE(repl.handle("robot walk"));
  EXPECT_EQ(out.str(), "walk rejected (no walk edge from Sitting), state Sitting\n");
  out.str("");

  EXPECT_TRUE(repl.handle("robot stand up"));
  EXPECT_EQ(out.str(), "stand accepted, state SitToStand\n");
  out.str("");

  EXPECT_TRUE(repl.handle("stand up please"));
  EXPECT_EQ(out.str(), "no intent (gate word 'robot' absent), state SitToStand\n");
  out.str("");

  clock.now = 3.0;
  EXPECT_TRUE(repl.handle("robot dance"));
  EXPECT_EQ(out.str(), "no intent (no phrase matched), state Standing\n");
  EXPECT_NEAR(engine.time(), 3.0, 1e-9);
  out.str("");

  EXPECT_TRUE(repl.handle(":state"));
  EXPECT_EQ(nlohmann::json::parse(out.str())["fsm"], "Standing");
  out.str("");
  EXPECT_TRUE(repl.handle(":bogus"));
  EXPECT_NE(out.str().find("unknown command"), std::string::npos);
  out.str("");
  EXPECT_FALSE(repl.handle(":quit"));
  EXPECT_EQ(out.str(), "bye\n");
}

TEST(Repl, RunsAScript) {
  Engine engine{EngineConfig{}};
  FakeClock clock;
  std::ostringstream out;
  ReplSession repl(engine, out, clock.fn());
  std::istringstream script("robot stand\n:limits\n:q\nrobot sit\n");
  repl.run(script, false);
  const auto text = out.str();
  EXPECT_NE(text.find("stand accepted"), std::string::npos);
  EXPECT_NE(text.find("left_hip"), std::string::npos);
  EXPECT_EQ(text.find("sit "), std::string::npos);
}
