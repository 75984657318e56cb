#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "speechgait/config.hpp"
#include "speechgait/engine.hpp"
#include "speechgait/errors.hpp"
#include "speechgait/intent.hpp"
#include "speechgait/telemetry.hpp"

namespace speechgait {

struct ScheduledCommand {
  double t = 0.0;
  std::string say; ///< intent name, or an utterance for the keyword parser
};

/// {"name", "seed", "duration", "schedule": [{"t", "say"}], "initial_state"?}
struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  double duration = 0.0;
  std::vector<ScheduledCommand> schedule;
  std::optional<FsmState> initial_state;
};

inline Scenario parse_scenario(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ParseError("scenario must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "name" && key != "seed" && key != "duration" && key != "schedule" && key != "initial_state")
      throw ParseError("unknown scenario key '" + key + "'");

  Scenario s;
  if (!j.contains("name") || !j["name"].is_string())
    throw ParseError("scenario needs a string 'name'");
  s.name = j["name"].get<std::string>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw ParseError("scenario 'seed' must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (!j.contains("duration") || !j["duration"].is_number() || !(j["duration"].get<double>() > 0.0))
    throw ParseError("scenario needs a positive 'duration'");
  s.duration = j["duration"].get<double>();
  if (j.contains("initial_state")) {
    const auto state = j["initial_state"].is_string() ? parse_fsm_state(j["initial_state"].get<std::string>())
                                                      : std::nullopt;
    if (!state || (*state != FsmState::sitting && *state != FsmState::standing))
      throw ParseError("scenario 'initial_state' must be \"Sitting\" or \"Standing\"");
    s.initial_state = state;
  }
  if (!j.contains("schedule") || !j["schedule"].is_array())
    throw ParseError("scenario needs a 'schedule' array");
  std::size_t index = 0;
  for (const auto& entry : j["schedule"]) {
    ++index;
    const std::string where = "schedule entry " + std::to_string(index);
    if (!entry.is_object() || !entry.contains("t") || !entry["t"].is_number() || !entry.contains("say") ||
        !entry["say"].is_string())
      throw ParseError(where + " needs a numeric 't' and a string 'say'");
    ScheduledCommand cmd{entry["t"].get<double>(), entry["say"].get<std::string>()};
    if (!(cmd.t >= 0.0) || !std::isfinite(cmd.t))
      throw ParseError(where + " has a negative or non-finite time");
    if (!s.schedule.empty() && cmd.t < s.schedule.back().t)
      throw ParseError(where + " is out of order; schedule must be sorted by t");
    if (cmd.t > s.duration)
      throw ParseError(where + " lies beyond the scenario duration");
    s.schedule.push_back(std::move(cmd));
  }
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open scenario '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

/// Resolves a scheduled command: an exact intent name first, then the keyword parser.
inline std::optional<Intent> resolve_command(const std::string& say, const Vocabulary& vocabulary) {
  if (auto intent = parse_intent_name(say); intent && tokenize(say).size() <= 1)
    return intent;
  return parse(say, vocabulary);
}

/// Feeds scheduled commands into the engine when their time comes.
class ScheduleSource {
public:
  ScheduleSource(const std::vector<ScheduledCommand>& schedule, Vocabulary vocabulary = default_vocabulary())
      : schedule_(schedule), vocabulary_(std::move(vocabulary)) {}

  void operator()(Engine& engine) {
    const double now = engine.time() + 1e-9;
    while (next_ < schedule_.size() && schedule_[next_].t <= now) {
      const auto& cmd = schedule_[next_++];
      if (auto intent = resolve_command(cmd.say, vocabulary_))
        engine.submit(*intent);
      else
        unparsed_.push_back(cmd);
    }
  }

  const std::vector<ScheduledCommand>& unparsed() const noexcept { return unparsed_; }

private:
  const std::vector<ScheduledCommand>& schedule_;
  Vocabulary vocabulary_;
  std::size_t next_ = 0;
  std::vector<ScheduledCommand> unparsed_;
};

struct ScenarioOptions {
  ClockMode mode = ClockMode::simulation;
  bool latency = false;                ///< force latency simulation on
  std::optional<std::uint64_t> seed;   ///< overrides the scenario seed
  std::optional<FsmState> initial_state;
};

struct ScenarioResult {
  nlohmann::json summary;
  int exit_code = 0;
  std::optional<InvariantViolation> first_violation;
  std::vector<TelemetrySample> samples;
  std::vector<TransitionRecord> transitions;
};

namespace detail {

inline nlohmann::json per_joint_json(const JointArray<double>& values) {
  nlohmann::json out = nlohmann::json::object();
  for (JointId joint : kAllJoints)
    out[joint_name(joint)] = values[joint.index()];
  return out;
}

} // namespace detail

/// Runs a scenario to completion and collects telemetry, the transition log
/// and a summary. Exit code 0 means no invariant violation, 1 otherwise.
inline ScenarioResult run_scenario(const Scenario& scenario, EngineConfig config, const ScenarioOptions& options = {}) {
  config.latency.seed = options.seed.value_or(scenario.seed);
  if (options.latency)
    config.latency.enabled = true;
  if (options.initial_state)
    config.plant.initial_state = *options.initial_state;
  else if (scenario.initial_state)
    config.plant.initial_state = *scenario.initial_state;

  Engine engine(config);
  ScheduleSource source(scenario.schedule);
  ScenarioResult result;
  std::vector<std::string> visits = {std::string(to_string(engine.planner().fsm))};
  std::optional<double> completion;
  std::size_t transitions = 0;
  std::size_t rejected = 0;

  bool diverged = false;
  try {
    run_loop(
        engine, source,
        [&](const TickOutput& out) {
          result.samples.push_back(out.sample);
          for (const auto& r : out.transitions) {
            result.transitions.push_back(r);
            if (!r.accepted) {
              ++rejected;
              continue;
            }
            ++transitions;
            visits.emplace_back(to_string(r.to));
            completion = r.t;
          }
        },
        LoopOptions{options.mode, scenario.duration, nullptr});
  } catch (const DivergenceError&) {
    diverged = true;
  }

  const auto& d = engine.diagnostics();
  nlohmann::json clamp_counts = nlohmann::json::object();
  for (JointId joint : kAllJoints)
    clamp_counts[joint_name(joint)] = {{"angle", d.angle_clamps[joint.index()]}, {"rate", d.rate_clamps[joint.index()]}};
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : d.violations)
    violations.push_back({{"t", v.t}, {"what", v.what}});
  nlohmann::json unparsed = nlohmann::json::array();
  for (const auto& cmd : source.unparsed())
    unparsed.push_back({{"t", cmd.t}, {"say", cmd.say}});

  result.summary = {
      {"scenario", scenario.name},
      {"seed", config.latency.seed},
      {"duration", scenario.duration},
      {"ticks", engine.tick_index()},
      {"initial_state", visits.front()},
      {"final_state", std::string(to_string(engine.planner().fsm))},
      {"completion_time", completion ? nlohmann::json(*completion) : nlohmann::json()},
      {"fsm_visits", visits},
      {"transitions", transitions},
      {"rejected", rejected},
      {"unparsed", unparsed},
      {"clamp_activations", d.clamp_ticks},
      {"clamp_activations_per_joint", clamp_counts},
      {"max_joint_velocity", detail::per_joint_json(d.max_velocity)},
      {"max_gait_step", detail::per_joint_json(d.max_gait_step)},
      {"gait_rate_excess_ticks", d.gait_rate_excess_ticks},
      {"first_gait_rate_excess", d.first_gait_rate_excess ? nlohmann::json(*d.first_gait_rate_excess) : nlohmann::json()},
      {"overruns", d.overruns},
      {"invariant_violations", violations},
      {"ok", d.violations.empty() && !diverged},
  };
  if (!d.violations.empty())
    result.first_violation = d.violations.front();
  result.exit_code = d.violations.empty() && !diverged ? 0 : 1;
  return result;
}

/// Writes telemetry.csv, transitions.ndjson and summary.json into `dir`.
inline void write_scenario_artifacts(const ScenarioResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "telemetry.csv", std::ios::binary);
    TelemetryCsvWriter writer(csv);
    for (const auto& s : result.samples)
      writer.write(s);
  }
  {
    std::ofstream log(dir / "transitions.ndjson", std::ios::binary);
    for (const auto& r : result.transitions)
      log << to_json(r).dump() << '\n';
  }
  std::ofstream summary(dir / "summary.json", std::ios::binary);
  summary << result.summary.dump(2) << '\n';
}

} // namespace speechgait
