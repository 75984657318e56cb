// speechgait: operator entry point.
//
//   speechgait run <scenario.scn> [--out DIR]
//   speechgait repl
//   speechgait eval <corpus.tsv>
//   speechgait serve [--duration S]
//   speechgait export-gait [--out DIR]
//
// Global flags: --config <path> --json --realtime --latency --seed <n>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>

#include <CLI11.hpp>

#include "speechgait/config.hpp"
#include "speechgait/corpus.hpp"
#include "speechgait/repl.hpp"
#include "speechgait/scenario.hpp"
#include "speechgait/transport.hpp"

namespace sg = speechgait;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitParse = 2;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct Globals {
  std::string config_path;
  bool json = false;
  bool realtime = false;
  bool latency = false;
  std::optional<std::uint64_t> seed;
};

sg::EngineConfig resolve_config(const Globals& g) {
  sg::EngineConfig config = g.config_path.empty() ? sg::EngineConfig{} : sg::load_config(g.config_path);
  if (g.latency)
    config.latency.enabled = true;
  if (g.seed)
    config.latency.seed = *g.seed;
  config.validate();
  sg::load_coefficients(config.gait); // refuse to start on a bad coefficient file
  std::cerr << "resolved config: " << sg::to_json(config).dump() << '\n';
  return config;
}

int cmd_run(const Globals& g, const std::string& path, std::string out_dir) {
  const auto scenario = sg::load_scenario(path);
  auto config = resolve_config(g);
  sg::ScenarioOptions options;
  options.mode = g.realtime ? sg::ClockMode::realtime : sg::ClockMode::simulation;
  options.latency = g.latency;
  options.seed = g.seed;
  if (out_dir.empty())
    out_dir = "out/" + scenario.name;

  const auto result = sg::run_scenario(scenario, config, options);
  sg::write_scenario_artifacts(result, out_dir);
  if (g.json) {
    std::cout << result.summary.dump(2) << '\n';
  } else {
    const auto& s = result.summary;
    std::cout << "scenario " << scenario.name << ": " << s["transitions"] << " transitions, " << s["rejected"]
              << " rejected, " << s["clamp_activations"] << " clamp ticks, artifacts in " << out_dir << '\n';
    std::cout << "visits:";
    for (const auto& v : s["fsm_visits"])
      std::cout << ' ' << v.get<std::string>();
    std::cout << '\n';
  }
  if (result.first_violation) {
    std::cerr << "invariant violation at t=" << result.first_violation->t << ": " << result.first_violation->what
              << '\n';
    return kExitViolation;
  }
  return result.exit_code == 0 ? kExitOk : kExitViolation;
}

int cmd_repl(const Globals& g) {
  sg::Engine engine(resolve_config(g));
  sg::ReplSession session(engine, std::cout, sg::ReplSession::steady_clock());
  std::cout << "speechgait repl, state " << sg::to_string(engine.planner().fsm) << " (:help for commands)\n";
  session.run(std::cin);
  return kExitOk;
}

int cmd_eval(const Globals& g, const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw sg::ParseError("cannot open corpus '" + path + "'");
  const auto corpus = sg::read_corpus(in, sg::default_vocabulary());
  const auto report = sg::evaluate(corpus);
  if (g.json) {
    std::cout << sg::to_json(report, corpus).dump(2) << '\n';
  } else {
    auto name = [](const std::optional<sg::Intent>& k) { return k ? std::string(sg::to_string(*k)) : "-"; };
    for (std::size_t i = 0; i < report.trials.size(); ++i) {
      const auto& s = report.trials[i];
      const auto& t = corpus.entries[i].trial;
      std::cout << "line " << std::setw(3) << s.line << "  WER " << std::fixed << std::setprecision(2) << std::setw(7)
                << s.wer << "%  intent " << name(t.target_intent) << " -> " << name(t.parsed_intent)
                << (s.intent_correct ? "" : "  MISMATCH") << '\n';
    }
    for (const auto& m : corpus.malformed)
      std::cout << "line " << m.line << " malformed: " << m.reason << '\n';
    if (!report.trials.empty())
      std::cout << "trials " << report.trials.size() << "  mean WER " << report.mean_wer << "%  pooled WER "
                << report.pooled_wer << "%  IER " << report.ier << "%\n";
  }
  if (report.trials.empty() && corpus.malformed.empty()) {
    std::cerr << "corpus has no trials\n";
    return kExitParse;
  }
  return corpus.malformed.empty() ? kExitOk : kExitParse;
}

int cmd_serve(const Globals& g, double duration) {
  sg::ServeRuntime runtime(resolve_config(g));
  runtime.start();
  std::cerr << "udp intake on port " << runtime.server().udp_port() << ", ui on port " << runtime.server().ui_port()
            << " (/telemetry /command /state)\n";
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  runtime.run(g_stop, duration, sg::ClockMode::realtime);
  runtime.shutdown();
  const auto& d = runtime.engine().diagnostics();
  std::cerr << "stopped at t=" << runtime.engine().time() << " s, overruns " << d.overruns << ", transport "
            << runtime.server().counters().to_json().dump() << '\n';
  return d.violations.empty() ? kExitOk : kExitViolation;
}

int cmd_export(const Globals& g, const std::string& out_dir) {
  const auto config = resolve_config(g);
  const sg::GaitModel gait(sg::load_coefficients(config.gait), config.gait.sit_stand_period, config.cpg.ramp_period);
  std::filesystem::create_directories(out_dir);

  std::ofstream walk(std::filesystem::path(out_dir) / "walk_stride.csv", std::ios::binary);
  walk << "theta,hip,knee,ankle\n";
  constexpr int kStrideSamples = 360;
  for (int i = 0; i <= kStrideSamples; ++i) {
    const double theta = 2.0 * std::numbers::pi * i / kStrideSamples;
    walk << sg::format_number(theta);
    for (sg::JointType type : {sg::JointType::hip, sg::JointType::knee, sg::JointType::ankle})
      walk << ',' << sg::format_number(sg::walk_angle(gait.table(), sg::JointId(sg::Side::left, type), theta, 1.0, 1.0));
    walk << '\n';
  }

  std::ofstream sts(std::filesystem::path(out_dir) / "sit_to_stand.csv", std::ios::binary);
  sts << "t,hip,knee,ankle\n";
  const auto& profile = gait.sit_to_stand();
  const auto steps = static_cast<int>(std::llround(profile.duration / config.plant.dt));
  for (int i = 0; i <= steps; ++i) {
    const double t = i * config.plant.dt;
    sts << sg::format_number(t);
    for (sg::JointType type : {sg::JointType::hip, sg::JointType::knee, sg::JointType::ankle})
      sts << ',' << sg::format_number(sg::sit_stand_angle(profile, sg::JointId(sg::Side::left, type), t));
    sts << '\n';
  }
  if (g.json)
    std::cout << nlohmann::json{{"walk_stride", (std::filesystem::path(out_dir) / "walk_stride.csv").string()},
                                {"sit_to_stand", (std::filesystem::path(out_dir) / "sit_to_stand.csv").string()}}
                     .dump()
              << '\n';
  else
    std::cout << "wrote walk_stride.csv and sit_to_stand.csv to " << out_dir << '\n';
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech-intent motion planner and exoskeleton simulator"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "engine configuration JSON")->check(CLI::ExistingFile);
  app.add_flag("--json", g.json, "machine-readable output");
  app.add_flag("--realtime", g.realtime, "tick on the wall clock instead of as fast as possible");
  app.add_flag("--latency", g.latency, "simulate the 500-1000 ms speech pipeline delay");
  auto* seed_opt = app.add_option("--seed", seed, "latency RNG seed (overrides the scenario seed)");
  app.fallthrough();

  std::string scenario_path, run_out, corpus_path, export_out = "gait_export";
  double serve_duration = 0.0;
  auto* run = app.add_subcommand("run", "run a scripted scenario");
  run->add_option("scenario", scenario_path, "scenario file (.scn)")->required();
  run->add_option("--out", run_out, "artifact directory (default out/<name>)");
  auto* repl = app.add_subcommand("repl", "interactive text console");
  auto* eval = app.add_subcommand("eval", "WER/IER over a transcript corpus");
  eval->add_option("corpus", corpus_path, "tab-separated corpus file")->required();
  auto* serve = app.add_subcommand("serve", "UDP intake, UI server and real-time loop");
  serve->add_option("--duration", serve_duration, "seconds to run (default: until interrupted)");
  auto* export_gait = app.add_subcommand("export-gait", "write one walk stride and the sit-to-stand profile as CSV");
  export_gait->add_option("--out", export_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitParse;
  }
  if (seed_opt->count() > 0)
    g.seed = seed;

  try {
    if (*run)
      return cmd_run(g, scenario_path, run_out);
    if (*repl)
      return cmd_repl(g);
    if (*eval)
      return cmd_eval(g, corpus_path);
    if (*serve)
      return cmd_serve(g, serve_duration);
    if (*export_gait)
      return cmd_export(g, export_out);
  } catch (const sg::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const sg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitViolation;
  }
  return kExitOk;
}
