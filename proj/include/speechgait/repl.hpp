#pragma once

#include <chrono>
#include <functional>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "speechgait/engine.hpp"
#include "speechgait/intent.hpp"

namespace speechgait {

/// Line-oriented operator console. Before each line the engine catches up
/// with the session clock; a parsed intent is then submitted and the engine
/// ticks until the planner has answered it.
class ReplSession {
public:
  using Clock = std::function<double()>; ///< seconds since the session started

  ReplSession(Engine& engine, std::ostream& out, Clock clock, Vocabulary vocabulary = default_vocabulary())
      : engine_(engine), out_(out), clock_(std::move(clock)), vocabulary_(std::move(vocabulary)) {}

  static Clock steady_clock() {
    const auto start = std::chrono::steady_clock::now();
    return [start] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  }

  /// Returns false once the session should end.
  bool handle(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
      line.remove_prefix(1);
    catch_up();
    if (line.empty())
      return true;
    if (line.front() == ':')
      return meta(line);

    const auto outcome = parse_detailed(line, vocabulary_);
    if (!outcome.intent) {
      out_ << (outcome.gate_present ? "no intent (no phrase matched)" : "no intent (gate word 'robot' absent)")
           << ", state " << to_string(engine_.planner().fsm) << '\n';
      return true;
    }
    out_ << to_string(*outcome.intent);
    const auto record = deliver(*outcome.intent);
    if (!record)
      out_ << " pending";
    else if (record->accepted)
      out_ << " accepted";
    else
      out_ << " rejected (" << record->reason << ')';
    out_ << ", state " << to_string(engine_.planner().fsm) << '\n';
    return true;
  }

  void run(std::istream& in, bool prompt = true) {
    std::string line;
    while (true) {
      if (prompt)
        out_ << "> " << std::flush;
      if (!std::getline(in, line) || !handle(line))
        break;
    }
  }

private:
  void catch_up() {
    const double now = clock_();
    while (engine_.time() + engine_.dt() <= now + 1e-9)
      engine_.tick();
  }

  std::optional<TransitionRecord> deliver(Intent intent) {
    engine_.submit(intent);
    // bounded by the largest configured latency plus one tick
    const auto& latency = engine_.config().latency;
    const double horizon = (latency.enabled ? latency.max_ms / 1000.0 : 0.0) + 2.0 * engine_.dt();
    const double until = engine_.time() + horizon;
    while (engine_.time() < until) {
      const auto out = engine_.tick();
      for (const auto& r : out.transitions)
        if (r.intent && *r.intent == intent)
          return r;
    }
    return std::nullopt;
  }

  bool meta(std::string_view command) {
    if (command == ":quit" || command == ":q") {
      out_ << "bye\n";
      return false;
    }
    if (command == ":state") {
      out_ << engine_.snapshot().dump() << '\n';
    } else if (command == ":limits") {
      const auto& limits = engine_.planner().limits;
      for (JointId joint : kAllJoints) {
        const auto i = joint.index();
        out_ << std::left << std::setw(12) << joint_name(joint) << " q [" << limits.q_min[i] << ", "
             << limits.q_max[i] << "] deg, v_max " << limits.v_max[i] << " deg/s\n";
      }
    } else if (command == ":help") {
      out_ << "type an utterance (e.g. 'robot stand up'), or :state, :limits, :quit\n";
    } else {
      out_ << "unknown command " << command << " (try :help)\n";
    }
    return true;
  }

  Engine& engine_;
  std::ostream& out_;
  Clock clock_;
  Vocabulary vocabulary_;
};

} // namespace speechgait
