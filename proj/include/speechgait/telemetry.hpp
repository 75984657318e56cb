#pragma once

#include <array>
#include <charconv>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "speechgait/joints.hpp"
#include "speechgait/plant.hpp"

namespace speechgait {

/// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string format_number(double value) {
  std::array<char, 32> buffer{};
  const auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  return ec == std::errc() ? std::string(buffer.data(), end) : std::string("nan");
}

inline std::string telemetry_csv_header() {
  std::string header = "t,fsm,intent,omega,r,lambda";
  for (JointId joint : kAllJoints) {
    const auto name = joint_name(joint);
    header += "," + name + "_des," + name + "_act," + name + "_vel";
  }
  return header;
}

inline std::string telemetry_csv_row(const TelemetrySample& s) {
  std::string row = format_number(s.t);
  row += ',';
  row += to_string(s.fsm);
  row += ',';
  row += s.last_intent ? std::string(to_string(*s.last_intent)) : std::string("-");
  for (double v : {s.omega, s.r, s.lambda}) {
    row += ',';
    row += format_number(v);
  }
  for (std::size_t i = 0; i < kJointCount; ++i) {
    row += ',' + format_number(s.q_des[i]);
    row += ',' + format_number(s.q_act[i]);
    row += ',' + format_number(s.q_dot[i]);
  }
  return row;
}

inline nlohmann::json to_json(const TelemetrySample& s) {
  auto per_joint = [](const JointArray<double>& values) {
    nlohmann::json out = nlohmann::json::object();
    for (JointId joint : kAllJoints)
      out[joint_name(joint)] = values[joint.index()];
    return out;
  };
  return {{"t", s.t},
          {"q_des", per_joint(s.q_des)},
          {"q_gait", per_joint(s.q_gait)},
          {"q_act", per_joint(s.q_act)},
          {"q_dot", per_joint(s.q_dot)},
          {"fsm", std::string(to_string(s.fsm))},
          {"omega", s.omega},
          {"r", s.r},
          {"lambda", s.lambda},
          {"last_intent", s.last_intent ? nlohmann::json(std::string(to_string(*s.last_intent))) : nlohmann::json()},
          {"overruns", s.overruns}};
}

/// Writes the CSV header on construction and one row per sample.
class TelemetryCsvWriter {
public:
  explicit TelemetryCsvWriter(std::ostream& out) : out_(out) { out_ << telemetry_csv_header() << '\n'; }

  void write(const TelemetrySample& sample) { out_ << telemetry_csv_row(sample) << '\n'; }

private:
  std::ostream& out_;
};

} // namespace speechgait
