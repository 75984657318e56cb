#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "speechgait/cpg.hpp"
#include "speechgait/errors.hpp"
#include "speechgait/fsm_state.hpp"
#include "speechgait/gait.hpp"
#include "speechgait/planner.hpp"

namespace speechgait {

struct GaitConfig {
  std::string coefficients_file; ///< empty: bundled table
  double sit_stand_period = 4.0; ///< nominal period P of the sit/stand series
};

struct PlantConfig {
  double tau_track = 0.04;
  double dt = 0.01;
  FsmState initial_state = FsmState::sitting;
};

struct TransportConfig {
  std::string udp_address = "0.0.0.0";
  std::uint16_t udp_port = 9750;
  std::size_t max_datagram = 4096;
  std::string ui_address = "127.0.0.1";
  std::uint16_t ui_port = 9751;
  std::size_t telemetry_decimation = 5;
  std::size_t command_queue_capacity = 256;
  std::string static_dir; ///< optional dashboard assets served over HTTP
};

struct LatencyConfig {
  bool enabled = false;
  int min_ms = 500;
  int max_ms = 1000;
  bool allow_reorder = false;
  std::uint64_t seed = 0;
};

struct EngineConfig {
  CpgParams cpg = CpgParams::defaults();
  GaitConfig gait;
  SafetyLimits limits = SafetyLimits::defaults();
  PlantConfig plant;
  TransportConfig transport;
  LatencyConfig latency;

  void validate() const {
    try {
      cpg.validate();
      limits.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!(plant.dt > 0.0))
      throw ConfigError("plant.dt must be positive");
    if (plant.tau_track < 0.0)
      throw ConfigError("plant.tau_track must be non-negative");
    if (!(gait.sit_stand_period > 0.0))
      throw ConfigError("gait.sit_stand_period must be positive");
    if (plant.initial_state != FsmState::sitting && plant.initial_state != FsmState::standing)
      throw ConfigError("plant.initial_state must be Sitting or Standing");
    if (transport.telemetry_decimation == 0)
      throw ConfigError("transport.telemetry_decimation must be at least 1");
    if (transport.command_queue_capacity < 2)
      throw ConfigError("transport.command_queue_capacity must be at least 2");
    if (latency.min_ms < 0 || latency.max_ms < latency.min_ms)
      throw ConfigError("latency range must satisfy 0 <= min_ms <= max_ms");
  }
};

namespace detail {

class SectionReader {
public:
  SectionReader(const nlohmann::json& root, const char* name) : name_(name) {
    if (!root.contains(name))
      return;
    section_ = &root.at(name);
    if (!section_->is_object())
      throw ConfigError(std::string("config section '") + name + "' must be an object");
  }

  ~SectionReader() noexcept(false) {
    if (section_ == nullptr || std::uncaught_exceptions() > 0)
      return;
    for (const auto& [key, value] : section_->items())
      if (!known_.contains(key))
        throw ConfigError("unknown config key '" + name_ + "." + key + "'");
  }

  template <typename T>
  void read(const char* key, T& target) {
    known_.insert(key);
    if (section_ == nullptr || !section_->contains(key))
      return;
    try {
      target = section_->at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + name_ + "." + key + "': " + e.what());
    }
  }

  const nlohmann::json* child(const char* key) {
    known_.insert(key);
    if (section_ == nullptr || !section_->contains(key))
      return nullptr;
    return &section_->at(key);
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

private:
  std::string name_;
  const nlohmann::json* section_ = nullptr;
  std::set<std::string> known_;
};

inline FsmState state_from_json(const nlohmann::json& value, const std::string& where) {
  const auto state = value.is_string() ? parse_fsm_state(value.get<std::string>()) : std::nullopt;
  if (!state)
    throw ConfigError(where + " must name an FSM state");
  return *state;
}

} // namespace detail

/// Overlays the keys present in `root` on top of `config`. Unknown keys are errors.
inline void apply_config_json(EngineConfig& config, const nlohmann::json& root) {
  if (!root.is_object())
    throw ConfigError("config root must be a JSON object");
  static const std::set<std::string> sections = {"cpg", "gait", "limits", "plant", "transport", "latency"};
  for (const auto& [key, value] : root.items())
    if (!sections.contains(key))
      throw ConfigError("unknown config section '" + key + "'");

  {
    detail::SectionReader in(root, "cpg");
    auto& p = config.cpg;
    double v = std::numeric_limits<double>::quiet_NaN();
    double phi_ll = 0.0, phi_rr = 0.0, phi_lr = std::numbers::pi;
    in.read("v", v);
    in.read("phi_ll", phi_ll);
    in.read("phi_rr", phi_rr);
    in.read("phi_lr", phi_lr);
    if (!std::isnan(v))
      for (auto& row : p.coupling)
        row.fill(v);
    for (std::size_t i = 0; i < kJointCount; ++i) {
      for (std::size_t j = 0; j < kJointCount; ++j) {
        const auto si = JointId::from_index(i).side();
        const auto sj = JointId::from_index(j).side();
        if (i == j)
          p.phase_offset[i][j] = 0.0;
        else if (si == sj)
          p.phase_offset[i][j] = si == Side::left ? phi_ll : phi_rr;
        else
          p.phase_offset[i][j] = si == Side::left ? phi_lr : -phi_lr;
      }
    }
    if (const auto* matrix = in.child("coupling_matrix")) {
      try {
        p.coupling = matrix->get<JointArray<JointArray<double>>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("cpg.coupling_matrix must be a 6x6 array of numbers");
      }
    }
    in.read("beta_omega", p.beta_omega);
    in.read("beta_r", p.beta_r);
    in.read("c_theta", p.c_theta);
    in.read("c_r", p.c_r);
    in.read("T", p.ramp_period);
    in.read("omega_min", p.omega_min);
    in.read("omega_max", p.omega_max);
    in.read("amplitude_min", p.amplitude_min);
    in.read("amplitude_max", p.amplitude_max);
    in.read("Omega_0", p.omega_target0);
    in.read("A_0", p.amplitude_target0);
    in.read("theta_l0", p.theta_left0);
    in.read("theta_r0", p.theta_right0);
    in.read("omega0", p.omega0);
    in.read("r0", p.r0);
    std::string convention = p.convention == CouplingConvention::stabilized ? "stabilized" : "printed";
    in.read("coupling_convention", convention);
    if (convention == "stabilized")
      p.convention = CouplingConvention::stabilized;
    else if (convention == "printed")
      p.convention = CouplingConvention::printed;
    else
      throw ConfigError("cpg.coupling_convention must be 'stabilized' or 'printed'");
  }
  {
    detail::SectionReader in(root, "gait");
    in.read("coefficients_file", config.gait.coefficients_file);
    in.read("sit_stand_period", config.gait.sit_stand_period);
  }
  {
    detail::SectionReader in(root, "limits");
    auto apply = [&](const nlohmann::json& entry, const std::string& where, auto&& each_joint) {
      if (!entry.is_object())
        throw ConfigError(where + " must be an object");
      for (const auto& [key, value] : entry.items()) {
        if (key != "q_min" && key != "q_max" && key != "v_max")
          throw ConfigError("unknown config key '" + where + "." + key + "'");
        if (!value.is_number())
          throw ConfigError(where + "." + key + " must be a number");
        each_joint([&](std::size_t i) {
          auto& slot = key == "q_min" ? config.limits.q_min[i]
                                      : (key == "q_max" ? config.limits.q_max[i] : config.limits.v_max[i]);
          slot = value.template get<double>();
        });
      }
    };
    for (JointType type : {JointType::hip, JointType::knee, JointType::ankle}) {
      const std::string key(to_string(type));
      if (const auto* entry = in.child(key.c_str()))
        apply(*entry, in.path(key), [&](auto&& set) {
          for (JointId joint : kAllJoints)
            if (joint.type() == type)
              set(joint.index());
        });
    }
    for (JointId joint : kAllJoints) {
      const auto key = joint_name(joint);
      if (const auto* entry = in.child(key.c_str()))
        apply(*entry, in.path(key), [&](auto&& set) { set(joint.index()); });
    }
  }
  {
    detail::SectionReader in(root, "plant");
    in.read("tau_track", config.plant.tau_track);
    in.read("dt", config.plant.dt);
    if (const auto* state = in.child("initial_state"))
      config.plant.initial_state = detail::state_from_json(*state, "plant.initial_state");
  }
  {
    detail::SectionReader in(root, "transport");
    auto& t = config.transport;
    in.read("udp_address", t.udp_address);
    in.read("udp_port", t.udp_port);
    in.read("max_datagram", t.max_datagram);
    in.read("ui_address", t.ui_address);
    in.read("ui_port", t.ui_port);
    in.read("telemetry_decimation", t.telemetry_decimation);
    in.read("command_queue_capacity", t.command_queue_capacity);
    in.read("static_dir", t.static_dir);
  }
  {
    detail::SectionReader in(root, "latency");
    auto& l = config.latency;
    in.read("enabled", l.enabled);
    in.read("min_ms", l.min_ms);
    in.read("max_ms", l.max_ms);
    in.read("allow_reorder", l.allow_reorder);
    in.read("seed", l.seed);
  }
  config.validate();
}

inline EngineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  EngineConfig config;
  apply_config_json(config, root);
  // relative file references are taken relative to the config file
  const auto base = std::filesystem::path(path).parent_path();
  for (std::string* file : {&config.gait.coefficients_file, &config.transport.static_dir})
    if (!file->empty() && std::filesystem::path(*file).is_relative())
      *file = (base / *file).lexically_normal().string();
  return config;
}

/// The fully resolved configuration, in the same shape apply_config_json reads
/// (plus the coupling matrix written out explicitly).
inline nlohmann::json to_json(const EngineConfig& c) {
  const auto& p = c.cpg;
  nlohmann::json limits = nlohmann::json::object();
  for (JointId joint : kAllJoints) {
    const auto i = joint.index();
    limits[joint_name(joint)] = {{"q_min", c.limits.q_min[i]}, {"q_max", c.limits.q_max[i]}, {"v_max", c.limits.v_max[i]}};
  }
  const auto left = JointId(Side::left, JointType::hip).index();
  const auto left2 = JointId(Side::left, JointType::knee).index();
  const auto right = JointId(Side::right, JointType::hip).index();
  const auto right2 = JointId(Side::right, JointType::knee).index();
  return {
      {"cpg",
       {{"coupling_matrix", p.coupling},
        {"phi_ll", p.phase_offset[left][left2]},
        {"phi_rr", p.phase_offset[right][right2]},
        {"phi_lr", p.phase_offset[left][right]},
        {"beta_omega", p.beta_omega},
        {"beta_r", p.beta_r},
        {"c_theta", p.c_theta},
        {"c_r", p.c_r},
        {"T", p.ramp_period},
        {"omega_min", p.omega_min},
        {"omega_max", p.omega_max},
        {"amplitude_min", p.amplitude_min},
        {"amplitude_max", p.amplitude_max},
        {"Omega_0", p.omega_target0},
        {"A_0", p.amplitude_target0},
        {"theta_l0", p.theta_left0},
        {"theta_r0", p.theta_right0},
        {"omega0", p.omega0},
        {"r0", p.r0},
        {"coupling_convention", p.convention == CouplingConvention::stabilized ? "stabilized" : "printed"}}},
      {"gait", {{"coefficients_file", c.gait.coefficients_file}, {"sit_stand_period", c.gait.sit_stand_period}}},
      {"limits", limits},
      {"plant",
       {{"tau_track", c.plant.tau_track}, {"dt", c.plant.dt}, {"initial_state", std::string(to_string(c.plant.initial_state))}}},
      {"transport",
       {{"udp_address", c.transport.udp_address},
        {"udp_port", c.transport.udp_port},
        {"max_datagram", c.transport.max_datagram},
        {"ui_address", c.transport.ui_address},
        {"ui_port", c.transport.ui_port},
        {"telemetry_decimation", c.transport.telemetry_decimation},
        {"command_queue_capacity", c.transport.command_queue_capacity},
        {"static_dir", c.transport.static_dir}}},
      {"latency",
       {{"enabled", c.latency.enabled},
        {"min_ms", c.latency.min_ms},
        {"max_ms", c.latency.max_ms},
        {"allow_reorder", c.latency.allow_reorder},
        {"seed", c.latency.seed}}},
  };
}

/// Coefficient table selected by the config: the bundled table, or a file
/// that must match it row for row.
inline CoefficientTable load_coefficients(const GaitConfig& gait) {
  if (gait.coefficients_file.empty())
    return default_coefficients();
  std::ifstream in(gait.coefficients_file);
  if (!in)
    throw ConfigError("cannot open coefficient file '" + gait.coefficients_file + "'");
  return read_coefficient_table(in);
}

} // namespace speechgait
