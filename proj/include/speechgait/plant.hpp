#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "speechgait/fsm_state.hpp"
#include "speechgait/intent.hpp"
#include "speechgait/joints.hpp"

namespace speechgait {

/// Kinematic stand-in for the joint position controllers: first-order
/// tracking with time constant tau_track and a velocity ceiling.
struct PlantState {
  JointAngles q{};            ///< actual angle, degrees
  JointArray<double> q_dot{}; ///< degrees/s
  double tau_track = 0.04;    ///< seconds; 0 selects rate-limited pass-through
  JointArray<double> v_max{}; ///< degrees/s
};

/// Exact solution over one tick of  q̇ = clamp((q_cmd − q)/τ, ±v_max)
/// with q_cmd held constant: a saturated linear segment while the error
/// exceeds v_max·τ, then exponential decay.
inline PlantState actuate(const PlantState& plant, const JointAngles& q_cmd, double dt) {
  if (!(dt > 0.0))
    throw std::invalid_argument("actuate requires dt > 0");
  PlantState next = plant;
  const double tau = plant.tau_track;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const double v = plant.v_max[i];
    const double error = q_cmd[i] - plant.q[i];
    const double sign = error < 0.0 ? -1.0 : 1.0;
    double remaining = error;

    if (tau <= 0.0) {
      const double step = std::min(std::abs(error), v * dt);
      next.q[i] = plant.q[i] + sign * step;
      next.q_dot[i] = sign * step / dt;
      continue;
    }

    const double knee_error = v * tau; // |e| above this saturates the rate
    double time_left = dt;
    if (std::abs(remaining) > knee_error) {
      const double saturated_time = (std::abs(remaining) - knee_error) / v;
      if (saturated_time >= dt) {
        next.q[i] = plant.q[i] + sign * v * dt;
        next.q_dot[i] = sign * v;
        continue;
      }
      remaining = sign * knee_error;
      time_left -= saturated_time;
    }
    remaining *= std::exp(-time_left / tau);
    next.q[i] = q_cmd[i] - remaining;
    next.q_dot[i] = std::clamp(remaining / tau, -v, v);
  }
  return next;
}

struct TelemetrySample {
  double t = 0.0;
  JointAngles q_des{};  ///< commanded targets after the safety clamp
  JointAngles q_gait{}; ///< gait output before the clamp
  JointAngles q_act{};
  JointArray<double> q_dot{};
  FsmState fsm = FsmState::sitting;
  double omega = 0.0;
  double r = 0.0;
  double lambda = 0.0;
  std::optional<Intent> last_intent;
  std::uint64_t overruns = 0; ///< real-time ticks that missed their deadline
};

} // namespace speechgait
