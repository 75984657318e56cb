#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "speechgait/cpg.hpp"
#include "speechgait/fsm_state.hpp"
#include "speechgait/intent.hpp"
#include "speechgait/joints.hpp"

namespace speechgait {

struct SafetyLimits {
  JointAngles q_min{};
  JointAngles q_max{};
  JointArray<double> v_max{}; ///< degrees/s

  /// hip [−20, 110], knee [−5, 120], ankle [−30, 30] degrees, 200 °/s everywhere.
  static SafetyLimits defaults() {
    SafetyLimits limits;
    for (JointId joint : kAllJoints) {
      const auto i = joint.index();
      switch (joint.type()) {
      case JointType::hip:
        limits.q_min[i] = -20.0;
        limits.q_max[i] = 110.0;
        break;
      case JointType::knee:
        limits.q_min[i] = -5.0;
        limits.q_max[i] = 120.0;
        break;
      case JointType::ankle:
        limits.q_min[i] = -30.0;
        limits.q_max[i] = 30.0;
        break;
      }
      limits.v_max[i] = 200.0;
    }
    return limits;
  }

  void validate() const {
    for (std::size_t i = 0; i < kJointCount; ++i) {
      if (!(q_min[i] < q_max[i]))
        throw std::invalid_argument("limits for " + joint_name(JointId::from_index(i)) + " need q_min < q_max");
      if (!(v_max[i] > 0.0))
        throw std::invalid_argument("limits for " + joint_name(JointId::from_index(i)) + " need v_max > 0");
    }
  }
};

struct PlannerState {
  FsmState fsm = FsmState::sitting;
  double transition_elapsed = 0.0;
  double transition_period = 2.0; ///< T, shared by every timed state
  SafetyLimits limits = SafetyLimits::defaults();
};

enum class EffectKind {
  none,         ///< nothing for the CPG to do
  ramp,         ///< set the CPG ramp mode
  modulate,     ///< apply a speed intent to the CPG targets
  sit_to_stand, ///< start the sit-to-stand profile
  stand_to_sit, ///< start the stand-to-sit profile
  rejected,
};

struct Effect {
  EffectKind kind = EffectKind::none;
  RampMode ramp = RampMode::otherwise;
  std::optional<Intent> intent;
  std::string reason;

  bool accepted() const noexcept { return kind != EffectKind::rejected; }
};

inline std::string describe(const Effect& effect) {
  switch (effect.kind) {
  case EffectKind::none:
    return "none";
  case EffectKind::ramp:
    return "ramp:" + std::string(to_string(effect.ramp));
  case EffectKind::modulate:
    return "modulate:" + std::string(effect.intent ? to_string(*effect.intent) : "?");
  case EffectKind::sit_to_stand:
    return "sit_to_stand";
  case EffectKind::stand_to_sit:
    return "stand_to_sit";
  case EffectKind::rejected:
    return "rejected";
  }
  return "?";
}

/// The transition graph: the locomotion edges plus the timed sit/stand
/// refinements. Walking → Walking is the speed self-loop.
constexpr bool is_allowed_transition(FsmState from, FsmState to) noexcept {
  using S = FsmState;
  return (from == S::sitting && to == S::sit_to_stand) || (from == S::sit_to_stand && to == S::standing) ||
         (from == S::standing && to == S::stand_to_sit) || (from == S::stand_to_sit && to == S::sitting) ||
         (from == S::standing && to == S::locomotion_initiation) ||
         (from == S::locomotion_initiation && to == S::walking) || (from == S::walking && to == S::walking) ||
         (from == S::walking && to == S::locomotion_completion) ||
         (from == S::locomotion_completion && to == S::standing);
}

/// Applies a user intent. Only the edges of the transition graph fire; any
/// other pair leaves the state unchanged and returns a rejected effect.
inline std::pair<PlannerState, Effect> handle_intent(const PlannerState& p, Intent k) {
  PlannerState next = p;
  Effect effect;
  auto enter = [&](FsmState state) {
    next.fsm = state;
    next.transition_elapsed = 0.0;
  };

  if (p.fsm == FsmState::sitting && k == Intent::stand) {
    enter(FsmState::sit_to_stand);
    effect.kind = EffectKind::sit_to_stand;
  } else if (p.fsm == FsmState::standing && k == Intent::sit) {
    enter(FsmState::stand_to_sit);
    effect.kind = EffectKind::stand_to_sit;
  } else if (p.fsm == FsmState::standing && k == Intent::walk) {
    enter(FsmState::locomotion_initiation);
    effect.kind = EffectKind::ramp;
    effect.ramp = RampMode::stand_to_walk;
  } else if (p.fsm == FsmState::walking && k == Intent::stop) {
    enter(FsmState::locomotion_completion);
    effect.kind = EffectKind::ramp;
    effect.ramp = RampMode::walk_to_stop;
  } else if (p.fsm == FsmState::walking && (k == Intent::speed_up || k == Intent::slow_down)) {
    effect.kind = EffectKind::modulate;
  } else {
    effect.kind = EffectKind::rejected;
    effect.reason = is_timed(p.fsm) ? "transition in progress"
                                    : "no " + std::string(to_string(k)) + " edge from " + std::string(to_string(p.fsm));
  }
  effect.intent = k;
  return {next, effect};
}

struct TickResult {
  PlannerState state;
  std::optional<FsmState> completed_from; ///< set when a timed state finished this tick
  Effect effect;                          ///< ramp to apply on completion, if any
};

/// Advances the transition timer; a timed state completes once its elapsed
/// time reaches T.
inline TickResult tick(const PlannerState& p, double dt) {
  if (!(dt > 0.0))
    throw std::invalid_argument("planner tick requires dt > 0");
  TickResult result{p, std::nullopt, {}};
  if (!is_timed(p.fsm))
    return result;

  auto& next = result.state;
  next.transition_elapsed = std::min(p.transition_elapsed + dt, p.transition_period);
  // Sub-nanosecond slack absorbs the rounding of T accumulated in dt steps.
  if (p.transition_elapsed + dt < p.transition_period - 1e-9)
    return result;

  result.completed_from = p.fsm;
  switch (p.fsm) {
  case FsmState::sit_to_stand:
    next.fsm = FsmState::standing;
    break;
  case FsmState::stand_to_sit:
    next.fsm = FsmState::sitting;
    break;
  case FsmState::locomotion_initiation:
    next.fsm = FsmState::walking;
    result.effect.kind = EffectKind::ramp;
    result.effect.ramp = RampMode::walking;
    break;
  case FsmState::locomotion_completion:
    next.fsm = FsmState::standing;
    result.effect.kind = EffectKind::ramp;
    result.effect.ramp = RampMode::otherwise;
    break;
  default:
    break;
  }
  next.transition_elapsed = 0.0;
  return result;
}

struct ClampResult {
  JointAngles q{};
  JointArray<bool> angle_limited{};
  JointArray<bool> rate_limited{};

  bool any() const noexcept {
    return std::any_of(angle_limited.begin(), angle_limited.end(), [](bool b) { return b; }) ||
           std::any_of(rate_limited.begin(), rate_limited.end(), [](bool b) { return b; });
  }
};

/// Clips each joint to [q_min, q_max], then limits the step from q_prev to v_max·dt.
inline ClampResult clamp_detailed(const JointAngles& q_des, const JointAngles& q_prev, const SafetyLimits& limits,
                                  double dt) {
  if (!(dt > 0.0))
    throw std::invalid_argument("clamp requires dt > 0");
  ClampResult out;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const double bounded = std::clamp(q_des[i], limits.q_min[i], limits.q_max[i]);
    out.angle_limited[i] = bounded != q_des[i];
    const double max_step = limits.v_max[i] * dt;
    const double limited = std::clamp(bounded, q_prev[i] - max_step, q_prev[i] + max_step);
    out.rate_limited[i] = limited != bounded;
    out.q[i] = limited;
  }
  return out;
}

inline JointAngles clamp(const JointAngles& q_des, const JointAngles& q_prev, const SafetyLimits& limits, double dt) {
  return clamp_detailed(q_des, q_prev, limits, dt).q;
}

} // namespace speechgait
