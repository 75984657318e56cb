#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace speechgait {

enum class FsmState {
  sitting,
  sit_to_stand,
  standing,
  stand_to_sit,
  locomotion_initiation,
  walking,
  locomotion_completion,
};

inline constexpr std::array<FsmState, 7> kAllFsmStates = {
    FsmState::sitting,   FsmState::sit_to_stand,          FsmState::standing,
    FsmState::stand_to_sit, FsmState::locomotion_initiation, FsmState::walking,
    FsmState::locomotion_completion};

constexpr std::string_view to_string(FsmState state) noexcept {
  switch (state) {
  case FsmState::sitting:
    return "Sitting";
  case FsmState::sit_to_stand:
    return "SitToStand";
  case FsmState::standing:
    return "Standing";
  case FsmState::stand_to_sit:
    return "StandToSit";
  case FsmState::locomotion_initiation:
    return "LocomotionInitiation";
  case FsmState::walking:
    return "Walking";
  case FsmState::locomotion_completion:
    return "LocomotionCompletion";
  }
  return "?";
}

inline std::optional<FsmState> parse_fsm_state(std::string_view name) {
  for (FsmState state : kAllFsmStates)
    if (to_string(state) == name)
      return state;
  return std::nullopt;
}

/// States that run on a timer and complete on their own.
constexpr bool is_timed(FsmState state) noexcept {
  return state == FsmState::sit_to_stand || state == FsmState::stand_to_sit ||
         state == FsmState::locomotion_initiation || state == FsmState::locomotion_completion;
}

} // namespace speechgait
