#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace speechgait {

enum class Side { left, right };
enum class JointType { hip, knee, ankle };

inline constexpr std::size_t kJointCount = 6;

/// One of the six actuated joints. Index order is left hip, knee, ankle,
/// then right hip, knee, ankle; every per-joint array uses this order.
class JointId {
public:
  constexpr JointId(Side side, JointType type) noexcept
      : index_(static_cast<std::size_t>(side) * 3 + static_cast<std::size_t>(type)) {}

  static constexpr JointId from_index(std::size_t index) noexcept {
    return JointId(index < 3 ? Side::left : Side::right, static_cast<JointType>(index % 3));
  }

  constexpr std::size_t index() const noexcept { return index_; }
  constexpr Side side() const noexcept { return index_ < 3 ? Side::left : Side::right; }
  constexpr JointType type() const noexcept { return static_cast<JointType>(index_ % 3); }

  friend constexpr bool operator==(JointId, JointId) noexcept = default;

private:
  std::size_t index_;
};

inline constexpr std::array<JointId, kJointCount> kAllJoints = {
    JointId::from_index(0), JointId::from_index(1), JointId::from_index(2),
    JointId::from_index(3), JointId::from_index(4), JointId::from_index(5)};

template <typename T>
using JointArray = std::array<T, kJointCount>;

/// Degrees per joint.
using JointAngles = JointArray<double>;

constexpr std::string_view to_string(Side side) noexcept {
  return side == Side::left ? "left" : "right";
}

constexpr std::string_view to_string(JointType type) noexcept {
  switch (type) {
  case JointType::hip:
    return "hip";
  case JointType::knee:
    return "knee";
  case JointType::ankle:
    return "ankle";
  }
  return "?";
}

/// "left_hip", "right_ankle", ...
inline std::string joint_name(JointId joint) {
  std::string name(to_string(joint.side()));
  name += '_';
  name += to_string(joint.type());
  return name;
}

inline std::optional<JointType> parse_joint_type(std::string_view text) {
  if (text == "hip")
    return JointType::hip;
  if (text == "knee")
    return JointType::knee;
  if (text == "ankle")
    return JointType::ankle;
  return std::nullopt;
}

} // namespace speechgait
