#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "speechgait/errors.hpp"
#include "speechgait/fsm_state.hpp"
#include "speechgait/joints.hpp"

namespace speechgait {

/// a0 + Σ_k (a_k cos kx + b_k sin kx), in degrees.
struct FourierSeries {
  double a0 = 0.0;
  std::vector<double> a;
  std::vector<double> b;

  std::size_t terms() const noexcept { return a.size(); }

  double operator()(double x) const noexcept {
    double sum = a0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double kx = static_cast<double>(k + 1) * x;
      sum += a[k] * std::cos(kx) + b[k] * std::sin(kx);
    }
    return sum;
  }

  /// d/dx of the series.
  double derivative(double x) const noexcept {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double n = static_cast<double>(k + 1);
      sum += n * (b[k] * std::cos(n * x) - a[k] * std::sin(n * x));
    }
    return sum;
  }

  double second_derivative(double x) const noexcept {
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double n = static_cast<double>(k + 1);
      sum -= n * n * (a[k] * std::cos(n * x) + b[k] * std::sin(n * x));
    }
    return sum;
  }
};

/// Per joint type (hip, knee, ankle): the walking series and the sit/stand series.
struct CoefficientTable {
  std::array<FourierSeries, 3> walk;
  std::array<FourierSeries, 3> sit_stand;
};

// ---------------------------------------------------------------------------
// Coefficient data file
//
//   # speechgait-fourier v1
//   state,joint,a0,a1,a2,a3,a4,a5,a6,b1,b2,b3,b4,b5,b6
//   walk,hip,40.69,...
//
// Empty cells mark absent terms. Every data row must hash (FNV-1a, 64 bit)
// to the bundled reference row for the same state and joint.

inline constexpr std::string_view kCoefficientFormatTag = "# speechgait-fourier v1";
inline constexpr std::string_view kCoefficientHeader = "state,joint,a0,a1,a2,a3,a4,a5,a6,b1,b2,b3,b4,b5,b6";

inline constexpr std::array<std::string_view, 6> kReferenceCoefficientRows = {
    "sit_stand,hip,105.40,-1.52,1.29,0.42,0.36,-0.04,-0.12,-3.86,2.92,0.24,-0.49,-0.28,0.01",
    "sit_stand,knee,140.20,-38.30,-1.75,0.55,1.32,0.14,,-29.22,8.39,4.14,0.15,-0.39,",
    "sit_stand,ankle,49.59,22.01,-1.31,0.28,-0.07,0.15,,35.11,-11.48,-4.05,-0.16,0.40,",
    "walk,hip,40.69,23.22,-4.49,0.40,0.70,1.08,-0.27,-8.65,3.34,1.39,0.80,0.34,0.07",
    "walk,knee,25.70,-3.83,-8.54,1.91,1.09,2.05,-0.31,-19.28,17.93,3.77,1.50,0.58,-0.90",
    "walk,ankle,-0.99,5.29,-8.58,-0.48,1.69,-0.04,1.30,3.61,-5.95,5.92,-2.12,1.02,-0.72",
};

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ull;
  }
  return hash;
}

namespace detail {

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t line) {
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw ParseError("bad coefficient '" + cell + "'", line);
  return value;
}

/// Parses one data row; returns {row index in the reference order, series}.
inline std::pair<std::size_t, FourierSeries> parse_coefficient_row(std::string_view row, std::size_t line) {
  const auto cells = split_csv(row);
  if (cells.size() != 15)
    throw ParseError("expected 15 cells, got " + std::to_string(cells.size()), line);

  std::size_t block = 0;
  if (cells[0] == "walk")
    block = 3;
  else if (cells[0] != "sit_stand")
    throw ParseError("unknown state '" + cells[0] + "'", line);
  const auto type = parse_joint_type(cells[1]);
  if (!type)
    throw ParseError("unknown joint '" + cells[1] + "'", line);

  FourierSeries series;
  series.a0 = parse_cell(cells[2], line);
  std::size_t terms = 0;
  for (std::size_t k = 0; k < 6; ++k) {
    const bool has_a = !cells[3 + k].empty();
    const bool has_b = !cells[9 + k].empty();
    if (has_a != has_b)
      throw ParseError("term " + std::to_string(k + 1) + " has only one of a/b", line);
    if (!has_a)
      break;
    ++terms;
  }
  for (std::size_t k = terms; k < 6; ++k)
    if (!cells[3 + k].empty() || !cells[9 + k].empty())
      throw ParseError("gap in Fourier terms", line);
  if (terms < 5)
    throw ParseError("series needs at least 5 terms", line);
  for (std::size_t k = 0; k < terms; ++k) {
    series.a.push_back(parse_cell(cells[3 + k], line));
    series.b.push_back(parse_cell(cells[9 + k], line));
  }
  return {block + static_cast<std::size_t>(*type), std::move(series)};
}

} // namespace detail

inline CoefficientTable default_coefficients() {
  CoefficientTable table;
  for (std::size_t i = 0; i < kReferenceCoefficientRows.size(); ++i) {
    auto [slot, series] = detail::parse_coefficient_row(kReferenceCoefficientRows[i], i + 1);
    (slot < 3 ? table.sit_stand[slot] : table.walk[slot - 3]) = std::move(series);
  }
  return table;
}

/// Reads a coefficient file and checks each row checksum against the
/// bundled reference. Throws ParseError on any mismatch or malformed row.
inline CoefficientTable read_coefficient_table(std::istream& in) {
  CoefficientTable table;
  std::array<bool, 6> seen{};
  std::string raw;
  std::size_t line = 0;
  bool tagged = false;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    while (!raw.empty() && (raw.back() == '\r' || raw.back() == ' ' || raw.back() == '\t'))
      raw.pop_back();
    if (raw.empty())
      continue;
    if (!tagged) {
      if (raw != kCoefficientFormatTag)
        throw ParseError("missing format tag '" + std::string(kCoefficientFormatTag) + "'", line);
      tagged = true;
      continue;
    }
    if (raw.front() == '#')
      continue;
    if (!header) {
      if (raw != kCoefficientHeader)
        throw ParseError("unexpected header", line);
      header = true;
      continue;
    }
    auto [slot, series] = detail::parse_coefficient_row(raw, line);
    if (seen[slot])
      throw ParseError("duplicate row", line);
    if (fnv1a64(raw) != fnv1a64(kReferenceCoefficientRows[slot]))
      throw ParseError("row checksum does not match the bundled reference", line);
    seen[slot] = true;
    (slot < 3 ? table.sit_stand[slot] : table.walk[slot - 3]) = std::move(series);
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      throw ParseError("coefficient file is missing the " + std::string(i < 3 ? "sit_stand " : "walk ") +
                       std::string(to_string(static_cast<JointType>(i % 3))) + " row");
  return table;
}

inline std::string write_coefficient_table() {
  std::ostringstream out;
  out << kCoefficientFormatTag << '\n' << kCoefficientHeader << '\n';
  for (auto row : kReferenceCoefficientRows)
    out << row << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Sit/stand profile

enum class SitStandDirection { sit_to_stand, stand_to_sit };

/// Motion segment of one joint's sit/stand series: the series is followed
/// from t = 0 to its global maximum t* on one period, rescaled to `duration`,
/// and mapped to exoskeleton coordinates as max q_s − q_s(t).
struct SitStandSegment {
  FourierSeries series;
  double omega_s = 0.0; ///< rad/s
  double t_peak = 0.0;  ///< t*, seconds on the series time axis
  double peak = 0.0;    ///< q_s(t*) = max q_s, degrees
};

struct SitStandProfile {
  std::array<SitStandSegment, 3> segments; ///< hip, knee, ankle
  double duration = 2.0;
  SitStandDirection direction = SitStandDirection::sit_to_stand;

  SitStandProfile reversed() const {
    SitStandProfile out = *this;
    out.direction = direction == SitStandDirection::sit_to_stand ? SitStandDirection::stand_to_sit
                                                                 : SitStandDirection::sit_to_stand;
    return out;
  }
};

/// Locates the global maximum of `series(omega_s t)` on [0, period]:
/// dense sampling, then Newton iterations on the derivative.
inline std::pair<double, double> locate_series_peak(const FourierSeries& series, double omega_s, double period,
                                                    std::size_t samples = 10000) {
  const double h = period / static_cast<double>(samples);
  double best_t = 0.0;
  double best = series(0.0);
  for (std::size_t i = 1; i <= samples; ++i) {
    const double t = h * static_cast<double>(i);
    const double v = series(omega_s * t);
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  const double lo = std::max(0.0, best_t - h);
  const double hi = std::min(period, best_t + h);
  double t = best_t;
  for (int iter = 0; iter < 50; ++iter) {
    const double d1 = omega_s * series.derivative(omega_s * t);
    const double d2 = omega_s * omega_s * series.second_derivative(omega_s * t);
    if (d2 >= 0.0)
      break;
    const double next = std::clamp(t - d1 / d2, lo, hi);
    if (std::abs(next - t) < 1e-15)
      break;
    t = next;
  }
  if (series(omega_s * t) >= best) {
    best_t = t;
    best = series(omega_s * t);
  }
  return {best_t, best};
}

/// Builds the sit/stand profile with nominal series period `period` and
/// motion time `duration`.
inline SitStandProfile make_sit_stand_profile(const CoefficientTable& table, double period = 4.0,
                                              double duration = 2.0) {
  if (!(period > 0.0) || !(duration > 0.0))
    throw std::invalid_argument("sit/stand period and duration must be positive");
  SitStandProfile profile;
  profile.duration = duration;
  for (std::size_t j = 0; j < 3; ++j) {
    auto& seg = profile.segments[j];
    seg.series = table.sit_stand[j];
    seg.omega_s = 2.0 * std::numbers::pi / period;
    std::tie(seg.t_peak, seg.peak) = locate_series_peak(seg.series, seg.omega_s, period);
    if (!(seg.t_peak > 0.0))
      throw std::invalid_argument("sit/stand series peaks at t = 0; no motion segment");
  }
  return profile;
}

/// Exoskeleton-frame angle of `joint` at motion time t (clamped to [0, duration]).
inline double sit_stand_angle(const SitStandProfile& profile, JointId joint, double t) {
  double u = std::clamp(t, 0.0, profile.duration);
  if (profile.direction == SitStandDirection::stand_to_sit)
    u = profile.duration - u;
  const auto& seg = profile.segments[static_cast<std::size_t>(joint.type())];
  const double series_time = u * seg.t_peak / profile.duration;
  return seg.peak - seg.series(seg.omega_s * series_time);
}

/// λ · r · f_joint(θ). Left and right sides share a series.
inline double walk_angle(const CoefficientTable& table, JointId joint, double theta, double r, double lambda) {
  return lambda * r * table.walk[static_cast<std::size_t>(joint.type())](theta);
}

// ---------------------------------------------------------------------------
// Pose dispatch

struct GaitContext {
  FsmState fsm = FsmState::sitting;
  JointArray<double> theta{};
  double r = 0.0;
  double lambda = 0.0;
  double transition_elapsed = 0.0;
};

class GaitModel {
public:
  explicit GaitModel(CoefficientTable table = default_coefficients(), double sit_stand_period = 4.0,
                     double transition_duration = 2.0)
      : table_(std::move(table)),
        sit_to_stand_(make_sit_stand_profile(table_, sit_stand_period, transition_duration)),
        stand_to_sit_(sit_to_stand_.reversed()) {
    for (JointId joint : kAllJoints)
      sitting_pose_[joint.index()] = sit_stand_angle(sit_to_stand_, joint, 0.0);
  }

  const CoefficientTable& table() const noexcept { return table_; }
  const SitStandProfile& sit_to_stand() const noexcept { return sit_to_stand_; }
  const SitStandProfile& stand_to_sit() const noexcept { return stand_to_sit_; }
  const JointAngles& sitting_pose() const noexcept { return sitting_pose_; }

  JointAngles desired_pose(const GaitContext& ctx) const {
    JointAngles q{};
    switch (ctx.fsm) {
    case FsmState::sitting:
      return sitting_pose_;
    case FsmState::standing:
      return q;
    case FsmState::sit_to_stand:
    case FsmState::stand_to_sit: {
      const auto& profile = ctx.fsm == FsmState::sit_to_stand ? sit_to_stand_ : stand_to_sit_;
      for (JointId joint : kAllJoints)
        q[joint.index()] = sit_stand_angle(profile, joint, ctx.transition_elapsed);
      return q;
    }
    case FsmState::locomotion_initiation:
    case FsmState::walking:
    case FsmState::locomotion_completion:
      for (JointId joint : kAllJoints)
        q[joint.index()] = walk_angle(table_, joint, ctx.theta[joint.index()], ctx.r, ctx.lambda);
      return q;
    }
    throw std::invalid_argument("desired_pose: unknown FSM state");
  }

private:
  CoefficientTable table_;
  SitStandProfile sit_to_stand_;
  SitStandProfile stand_to_sit_;
  JointAngles sitting_pose_{};
};

} // namespace speechgait
