#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string_view>

#include "speechgait/errors.hpp"
#include "speechgait/intent.hpp"
#include "speechgait/joints.hpp"

namespace speechgait {

enum class RampMode { stand_to_walk, walk_to_stop, walking, otherwise };

constexpr std::string_view to_string(RampMode mode) noexcept {
  switch (mode) {
  case RampMode::stand_to_walk:
    return "stand_to_walk";
  case RampMode::walk_to_stop:
    return "walk_to_stop";
  case RampMode::walking:
    return "walking";
  case RampMode::otherwise:
    return "otherwise";
  }
  return "?";
}

/// Sign convention of the Kuramoto coupling term.
enum class CouplingConvention {
  /// v_ij sin(θ_j − θ_i − φ_ij): θ_j − θ_i = φ_ij is the stable offset.
  stabilized,
  /// v_ij sin(θ_i − θ_j − φ_ij): the anti-phase offset is an unstable equilibrium.
  printed,
};

/// Wraps an angle to (−π, π].
inline double wrap_angle(double angle) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(angle, two_pi);
  if (wrapped <= -std::numbers::pi)
    wrapped += two_pi;
  else if (wrapped > std::numbers::pi)
    wrapped -= two_pi;
  return wrapped;
}

struct CpgParams {
  JointArray<JointArray<double>> coupling{};     ///< v_ij
  JointArray<JointArray<double>> phase_offset{}; ///< φ_ij, radians
  double beta_omega = 10.0 * std::numbers::pi;
  double beta_r = 10.0 * std::numbers::pi;
  double c_theta = 2.0; ///< frequency step per speed command, rad/s
  double c_r = 2.5;     ///< amplitude step per speed command
  double ramp_period = 2.0;
  double omega_min = 0.1;
  double omega_max = 3.0 * std::numbers::pi;
  double amplitude_min = 0.1;
  double amplitude_max = 6.0;
  CouplingConvention convention = CouplingConvention::stabilized;

  // Initial conditions.
  double omega_target0 = std::numbers::pi / 2.0;
  double amplitude_target0 = 1.0;
  double theta_left0 = 2.0 + std::numbers::pi;
  double theta_right0 = 2.0;
  double omega0 = 0.0;
  double r0 = 0.0;

  /// All-to-all coupling of strength `v`; zero offset within a side, π across sides.
  static CpgParams defaults(double v = 0.1) {
    CpgParams params;
    for (std::size_t i = 0; i < kJointCount; ++i) {
      for (std::size_t j = 0; j < kJointCount; ++j) {
        params.coupling[i][j] = v;
        const bool same_side = JointId::from_index(i).side() == JointId::from_index(j).side();
        params.phase_offset[i][j] = same_side ? 0.0 : std::numbers::pi;
      }
    }
    return params;
  }

  /// Throws std::invalid_argument when an invariant of the parameter set fails.
  void validate() const {
    for (std::size_t i = 0; i < kJointCount; ++i) {
      if (phase_offset[i][i] != 0.0)
        throw std::invalid_argument("phase offset of an oscillator with itself must be zero");
      for (std::size_t j = 0; j < kJointCount; ++j) {
        if (!(coupling[i][j] >= 0.0))
          throw std::invalid_argument("coupling strengths must be non-negative");
        if (std::abs(wrap_angle(phase_offset[i][j] + phase_offset[j][i])) > 1e-12)
          throw std::invalid_argument("phase offsets must be antisymmetric modulo 2π");
      }
    }
    if (!(ramp_period > 0.0) || !(beta_omega > 0.0) || !(beta_r > 0.0))
      throw std::invalid_argument("ramp period and modulation gains must be positive");
    if (!(omega_min <= omega_max) || !(amplitude_min <= amplitude_max))
      throw std::invalid_argument("modulation clamp ranges are inverted");
  }
};

struct CpgState {
  JointArray<double> theta{}; ///< radians
  double omega = 0.0;
  double omega_dot = 0.0;
  double r = 0.0;
  double r_dot = 0.0;
  double omega_target = 0.0;     ///< Ω_n
  double amplitude_target = 0.0; ///< A_n
  RampMode ramp_mode = RampMode::otherwise;
  double ramp_elapsed = 0.0;

  static CpgState initial(const CpgParams& params) {
    CpgState state;
    for (JointId joint : kAllJoints)
      state.theta[joint.index()] = joint.side() == Side::left ? params.theta_left0 : params.theta_right0;
    state.omega = params.omega0;
    state.r = params.r0;
    state.omega_target = params.omega_target0;
    state.amplitude_target = params.amplitude_target0;
    return state;
  }

  bool finite() const noexcept {
    return std::all_of(theta.begin(), theta.end(), [](double x) { return std::isfinite(x); }) &&
           std::isfinite(omega) && std::isfinite(omega_dot) && std::isfinite(r) && std::isfinite(r_dot) &&
           std::isfinite(omega_target) && std::isfinite(amplitude_target) && std::isfinite(ramp_elapsed);
  }
};

/// λ for a ramp mode after `elapsed` seconds; elapsed is clamped to [0, T].
inline double ramp_gain(RampMode mode, double elapsed, double period) noexcept {
  const double t = std::clamp(elapsed, 0.0, period);
  switch (mode) {
  case RampMode::stand_to_walk:
    return t / period;
  case RampMode::walk_to_stop:
    return 1.0 - t / period;
  case RampMode::walking:
    return 1.0;
  case RampMode::otherwise:
    return 0.0;
  }
  return 0.0;
}

inline double ramp_gain(const CpgState& state, const CpgParams& params) noexcept {
  return ramp_gain(state.ramp_mode, state.ramp_elapsed, params.ramp_period);
}

namespace detail {

// Integrated vector: six phases, then ω, ω̇, r, ṙ.
using CpgVector = std::array<double, kJointCount + 4>;

inline CpgVector pack(const CpgState& s) {
  CpgVector x{};
  std::copy(s.theta.begin(), s.theta.end(), x.begin());
  x[6] = s.omega;
  x[7] = s.omega_dot;
  x[8] = s.r;
  x[9] = s.r_dot;
  return x;
}

inline CpgVector rates(const CpgVector& x, const CpgParams& p, double omega_target, double amplitude_target,
                       double lambda) {
  CpgVector dx{};
  const double omega = x[6];
  for (std::size_t i = 0; i < kJointCount; ++i) {
    double coupling = 0.0;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const double arg = p.convention == CouplingConvention::stabilized ? x[j] - x[i] - p.phase_offset[i][j]
                                                                        : x[i] - x[j] - p.phase_offset[i][j];
      coupling += p.coupling[i][j] * std::sin(arg);
    }
    dx[i] = omega + coupling;
  }
  dx[6] = x[7];
  dx[7] = lambda * p.beta_omega * (p.beta_omega / 4.0 * (omega_target - omega) - x[7]);
  dx[8] = x[9];
  dx[9] = lambda * p.beta_r * (p.beta_r / 4.0 * (amplitude_target - x[8]) - x[9]);
  return dx;
}

} // namespace detail

/// Instantaneous phase velocities θ̇_i.
inline JointArray<double> phase_rates(const CpgState& state, const CpgParams& params) {
  const auto dx = detail::rates(detail::pack(state), params, state.omega_target, state.amplitude_target,
                                ramp_gain(state, params));
  JointArray<double> out{};
  std::copy_n(dx.begin(), kJointCount, out.begin());
  return out;
}

/// One classical Runge–Kutta step of the oscillator network and the
/// critically damped frequency/amplitude modulation. The ramp gain is
/// evaluated at each stage time, so a ramp in progress is integrated
/// consistently. Throws DivergenceError if the result is not finite.
inline CpgState step(const CpgState& state, const CpgParams& params, double dt) {
  if (!(dt > 0.0))
    throw std::invalid_argument("cpg step requires dt > 0");
  if (!state.finite())
    throw DivergenceError("cpg state is not finite");

  using detail::CpgVector;
  const auto x = detail::pack(state);
  auto lambda_at = [&](double offset) {
    return ramp_gain(state.ramp_mode, state.ramp_elapsed + offset, params.ramp_period);
  };
  auto eval = [&](const CpgVector& y, double offset) {
    return detail::rates(y, params, state.omega_target, state.amplitude_target, lambda_at(offset));
  };
  auto axpy = [](const CpgVector& y, double h, const CpgVector& k) {
    CpgVector out{};
    for (std::size_t i = 0; i < y.size(); ++i)
      out[i] = y[i] + h * k[i];
    return out;
  };

  const auto k1 = eval(x, 0.0);
  const auto k2 = eval(axpy(x, dt / 2.0, k1), dt / 2.0);
  const auto k3 = eval(axpy(x, dt / 2.0, k2), dt / 2.0);
  const auto k4 = eval(axpy(x, dt, k3), dt);

  CpgVector y{};
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

  CpgState next = state;
  std::copy_n(y.begin(), kJointCount, next.theta.begin());
  next.omega = y[6];
  next.omega_dot = y[7];
  next.r = y[8];
  next.r_dot = y[9];
  next.ramp_elapsed = state.ramp_elapsed + dt;

  if (!next.finite())
    throw DivergenceError("cpg integration diverged");
  return next;
}

/// Speed modulation: SpeedUp/SlowDown shift Ω_n by c_θ and A_n by c_r,
/// clamped to the configured ranges. Other intents leave the targets alone.
inline CpgState apply_intent(const CpgState& state, const CpgParams& params, Intent intent) {
  CpgState next = state;
  double sign = 0.0;
  if (intent == Intent::speed_up)
    sign = 1.0;
  else if (intent == Intent::slow_down)
    sign = -1.0;
  else
    return next;
  next.omega_target = std::clamp(state.omega_target + sign * params.c_theta, params.omega_min, params.omega_max);
  next.amplitude_target =
      std::clamp(state.amplitude_target + sign * params.c_r, params.amplitude_min, params.amplitude_max);
  return next;
}

inline CpgState set_ramp(const CpgState& state, RampMode mode) {
  CpgState next = state;
  next.ramp_mode = mode;
  next.ramp_elapsed = 0.0;
  return next;
}

/// wrap(θ_left − θ_right) of the first joint on each side.
inline double cross_side_offset(const CpgState& state) noexcept {
  return wrap_angle(state.theta[JointId(Side::left, JointType::hip).index()] -
                    state.theta[JointId(Side::right, JointType::hip).index()]);
}

} // namespace speechgait
